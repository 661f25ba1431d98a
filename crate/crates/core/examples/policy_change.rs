//! Runs the first 200 days of a cloud site and prints stored volume, daily
//! growth and job-input egress around the day-147 switch to greedy deletion
//! and day-160 source-distance change.
//!
//! `cargo run --release --example policy_change`

use tcosim::scenario::Scenario;
use tcosim::time::DAY;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/initial_phase.json"
    ))?;
    let r = tcosim::engine::run_with(
        &scenario,
        tcosim::engine::Options {
            record_jobs: false,
            ..Default::default()
        },
    )?;
    let daily: Vec<_> = r.metrics.iter().filter(|m| m.time % DAY == 0).collect();
    println!("day  stored_tb  growth_tb/day  input_egress_tb/day");
    for d in (10..daily.len()).step_by(10) {
        let (now, before) = (daily[d], daily[d - 10]);
        println!(
            "{d:<4} {:>9.0}  {:>13.1}  {:>19.2}",
            now.stored_tb(),
            (now.stored_tb() - before.stored_tb()) / 10.0,
            (now.cumulative_input_egress_tb - before.cumulative_input_egress_tb) / 10.0
        );
    }
    Ok(())
}
