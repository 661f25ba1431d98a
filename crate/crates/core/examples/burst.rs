//! Bursts a 50M-event simulation task onto 100,000 freshly ramped slots and
//! reports completion time, lost wall-clock and the compute bill.
//!
//! `cargo run --release --example burst -- [seeds]`

use tcosim::accounting::Service;
use tcosim::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(3);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/burst.json");
    let mut scenario = Scenario::load(path)?;
    println!("seed  events      done_h  lost   evict  cpu_usd   compute_usd");
    for seed in 1..=seeds {
        scenario.seed = Some(seed);
        let r = tcosim::engine::run_with(
            &scenario,
            tcosim::engine::Options {
                record_jobs: false,
                ..Default::default()
            },
        )?;
        let by = r.ledger.total_by_service();
        let compute: f64 = [
            Service::ComputeCpu,
            Service::ComputeRam,
            Service::ComputeLocalDisk,
        ]
        .iter()
        .map(|s| by[s.index()].usd())
        .sum();
        let s = &r.summary;
        println!(
            "{seed:<5} {:<11} {:<7.2} {:.4} {:.4} {:<9.0} {:.0}",
            s.events_completed,
            s.last_task_completion_h.unwrap_or(f64::NAN),
            s.lost_fraction,
            s.lost.eviction_core_hours / (s.productive_core_hours + s.lost.total()),
            by[Service::ComputeCpu.index()].usd(),
            compute
        );
    }
    Ok(())
}
