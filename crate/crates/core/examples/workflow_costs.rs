//! Runs the five single-workflow windows and prints each one's
//! compute/storage/egress/other split.
//!
//! `cargo run --release --example workflow_costs`

use tcosim::accounting;
use tcosim::scenario::Scenario;

const WINDOWS: [&str; 5] = [
    "window_sim",
    "window_reco",
    "window_groupprod",
    "window_evgen",
    "window_repro",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "{:<18} {:>7} {:>7} {:>7} {:>7} {:>12}",
        "window", "compute", "storage", "egress", "other", "total_usd"
    );
    for name in WINDOWS {
        let path = format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
        let r = tcosim::engine::run(&Scenario::load(path)?)?;
        let last = r.ledger.daily_totals().len() as u32 - 1;
        let f = accounting::fractions(&r.ledger, (0, last))?;
        println!(
            "{name:<18} {:>6}% {:>6}% {:>6}% {:>6}% {:>12.2}",
            f.compute(),
            f.storage(),
            f.egress(),
            f.other(),
            r.ledger.total().usd()
        );
    }
    Ok(())
}
