//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use tcosim::accounting::{self, Ledger, Service};
use tcosim::engine::{self, Options, SimulationResult};
use tcosim::scenario::Scenario;
use tcosim::time::DAY;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> Scenario {
    Scenario::load(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Runs without per-job records.
pub fn run_lean(s: &Scenario) -> SimulationResult {
    engine::run_with(
        s,
        Options {
            record_jobs: false,
            ..Default::default()
        },
    )
    .unwrap_or_else(|e| panic!("run {:?}: {e}", s.name))
}

/// Focus-site stored volume at each whole day, indexed by day.
pub fn daily_stored(r: &SimulationResult) -> Vec<f64> {
    r.metrics
        .iter()
        .filter(|m| m.time % DAY == 0)
        .map(|m| m.stored_tb())
        .collect()
}

/// Cumulative job-input egress at each whole day.
pub fn daily_input_egress(r: &SimulationResult) -> Vec<f64> {
    r.metrics
        .iter()
        .filter(|m| m.time % DAY == 0)
        .map(|m| m.cumulative_input_egress_tb)
        .collect()
}

/// Whole-run compute/storage/egress/other percentages.
pub fn percents(ledger: &Ledger) -> [u32; 4] {
    let last = ledger.daily_totals().len().saturating_sub(1) as u32;
    accounting::fractions(ledger, (0, last))
        .expect("non-empty ledger")
        .percent
}

pub fn compute_usd(ledger: &Ledger) -> f64 {
    let by = ledger.total_by_service();
    [
        Service::ComputeCpu,
        Service::ComputeRam,
        Service::ComputeLocalDisk,
    ]
    .iter()
    .map(|s| by[s.index()].usd())
    .sum()
}

pub fn cpu_usd(ledger: &Ledger) -> f64 {
    ledger.total_by_service()[Service::ComputeCpu.index()].usd()
}
