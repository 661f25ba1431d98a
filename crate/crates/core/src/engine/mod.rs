//! Deterministic discrete-event core.
//!
//! One run owns a single random stream. Draw order: analysis arrival times
//! first (at setup), then, in event order, per job start the walltime, the
//! eviction draw and the failure draw; per daily demand pass one Bernoulli
//! draw per candidate dataset followed by a destination pick on success; per
//! analysis arrival one input pick.

mod billing;
mod compute;
mod data;
pub mod events;
mod sim;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::accounting::{DailyUsage, Ledger, StoragePoint};
use crate::datamgmt::{DatasetId, Format, ReplicaClass};
use crate::pricing::{PricingCatalog, SubscriptionPlan};
use crate::scenario::Scenario;
use crate::time::{self, SimTime};
use crate::topology::LinkClass;
use crate::workload::{JobState, WorkflowKind};
use crate::Result;

pub use sim::Sim;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    /// Cross-check volume conservation, occupancy and slot capacity after
    /// every event. Slow; meant for tests.
    pub audit_every_event: bool,
    /// Keep per-attempt job records.
    pub record_jobs: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            audit_every_event: false,
            record_jobs: true,
        }
    }
}

/// Why data moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    /// Jobs elsewhere reading this site's data as input.
    ProductionInput,
    /// Outputs shipped to a task nucleus.
    ProductionOutput,
    Consolidation,
    /// Analysis-format reads and analysis outputs.
    Analysis,
    /// Task input brought to the compute site.
    InputStaging,
    /// Scheduled replication from the scenario.
    Placement,
}

impl Activity {
    pub const REPORTED: [Activity; 4] = [
        Activity::ProductionInput,
        Activity::ProductionOutput,
        Activity::Consolidation,
        Activity::Analysis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::ProductionInput => "production_input",
            Activity::ProductionOutput => "production_output",
            Activity::Consolidation => "consolidation",
            Activity::Analysis => "analysis",
            Activity::InputStaging => "input_staging",
            Activity::Placement => "placement",
        }
    }

    fn reported_index(self) -> Option<usize> {
        Activity::REPORTED.iter().position(|&a| a == self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSample {
    pub time: SimTime,
    pub slots: u64,
    pub running_cores: u64,
    pub running_jobs: [u32; WorkflowKind::COUNT],
    pub queued_jobs: u64,
    /// Jobs waiting for tape-staged input.
    pub staging_jobs: u64,
    pub stalled_tasks: u32,
    /// Focus-site storage, TB.
    pub stored_by_class: [f64; 3],
    pub stored_by_format: [f64; 7],
    /// Egress out of the focus site over the trailing 24 hours, TB, in
    /// [`Activity::REPORTED`] order.
    pub egress_by_activity: [f64; 4],
    pub egress_by_destination: BTreeMap<String, f64>,
    /// Input-read egress out of the focus site since the start, TB.
    pub cumulative_input_egress_tb: f64,
}

impl MetricsSample {
    pub fn stored_tb(&self) -> f64 {
        self.stored_by_class.iter().sum()
    }

    pub fn storage_point(&self) -> StoragePoint {
        StoragePoint {
            time_h: time::to_hours(self.time),
            stored_tb: self.stored_tb(),
            cumulative_input_egress_tb: self.cumulative_input_egress_tb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobRecord {
    pub id: u64,
    pub task: u32,
    pub kind: WorkflowKind,
    pub index: u64,
    pub events: u64,
    pub cores: u32,
    pub start: SimTime,
    pub end: SimTime,
    /// `Running` marks attempts cut off by the end of the run.
    pub state: JobState,
    /// Wall-clock lost by this attempt, seconds.
    pub lost: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferRecord {
    pub time: SimTime,
    pub dataset: DatasetId,
    pub format: Format,
    pub tb: f64,
    pub src: String,
    pub dst: String,
    pub activity: Activity,
    pub link: LinkClass,
    /// Billed as egress (cloud source, different destination site).
    pub billable: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LostTime {
    pub init_core_hours: f64,
    pub eviction_core_hours: f64,
    pub failure_core_hours: f64,
}

impl LostTime {
    pub fn total(&self) -> f64 {
        self.init_core_hours + self.eviction_core_hours + self.failure_core_hours
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub seed: u64,
    pub duration_days: f64,
    pub events_processed: u64,
    pub events_completed: u64,
    pub tasks_released: u64,
    pub tasks_completed: u64,
    pub jobs_done: u64,
    pub jobs_evicted: u64,
    pub jobs_failed: u64,
    pub jobs_unfinished: u64,
    /// Time the last task completed, hours.
    pub last_task_completion_h: Option<f64>,
    pub productive_core_hours: f64,
    pub lost: LostTime,
    pub lost_fraction: f64,
    pub eviction_fraction: f64,
    pub analysis_arrivals: u64,
    pub analysis_without_input: u64,
    pub output_stalls: u64,
    pub list_total_usd: f64,
    pub cost_by_service_usd: BTreeMap<String, f64>,
    pub overhead_usd_per_day: f64,
    pub catalog: PricingCatalog,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<SubscriptionPlan>,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub ledger: Ledger,
    pub daily_usage: Vec<DailyUsage>,
    pub metrics: Vec<MetricsSample>,
    pub jobs: Vec<JobRecord>,
    pub transfers: Vec<TransferRecord>,
    pub task_names: Vec<String>,
    pub summary: Summary,
}

impl SimulationResult {
    pub fn storage_points(&self) -> Vec<StoragePoint> {
        self.metrics
            .iter()
            .map(MetricsSample::storage_point)
            .collect()
    }

    /// Focus-site stored TB by replica class at each sample.
    pub fn stored_series(&self, class: ReplicaClass) -> Vec<(SimTime, f64)> {
        self.metrics
            .iter()
            .map(|m| (m.time, m.stored_by_class[class.index()]))
            .collect()
    }
}

pub fn run(scenario: &Scenario) -> Result<SimulationResult> {
    run_with(scenario, Options::default())
}

pub fn run_with(scenario: &Scenario, options: Options) -> Result<SimulationResult> {
    let setup = scenario.compile()?;
    let mut sim = Sim::new(
        setup,
        options,
        scenario.name.clone(),
        scenario.subscription.clone(),
    )?;
    sim.run()?;
    sim.finish()
}
