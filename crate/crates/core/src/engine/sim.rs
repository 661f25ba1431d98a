//! Simulation state and the main loop.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rand::SeedableRng;

use super::events::{EventKind, EventQueue, Payload};
use super::{JobRecord, MetricsSample, Options, SimulationResult, TransferRecord};
use crate::accounting::DailyUsage;
use crate::datamgmt::{DataState, DatasetId, RuleId};
use crate::pricing::SubscriptionPlan;
use crate::scenario::{ChangePlan, RulePlan, Setup};
use crate::time::{SimTime, DAY, HOUR};
use crate::topology::{SeId, SiteId};
use crate::workload::{self, FairsharePolicy, JobId, SimRng, WorkflowKind};
use crate::{Error, Result};

pub(super) struct Running {
    pub task: usize,
    pub index: u64,
    pub events: u64,
    pub cores: u32,
    pub kind: WorkflowKind,
    pub start: SimTime,
    /// Init-window loss included in the attempt, seconds.
    pub init_lost: SimTime,
    /// The scheduled end is a failure rather than completion.
    pub failing: bool,
}

#[derive(Debug, Clone)]
pub(super) enum TaskInput {
    None,
    Disk(DatasetId),
    Carousel {
        chunks: Vec<DatasetId>,
        arrived: usize,
        staged: usize,
    },
}

#[derive(Debug, Clone, Default)]
pub(super) struct OpenOutput {
    pub dataset: Option<(DatasetId, RuleId)>,
    pub jobs: u32,
}

#[derive(Debug, Clone)]
pub(super) struct TaskState {
    pub template: usize,
    pub kind: WorkflowKind,
    pub cores: u32,
    pub events_per_job: u64,
    pub total_events: u64,
    pub jobs_total: u64,
    pub next_index: u64,
    pub retries: VecDeque<(u64, u64)>,
    pub done_jobs: u64,
    pub nucleus: SeId,
    pub input: TaskInput,
    pub activated: bool,
    pub in_ready: bool,
    pub stalled: bool,
    pub complete: bool,
    pub outputs: Vec<OpenOutput>,
    pub analysis: bool,
}

impl TaskState {
    pub fn events_of(&self, index: u64) -> u64 {
        self.events_per_job
            .min(self.total_events - index * self.events_per_job)
    }

    /// Jobs with index below this have their input on disk.
    pub fn ready_limit(&self) -> u64 {
        match &self.input {
            TaskInput::Carousel { chunks, staged, .. } => {
                let n = chunks.len() as u64;
                if n == 0 {
                    self.jobs_total
                } else {
                    ((*staged as u64) * self.jobs_total)
                        .div_ceil(n)
                        .min(self.jobs_total)
                }
            }
            _ => self.jobs_total,
        }
    }

    pub fn has_ready_work(&self) -> bool {
        !self.stalled
            && !self.complete
            && (!self.retries.is_empty()
                || (self.next_index < self.jobs_total && self.next_index < self.ready_limit()))
    }

    pub fn take_job(&mut self) -> Option<(u64, u64)> {
        if let Some(j) = self.retries.pop_front() {
            return Some(j);
        }
        if self.next_index < self.jobs_total && self.next_index < self.ready_limit() {
            let i = self.next_index;
            self.next_index += 1;
            return Some((i, self.events_of(i)));
        }
        None
    }
}

pub struct Sim {
    pub(super) setup: Setup,
    pub(super) data: DataState,
    pub(super) q: EventQueue,
    pub(super) rng: SimRng,
    pub(super) opts: Options,
    pub(super) name: Option<String>,
    pub(super) plan: Option<SubscriptionPlan>,
    pub(super) events_processed: u64,

    // compute
    pub(super) slots: u64,
    pub(super) running_cores: u64,
    pub(super) running_by_kind: [u64; WorkflowKind::COUNT],
    pub(super) fresh: VecDeque<(SimTime, u64)>,
    pub(super) ramp_generation: u64,
    pub(super) policy: FairsharePolicy,
    pub(super) running: BTreeMap<JobId, Running>,
    pub(super) by_start: BTreeSet<(SimTime, JobId)>,
    pub(super) next_job: u64,
    pub(super) dispatch_pending: bool,

    // tasks
    pub(super) tasks: Vec<TaskState>,
    pub(super) task_names: Vec<String>,
    pub(super) active_tasks: BTreeSet<usize>,
    pub(super) ready: [VecDeque<usize>; WorkflowKind::COUNT],
    pub(super) nucleus_all: Option<SeId>,
    pub(super) nucleus_stream: Vec<Option<SeId>>,
    pub(super) analysis_times: Vec<SimTime>,
    /// Sealed production DAOD on the compute disk, refreshed hourly.
    pub(super) analysis_pool: Vec<DatasetId>,
    pub(super) analysis_pool_at: Option<SimTime>,
    pub(super) user_outputs: HashSet<DatasetId>,

    // data
    pub(super) initial_ids: Vec<DatasetId>,
    pub(super) focus_ses: Vec<SeId>,
    pub(super) pending_outputs: Vec<(DatasetId, usize)>,
    pub(super) pending_chunks: BTreeSet<usize>,
    pub(super) expiry_times: BTreeSet<SimTime>,

    // billing
    pub(super) usage: Vec<DailyUsage>,
    pub(super) storage_clock: SimTime,
    pub(super) circuits: Vec<(SimTime, u32)>,

    // observation
    pub(super) recent_egress: VecDeque<(SimTime, usize, SiteId, f64)>,
    pub(super) cumulative_input_egress: f64,
    pub(super) metrics: Vec<MetricsSample>,
    pub(super) jobs: Vec<JobRecord>,
    pub(super) transfers: Vec<TransferRecord>,
    pub(super) stats: Stats,
}

#[derive(Debug, Clone, Default)]
pub(super) struct Stats {
    pub events_completed: u64,
    pub tasks_released: u64,
    pub tasks_completed: u64,
    pub jobs_done: u64,
    pub jobs_evicted: u64,
    pub jobs_failed: u64,
    pub last_completion: Option<SimTime>,
    pub productive_core_s: f64,
    pub init_lost_core_s: f64,
    pub evicted_core_s: f64,
    pub failed_core_s: f64,
    pub analysis_arrivals: u64,
    pub analysis_without_input: u64,
    pub output_stalls: u64,
}

impl Sim {
    pub fn new(
        setup: Setup,
        opts: Options,
        name: Option<String>,
        plan: Option<SubscriptionPlan>,
    ) -> Result<Sim> {
        let mut rng = SimRng::seed_from_u64(setup.seed);
        let analysis_times = match &setup.analysis {
            Some(a) => workload::analysis_arrivals(a.rate_per_day, a.from, a.until, &mut rng)?,
            None => Vec::new(),
        };
        let days = setup.duration.div_ceil(DAY).max(1) as usize;
        let focus_ses = match setup.focus_site {
            Some(f) => setup
                .topology
                .se_ids()
                .filter(|&s| setup.topology.site_of(s) == f)
                .collect(),
            None => Vec::new(),
        };
        let mut circuits = Vec::new();
        if setup.topology.links.has_interconnect() && setup.topology.links.provisioned_circuits > 0
        {
            circuits.push((0, setup.topology.links.provisioned_circuits));
        }
        let data = DataState::for_topology(&setup.topology);
        let policy = setup.fairshare.clone();
        let nucleus_stream = vec![None; setup.stream_names.len()];
        Ok(Sim {
            data,
            q: EventQueue::default(),
            rng,
            opts,
            name,
            plan,
            events_processed: 0,
            slots: 0,
            running_cores: 0,
            running_by_kind: [0; WorkflowKind::COUNT],
            fresh: VecDeque::new(),
            ramp_generation: 0,
            policy,
            running: BTreeMap::new(),
            by_start: BTreeSet::new(),
            next_job: 0,
            dispatch_pending: false,
            tasks: Vec::new(),
            task_names: Vec::new(),
            active_tasks: BTreeSet::new(),
            ready: Default::default(),
            nucleus_all: None,
            nucleus_stream,
            analysis_times,
            analysis_pool: Vec::new(),
            analysis_pool_at: None,
            user_outputs: HashSet::new(),
            initial_ids: Vec::new(),
            focus_ses,
            pending_outputs: Vec::new(),
            pending_chunks: BTreeSet::new(),
            expiry_times: BTreeSet::new(),
            usage: vec![DailyUsage::default(); days],
            storage_clock: 0,
            circuits,
            recent_egress: VecDeque::new(),
            cumulative_input_egress: 0.0,
            metrics: Vec::new(),
            jobs: Vec::new(),
            transfers: Vec::new(),
            stats: Stats::default(),
            setup,
        })
    }

    pub(super) fn now(&self) -> SimTime {
        self.q.now()
    }

    pub(super) fn duration(&self) -> SimTime {
        self.setup.duration
    }

    fn schedule_initial(&mut self) -> Result<()> {
        self.create_initial_datasets()?;
        let duration = self.duration();
        for i in 0..self.setup.changes.len() {
            let t = self.setup.changes[i].0;
            if t <= duration {
                self.q.push(t, EventKind::ConfigChange, Payload::Change(i));
            }
        }
        for i in 0..self.setup.tasks.len() {
            let t = self.setup.tasks[i].release;
            if t <= duration {
                self.q.push(t, EventKind::TaskRelease, Payload::Task(i));
            }
        }
        for t in self.analysis_times.clone() {
            self.q
                .push(t, EventKind::TaskRelease, Payload::AnalysisArrival);
        }
        for i in 0..self.setup.placements.len() {
            let t = self.setup.placements[i].at;
            if t <= duration {
                self.q
                    .push(t, EventKind::TransferDone, Payload::Placement(i));
            }
        }
        self.q.push(0, EventKind::DeletionCycle, Payload::None);
        if self.setup.demand.is_some() {
            self.q.push(0, EventKind::Demand, Payload::None);
        }
        self.q.push(0, EventKind::Sample, Payload::None);
        if let Some(site) = self.setup.compute_site {
            // capacity present at the start is already initialised
            let slots = self.setup.topology.site(site).slots;
            self.apply_slots(slots as u64);
            self.fresh.clear();
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.schedule_initial()?;
        let duration = self.duration();
        while let Some(t) = self.q.peek_time() {
            if t > duration {
                break;
            }
            let e = self.q.pop().expect("peeked");
            self.advance_storage(e.time);
            match (e.kind, e.payload) {
                (EventKind::ConfigChange, Payload::Change(i)) => self.apply_change(i),
                (EventKind::ConfigChange, Payload::Slots(generation, slots)) => {
                    if generation == self.ramp_generation {
                        self.apply_slots(slots as u64);
                    }
                }
                (EventKind::RuleExpiry, _) => {
                    self.expiry_times.remove(&e.time);
                    self.data.expire_rules(e.time);
                }
                (EventKind::DeletionCycle, _) => {
                    self.deletion_cycle();
                    if e.time + HOUR <= duration {
                        self.q
                            .push(e.time + HOUR, EventKind::DeletionCycle, Payload::None);
                    }
                }
                (EventKind::TransferDone, Payload::Placement(i)) => self.run_placement(i),
                (EventKind::TransferDone, Payload::Chunk(task, k)) => self.chunk_arrived(task, k),
                (EventKind::TaskRelease, Payload::Task(i)) => self.release_task(i)?,
                (EventKind::TaskRelease, Payload::AnalysisArrival) => self.analysis_arrival(),
                (EventKind::Demand, _) => {
                    self.external_demand();
                    if e.time + DAY <= duration {
                        self.q.push(e.time + DAY, EventKind::Demand, Payload::None);
                    }
                }
                (EventKind::Eviction, Payload::Job(id)) => {
                    self.end_job(id, crate::workload::JobState::Evicted)
                }
                (EventKind::JobEnd, Payload::Job(id)) => self.job_end_event(id),
                (EventKind::JobStart, _) => self.dispatch(),
                (EventKind::Sample, _) => {
                    self.sample();
                    let next = e.time + self.setup.sample_interval;
                    if next <= duration {
                        self.q.push(next, EventKind::Sample, Payload::None);
                    }
                }
                (kind, payload) => {
                    return Err(
                        self.invariant(format!("unexpected event {kind:?} with {payload:?}"))
                    );
                }
            }
            self.events_processed += 1;
            self.check_invariants()?;
        }
        Ok(())
    }

    pub(super) fn invariant(&self, message: String) -> Error {
        Error::Invariant {
            event_index: self.events_processed,
            message,
        }
    }

    fn check_invariants(&self) -> Result<()> {
        if self.running_cores > self.slots {
            return Err(self.invariant(format!(
                "{} cores running on {} slots",
                self.running_cores, self.slots
            )));
        }
        if self.opts.audit_every_event {
            for se in self.setup.topology.se_ids() {
                self.data.audit(se).map_err(|m| self.invariant(m))?;
            }
            let by_kind: u64 = self.running_by_kind.iter().sum();
            let by_job: u64 = self.running.values().map(|r| r.cores as u64).sum();
            if by_kind != self.running_cores || by_job != self.running_cores {
                return Err(self.invariant(format!(
                    "running cores disagree: total {} by kind {by_kind} by job {by_job}",
                    self.running_cores
                )));
            }
        }
        Ok(())
    }

    pub(super) fn add_rule(&mut self, ds: DatasetId, se: SeId, rule: RulePlan) -> Option<RuleId> {
        let now = self.now();
        let lifetime = match rule {
            RulePlan::None => return None,
            RulePlan::Persistent => None,
            RulePlan::Temporary(l) => Some(l),
        };
        let id = self.data.add_rule(ds, se, lifetime, now);
        if let Some(l) = lifetime {
            let at = now + l;
            if at <= self.duration() && self.expiry_times.insert(at) {
                self.q.push(at, EventKind::RuleExpiry, Payload::None);
            }
        }
        Some(id)
    }

    fn apply_change(&mut self, i: usize) {
        let change = self.setup.changes[i].1.clone();
        match change {
            ChangePlan::SetSlots { site, slots } => {
                self.setup.topology.sites[site.0 as usize].slots = slots;
                if Some(site) == self.setup.compute_site {
                    self.set_slots(slots);
                }
            }
            ChangePlan::SetGreedyDeletion { se, enabled } => {
                self.setup.topology.se_mut(se).greedy_deletion = enabled;
            }
            ChangePlan::SetDistances { src, dst, distance } => {
                let d = &mut self.setup.topology.distances;
                match dst {
                    Some(dst) => d.set(src, dst, distance),
                    None => d.set_from(src, distance),
                }
                .expect("validated distance");
            }
            ChangePlan::SetNucleus { se, stream } => match stream {
                Some(s) => self.nucleus_stream[s] = Some(se),
                None => self.nucleus_all = Some(se),
            },
            ChangePlan::EnableInterconnect { src, dst, circuits } => {
                let links = &mut self.setup.topology.links;
                links.set_interconnect(src, dst);
                links.provisioned_circuits += circuits;
                if circuits > 0 {
                    self.circuits.push((self.now(), circuits));
                }
            }
            ChangePlan::SetFairshare(policy) => {
                self.policy = policy;
                self.schedule_dispatch();
            }
            ChangePlan::SetCapacity { se, capacity_tb } => {
                self.setup.topology.se_mut(se).capacity_tb = capacity_tb;
                self.data.set_capacity(se, capacity_tb);
                self.retry_stalled();
            }
            ChangePlan::Drain { se, to } => self.drain(se, to),
        }
    }

    fn sample(&mut self) {
        let now = self.now();
        while self
            .recent_egress
            .front()
            .is_some_and(|&(t, ..)| t + DAY <= now)
        {
            self.recent_egress.pop_front();
        }
        let mut egress_by_activity = [0.0; 4];
        let mut egress_by_destination: BTreeMap<String, f64> = BTreeMap::new();
        for &(_, a, dst, tb) in &self.recent_egress {
            egress_by_activity[a] += tb;
            *egress_by_destination
                .entry(self.setup.topology.site(dst).name.clone())
                .or_default() += tb;
        }
        let mut stored_by_class = [0.0; 3];
        let mut stored_by_format = [0.0; 7];
        for &se in &self.focus_ses {
            for (a, b) in stored_by_class
                .iter_mut()
                .zip(self.data.stored_by_class(se))
            {
                *a += b.max(0.0);
            }
            for (a, b) in stored_by_format
                .iter_mut()
                .zip(self.data.stored_by_format(se))
            {
                *a += b.max(0.0);
            }
        }
        let mut running_jobs = [0u32; WorkflowKind::COUNT];
        for r in self.running.values() {
            running_jobs[r.kind.index()] += 1;
        }
        let mut queued = 0u64;
        let mut staging = 0u64;
        for &t in &self.active_tasks {
            let task = &self.tasks[t];
            let limit = task.ready_limit().max(task.next_index);
            staging += task.jobs_total - limit;
            queued += task.retries.len() as u64 + (limit - task.next_index);
        }
        let stalled = self
            .active_tasks
            .iter()
            .filter(|&&t| self.tasks[t].stalled)
            .count() as u32;
        self.metrics.push(MetricsSample {
            time: now,
            slots: self.slots,
            running_cores: self.running_cores,
            running_jobs,
            queued_jobs: queued,
            staging_jobs: staging,
            stalled_tasks: stalled,
            stored_by_class,
            stored_by_format,
            egress_by_activity,
            egress_by_destination,
            cumulative_input_egress_tb: self.cumulative_input_egress,
        });
    }

    pub fn finish(mut self) -> Result<SimulationResult> {
        let end = self.duration();
        self.advance_storage(end);
        self.close_running_jobs(end);
        let ledger = self.build_ledger()?;
        let summary = self.summary(&ledger);
        Ok(SimulationResult {
            ledger,
            daily_usage: self.usage,
            metrics: self.metrics,
            jobs: self.jobs,
            transfers: self.transfers,
            task_names: self.task_names,
            summary,
        })
    }
}
