//! Workflow templates, fairshare brokering and the stochastic pieces of job
//! execution: slot ramps with initialisation losses, spot preemption, tape
//! carousel staging and user-analysis arrivals.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::datamgmt::{DatasetId, Format};
use crate::time::{self, SimTime, HOUR};
use crate::topology::SeId;
use crate::{Error, Result};

/// The single random stream of a run.
pub type SimRng = rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum WorkflowKind {
    Evgen,
    Sim,
    Reco,
    Groupprod,
    Repro,
    Analysis,
}

impl WorkflowKind {
    pub const ALL: [WorkflowKind; 6] = [
        WorkflowKind::Evgen,
        WorkflowKind::Sim,
        WorkflowKind::Reco,
        WorkflowKind::Groupprod,
        WorkflowKind::Repro,
        WorkflowKind::Analysis,
    ];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WorkflowKind::Evgen => "EVGEN",
            WorkflowKind::Sim => "SIM",
            WorkflowKind::Reco => "RECO",
            WorkflowKind::Groupprod => "GROUPPROD",
            WorkflowKind::Repro => "REPRO",
            WorkflowKind::Analysis => "ANALYSIS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Format,
    pub tb_per_1k_events: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowTemplate {
    pub name: String,
    pub kind: WorkflowKind,
    pub events_per_job: u64,
    pub cores_per_job: u32,
    pub walltime_mean_h: f64,
    #[serde(default)]
    pub walltime_spread_h: f64,
    #[serde(default)]
    pub ram_gb_per_core: f64,
    #[serde(default)]
    pub local_disk_gb_per_core: f64,
    #[serde(default)]
    pub input_format: Option<Format>,
    pub output_format: Format,
    #[serde(default)]
    pub input_tb_per_1k_events: f64,
    #[serde(default)]
    pub output_tb_per_1k_events: f64,
    /// Secondary products (e.g. DAOD and DESD next to AOD).
    #[serde(default)]
    pub extra_outputs: Vec<OutputSpec>,
}

impl WorkflowTemplate {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.events_per_job == 0 {
            return Err("events_per_job must be > 0".into());
        }
        if self.cores_per_job == 0 {
            return Err("cores_per_job must be >= 1".into());
        }
        if !(self.walltime_mean_h > 0.0) {
            return Err("walltime_mean_h must be > 0".into());
        }
        if !(self.walltime_spread_h >= 0.0 && self.walltime_spread_h < self.walltime_mean_h) {
            return Err("walltime_spread_h must be in [0, walltime_mean_h)".into());
        }
        let intensities = [
            self.ram_gb_per_core,
            self.local_disk_gb_per_core,
            self.input_tb_per_1k_events,
            self.output_tb_per_1k_events,
        ];
        if intensities
            .iter()
            .chain(self.extra_outputs.iter().map(|o| &o.tb_per_1k_events))
            .any(|v| !(*v >= 0.0))
        {
            return Err("resource and I/O intensities must be >= 0".into());
        }
        Ok(())
    }

    pub fn outputs(&self) -> impl Iterator<Item = OutputSpec> + '_ {
        std::iter::once(OutputSpec {
            format: self.output_format,
            tb_per_1k_events: self.output_tb_per_1k_events,
        })
        .chain(self.extra_outputs.iter().copied())
    }

    pub fn jobs_for(&self, total_events: u64) -> u64 {
        total_events.div_ceil(self.events_per_job)
    }

    /// Uniform in `[mean - spread, mean + spread]`.
    pub fn sample_walltime(&self, rng: &mut SimRng) -> SimTime {
        let h = if self.walltime_spread_h > 0.0 {
            rng.random_range(
                self.walltime_mean_h - self.walltime_spread_h
                    ..=self.walltime_mean_h + self.walltime_spread_h,
            )
        } else {
            self.walltime_mean_h
        };
        time::from_hours(h).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub u64);

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub name: String,
    pub template: usize,
    pub kind: WorkflowKind,
    pub total_events: u64,
    pub nucleus: SeId,
    pub input: TaskInput,
    pub release_time: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskInput {
    None,
    /// Input replicated to the compute site when the task is first brokered.
    Disk(DatasetId),
    /// Input recalled from tape in hourly chunks; job `i` reads chunk
    /// `i * chunks / jobs`.
    Carousel(Vec<DatasetId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum JobState {
    Queued,
    Staging,
    Running,
    Done,
    Evicted,
    Failed,
}

impl JobState {
    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Queued => "QUEUED",
            JobState::Staging => "STAGING",
            JobState::Running => "RUNNING",
            JobState::Done => "DONE",
            JobState::Evicted => "EVICTED",
            JobState::Failed => "FAILED",
        }
    }

    /// Allowed lifecycle moves. Evicted and failed jobs go back to the queue.
    pub fn can_move_to(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Queued, Staging)
                | (Staging, Queued)
                | (Queued, Running)
                | (Running, Done)
                | (Running, Evicted)
                | (Running, Failed)
                | (Evicted, Queued)
                | (Failed, Queued)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: JobId,
    pub task: TaskId,
    /// Position within the task, `0..jobs`.
    pub index: u64,
    pub events: u64,
    pub state: JobState,
    pub start: Option<SimTime>,
    pub end: Option<SimTime>,
    pub cores: u32,
}

impl Job {
    pub fn transition(&mut self, next: JobState) -> std::result::Result<(), String> {
        if self.state.can_move_to(next) {
            self.state = next;
            Ok(())
        } else {
            Err(format!(
                "job {}: illegal transition {} -> {}",
                self.id.0,
                self.state.as_str(),
                next.as_str()
            ))
        }
    }
}

/// Target wall-clock shares per workflow kind, normalised to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FairsharePolicy {
    shares: [f64; WorkflowKind::COUNT],
}

impl FairsharePolicy {
    pub fn new(weights: &BTreeMap<WorkflowKind, f64>) -> Result<Self> {
        let mut shares = [0.0; WorkflowKind::COUNT];
        for (k, &w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config(format!(
                    "fairshare weight for {} must be >= 0",
                    k.as_str()
                )));
            }
            shares[k.index()] = w;
        }
        let total: f64 = shares.iter().sum();
        if !(total > 0.0) {
            return Err(Error::config("fairshare weights must not all be zero"));
        }
        shares.iter_mut().for_each(|s| *s /= total);
        Ok(FairsharePolicy { shares })
    }

    pub fn single(kind: WorkflowKind) -> Self {
        let mut shares = [0.0; WorkflowKind::COUNT];
        shares[kind.index()] = 1.0;
        FairsharePolicy { shares }
    }

    pub fn share(&self, kind: WorkflowKind) -> f64 {
        self.shares[kind.index()]
    }
}

/// What the broker needs to see of the waiting work.
pub trait JobQueue {
    type Job;
    /// Cores of the next job of `kind`, if any is waiting.
    fn peek_cores(&self, kind: WorkflowKind) -> Option<u32>;
    fn pop(&mut self, kind: WorkflowKind) -> Option<Self::Job>;
}

/// Fills free slots, always serving the kind furthest below its target share
/// of running cores first. If that kind's next job does not fit, brokering
/// stops so the kind is not starved by smaller jobs; kinds whose jobs could
/// never fit `capacity` are skipped. `running_cores` is updated in place.
pub fn broker<Q: JobQueue>(
    queue: &mut Q,
    policy: &FairsharePolicy,
    free_slots: u64,
    capacity: u64,
    running_cores: &mut [u64; WorkflowKind::COUNT],
) -> Vec<Q::Job> {
    let mut free = free_slots;
    let mut out = Vec::new();
    loop {
        let total: u64 = running_cores.iter().sum();
        let mut best: Option<(WorkflowKind, u32, f64)> = None;
        for kind in WorkflowKind::ALL {
            let share = policy.share(kind);
            if share <= 0.0 {
                continue;
            }
            let Some(cores) = queue.peek_cores(kind) else {
                continue;
            };
            if cores as u64 > capacity {
                continue;
            }
            let achieved = if total == 0 {
                0.0
            } else {
                running_cores[kind.index()] as f64 / total as f64
            };
            let deficit = share - achieved;
            if best.is_none_or(|(_, _, d)| deficit > d) {
                best = Some((kind, cores, deficit));
            }
        }
        let Some((kind, cores, _)) = best else { break };
        if cores as u64 > free {
            break;
        }
        let Some(job) = queue.pop(kind) else { break };
        free -= cores as u64;
        running_cores[kind.index()] += cores as u64;
        out.push(job);
    }
    out
}

/// Ramp duration at which initialisation contention is at its worst.
pub const REFERENCE_RAMP_H: f64 = 1.0;

/// Resolution of ramp slot steps.
pub const RAMP_STEP: SimTime = 5 * 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampProfile {
    pub ramp_duration_h: f64,
    /// Fraction of wall-clock lost on a fresh slot during its init window
    /// under worst-case contention.
    pub init_loss_fraction: f64,
    #[serde(default = "default_init_window_h")]
    pub init_window_h: f64,
}

fn default_init_window_h() -> f64 {
    2.0
}

impl RampProfile {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.ramp_duration_h > 0.0) {
            return Err("ramp_duration_h must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.init_loss_fraction) {
            return Err("init_loss_fraction must be in [0, 1)".into());
        }
        if !(self.init_window_h >= 0.0) {
            return Err("init_window_h must be >= 0".into());
        }
        Ok(())
    }

    /// Loss fraction after accounting for how many nodes initialise at once:
    /// spreading the same target over a longer ramp lowers contention.
    pub fn effective_loss_fraction(&self) -> f64 {
        self.init_loss_fraction * (REFERENCE_RAMP_H / self.ramp_duration_h).min(1.0)
    }
}

/// Piecewise-constant slot availability produced by a ramp.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotCurve {
    pub start: SimTime,
    pub from: u32,
    pub target: u32,
    steps: Vec<(SimTime, u32)>,
}

impl SlotCurve {
    pub fn steps(&self) -> &[(SimTime, u32)] {
        &self.steps
    }

    pub fn slots_at(&self, t: SimTime) -> u32 {
        if t < self.start {
            return self.from;
        }
        self.steps
            .iter()
            .take_while(|&&(at, _)| at <= t)
            .last()
            .map_or(self.from, |&(_, s)| s)
    }

    /// Time the curve reaches its target.
    pub fn full_at(&self) -> SimTime {
        self.steps.last().map_or(self.start, |&(t, _)| t)
    }
}

/// Linear slot growth from `from` to `target` over the profile's ramp,
/// quantised to [`RAMP_STEP`].
pub fn ramp(from: u32, target: u32, profile: &RampProfile, start: SimTime) -> SlotCurve {
    let duration = time::from_hours(profile.ramp_duration_h).max(1);
    let n = duration.div_ceil(RAMP_STEP).max(1);
    let steps = (1..=n)
        .map(|k| {
            let at = start + (k * duration) / n;
            let frac = k as f64 / n as f64;
            let slots = from as f64 + (target as f64 - from as f64) * frac;
            (at, slots.round() as u32)
        })
        .collect();
    SlotCurve {
        start,
        from,
        target,
        steps,
    }
}

/// Extra wall-clock a job spends because it started on a slot still inside
/// its init window. `overlap` is the part of the window left at job start.
/// Returns `(duration, lost)` with `duration - lost == walltime`.
pub fn init_penalty(walltime: SimTime, overlap: SimTime, loss_fraction: f64) -> (SimTime, SimTime) {
    if overlap == 0 || loss_fraction <= 0.0 {
        return (walltime, 0);
    }
    let productive_in_window = overlap as f64 * (1.0 - loss_fraction);
    let duration = if (walltime as f64) <= productive_in_window {
        (walltime as f64 / (1.0 - loss_fraction)).round() as SimTime
    } else {
        walltime + (overlap as f64 * loss_fraction).round() as SimTime
    };
    (duration, duration - walltime)
}

/// One hourly preemption sweep: each running job is evicted independently
/// with probability `hazard`.
pub fn preempt<T: Copy>(running: &[T], hazard: f64, rng: &mut SimRng) -> Result<Vec<T>> {
    check_probability("eviction hazard", hazard)?;
    Ok(running
        .iter()
        .copied()
        .filter(|_| rng.random_bool(hazard))
        .collect())
}

/// Number of whole hours a job survives before an hourly hazard strikes,
/// counted from its start (`1` means it is hit at the end of its first hour).
/// `None` when the hazard is zero.
pub fn hours_until_hit(hazard: f64, rng: &mut SimRng) -> Result<Option<u64>> {
    check_probability("hazard", hazard)?;
    if hazard == 0.0 {
        return Ok(None);
    }
    let failures = Geometric::new(hazard)
        .map_err(|e| Error::domain(e.to_string()))?
        .sample(rng);
    Ok(Some(failures.saturating_add(1)))
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be in [0, 1], got {p}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StagedChunk {
    pub available_at: SimTime,
    pub tb: f64,
}

/// Tape recall schedule: one hour of tape throughput becomes available at
/// the start and at every following hour until the volume is staged.
pub fn carousel(
    volume_tb: f64,
    tape_rate_tb_per_h: f64,
    start: SimTime,
) -> Result<Vec<StagedChunk>> {
    if !(tape_rate_tb_per_h > 0.0 && tape_rate_tb_per_h.is_finite()) {
        return Err(Error::config(format!(
            "tape rate must be > 0, got {tape_rate_tb_per_h}"
        )));
    }
    if !(volume_tb >= 0.0) {
        return Err(Error::domain("volume must be >= 0"));
    }
    let mut out = Vec::new();
    let mut remaining = volume_tb;
    let mut k = 0;
    while remaining > 1e-12 {
        let tb = remaining.min(tape_rate_tb_per_h);
        out.push(StagedChunk {
            available_at: start + k * HOUR,
            tb,
        });
        remaining -= tb;
        k += 1;
    }
    Ok(out)
}

/// Arrival times of single-job analysis tasks in `[from, until)`, a
/// homogeneous Poisson process with `rate_per_day`.
pub fn analysis_arrivals(
    rate_per_day: f64,
    from: SimTime,
    until: SimTime,
    rng: &mut SimRng,
) -> Result<Vec<SimTime>> {
    if !(rate_per_day >= 0.0 && rate_per_day.is_finite()) {
        return Err(Error::domain("analysis rate must be >= 0"));
    }
    if rate_per_day == 0.0 {
        return Ok(Vec::new());
    }
    let gap =
        Exp::new(rate_per_day / time::DAY as f64).map_err(|e| Error::domain(e.to_string()))?;
    let mut t = from as f64;
    let mut out = Vec::new();
    loop {
        t += gap.sample(rng);
        if t >= until as f64 {
            break;
        }
        out.push(t as SimTime);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use std::collections::VecDeque;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    /// Queue of (kind, cores) jobs in per-kind FIFOs.
    #[derive(Default)]
    struct Fifo(BTreeMap<WorkflowKind, VecDeque<u32>>);

    impl JobQueue for Fifo {
        type Job = (WorkflowKind, u32);
        fn peek_cores(&self, kind: WorkflowKind) -> Option<u32> {
            self.0.get(&kind).and_then(|q| q.front().copied())
        }
        fn pop(&mut self, kind: WorkflowKind) -> Option<Self::Job> {
            self.0
                .get_mut(&kind)
                .and_then(|q| q.pop_front())
                .map(|c| (kind, c))
        }
    }

    fn fifo(entries: &[(WorkflowKind, u32, usize)]) -> Fifo {
        let mut f = Fifo::default();
        for &(k, c, n) in entries {
            f.0.entry(k).or_default().extend(std::iter::repeat_n(c, n));
        }
        f
    }

    #[test]
    fn broker_single_share_only_assigns_that_kind() {
        let mut q = fifo(&[(WorkflowKind::Sim, 8, 10), (WorkflowKind::Evgen, 1, 10)]);
        let mut running = [0; 6];
        let got = broker(
            &mut q,
            &FairsharePolicy::single(WorkflowKind::Sim),
            100,
            100,
            &mut running,
        );
        assert_eq!(got.len(), 10);
        assert!(got.iter().all(|(k, _)| *k == WorkflowKind::Sim));
    }

    #[test]
    fn broker_zero_free_slots() {
        let mut q = fifo(&[(WorkflowKind::Sim, 1, 10)]);
        let mut running = [0; 6];
        assert!(broker(
            &mut q,
            &FairsharePolicy::single(WorkflowKind::Sim),
            0,
            10,
            &mut running
        )
        .is_empty());
        let mut empty = Fifo::default();
        assert!(broker(
            &mut empty,
            &FairsharePolicy::single(WorkflowKind::Sim),
            10,
            10,
            &mut running
        )
        .is_empty());
    }

    #[test]
    fn broker_respects_shares_when_filling() {
        let weights = BTreeMap::from([
            (WorkflowKind::Evgen, 0.3),
            (WorkflowKind::Sim, 0.3),
            (WorkflowKind::Reco, 0.3),
            (WorkflowKind::Groupprod, 0.1),
        ]);
        let policy = FairsharePolicy::new(&weights).unwrap();
        let mut q = fifo(&[
            (WorkflowKind::Evgen, 8, 1000),
            (WorkflowKind::Sim, 8, 1000),
            (WorkflowKind::Reco, 8, 1000),
            (WorkflowKind::Groupprod, 8, 1000),
        ]);
        let mut running = [0; 6];
        let got = broker(&mut q, &policy, 8000, 8000, &mut running);
        assert_eq!(got.len(), 1000);
        assert_eq!(running[WorkflowKind::Groupprod.index()], 800);
        assert_eq!(running[WorkflowKind::Sim.index()], 2400);
    }

    #[test]
    fn broker_holds_slots_for_starved_large_jobs() {
        let weights = BTreeMap::from([(WorkflowKind::Evgen, 0.5), (WorkflowKind::Sim, 0.5)]);
        let policy = FairsharePolicy::new(&weights).unwrap();
        let mut q = fifo(&[(WorkflowKind::Evgen, 1, 100), (WorkflowKind::Sim, 8, 100)]);
        let mut running = [0; 6];
        running[WorkflowKind::Evgen.index()] = 10;
        // Sim has the larger deficit but only 4 cores are free: hold them.
        assert!(broker(&mut q, &policy, 4, 16, &mut running).is_empty());
        // A kind whose jobs exceed capacity is skipped rather than blocking.
        let got = broker(&mut q, &policy, 4, 4, &mut running);
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn fairshare_rejects_bad_weights() {
        assert!(FairsharePolicy::new(&BTreeMap::new()).is_err());
        assert!(FairsharePolicy::new(&BTreeMap::from([(WorkflowKind::Sim, -1.0)])).is_err());
        let p = FairsharePolicy::new(&BTreeMap::from([
            (WorkflowKind::Sim, 2.0),
            (WorkflowKind::Reco, 2.0),
        ]))
        .unwrap();
        assert_eq!(p.share(WorkflowKind::Sim), 0.5);
    }

    #[test]
    fn ramp_examples() {
        let fast = RampProfile {
            ramp_duration_h: 1.5,
            init_loss_fraction: 0.5,
            init_window_h: 2.0,
        };
        let c = ramp(0, 100_000, &fast, 0);
        assert_eq!(c.slots_at(c.full_at()), 100_000);
        assert!(c.full_at() <= 2 * HOUR);
        assert!(c.steps().windows(2).all(|w| w[0].1 <= w[1].1));

        let zero = ramp(0, 0, &fast, 0);
        assert!(zero.steps().iter().all(|&(_, s)| s == 0));
        assert_eq!(zero.slots_at(10 * HOUR), 0);

        let slow = RampProfile {
            ramp_duration_h: 6.0,
            ..fast
        };
        assert!(slow.effective_loss_fraction() < fast.effective_loss_fraction());
    }

    #[test]
    fn init_penalty_identity() {
        let (d, lost) = init_penalty(7 * HOUR, 2 * HOUR, 0.5);
        assert_eq!(d - lost, 7 * HOUR);
        assert_eq!(lost, HOUR);
        // job shorter than the window's productive capacity
        let (d, lost) = init_penalty(HOUR / 2, 2 * HOUR, 0.5);
        assert_eq!(d, HOUR);
        assert_eq!(lost, HOUR / 2);
        assert_eq!(init_penalty(HOUR, 0, 0.5), (HOUR, 0));
    }

    #[test]
    fn preempt_examples() {
        let running: Vec<u32> = (0..100).collect();
        assert!(preempt(&running, 0.0, &mut rng(1)).unwrap().is_empty());
        assert_eq!(preempt(&running, 1.0, &mut rng(1)).unwrap().len(), 100);
        assert!(preempt(&running, 1.5, &mut rng(1)).is_err());
    }

    #[test]
    fn hours_until_hit_is_geometric() {
        let mut r = rng(7);
        assert_eq!(hours_until_hit(0.0, &mut r).unwrap(), None);
        assert_eq!(hours_until_hit(1.0, &mut r).unwrap(), Some(1));
        let h = 0.1;
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|_| hours_until_hit(h, &mut r).unwrap().unwrap() as f64)
            .sum::<f64>()
            / n as f64;
        // E = 1/h = 10, sd = sqrt(1-h)/h ~ 9.5; 4 sigma of the mean
        assert!(
            (mean - 10.0).abs() < 4.0 * 9.5 / (n as f64).sqrt(),
            "{mean}"
        );
    }

    #[test]
    fn carousel_examples() {
        let one = carousel(50.0, 50.0, 3 * HOUR).unwrap();
        assert_eq!(
            one,
            vec![StagedChunk {
                available_at: 3 * HOUR,
                tb: 50.0
            }]
        );
        let sched = carousel(25.0, 10.0, 0).unwrap();
        assert_eq!(sched.len(), 3);
        assert_eq!(sched[2].available_at, 2 * HOUR);
        assert!((sched.iter().map(|c| c.tb).sum::<f64>() - 25.0).abs() < 1e-12);
        assert!(carousel(1.0, 0.0, 0).is_err());
        // slower tape, longer schedule
        assert!(carousel(25.0, 1.0, 0).unwrap().len() > sched.len());
    }

    #[test]
    fn analysis_arrivals_poisson() {
        assert!(analysis_arrivals(0.0, 0, 100 * time::DAY, &mut rng(1))
            .unwrap()
            .is_empty());
        let (rate, days) = (40.0, 30.0);
        let trials = 200;
        let mut total = 0usize;
        for s in 0..trials {
            total += analysis_arrivals(rate, 0, time::from_days(days), &mut rng(s))
                .unwrap()
                .len();
        }
        let mean = total as f64 / trials as f64;
        let expected = rate * days;
        // sample mean of Poisson counts: sd = sqrt(lambda / trials)
        assert!(
            (mean - expected).abs() < 3.0 * (expected / trials as f64).sqrt(),
            "{mean}"
        );
    }

    #[test]
    fn job_state_machine() {
        let mut j = Job {
            id: JobId(0),
            task: TaskId(0),
            index: 0,
            events: 1,
            state: JobState::Queued,
            start: None,
            end: None,
            cores: 1,
        };
        assert!(j.transition(JobState::Done).is_err());
        j.transition(JobState::Running).unwrap();
        j.transition(JobState::Evicted).unwrap();
        j.transition(JobState::Queued).unwrap();
        j.transition(JobState::Staging).unwrap();
        j.transition(JobState::Queued).unwrap();
    }

    #[test]
    fn walltime_within_bounds() {
        let t = WorkflowTemplate {
            name: "sim".into(),
            kind: WorkflowKind::Sim,
            events_per_job: 2000,
            cores_per_job: 8,
            walltime_mean_h: 7.0,
            walltime_spread_h: 1.0,
            ram_gb_per_core: 4.0,
            local_disk_gb_per_core: 20.0,
            input_format: Some(Format::Evnt),
            output_format: Format::Hits,
            input_tb_per_1k_events: 0.0,
            output_tb_per_1k_events: 0.0,
            extra_outputs: vec![],
        };
        assert_eq!(t.jobs_for(50_000_000), 25_000);
        assert_eq!(t.jobs_for(2001), 2);
        let mut r = rng(3);
        for _ in 0..1000 {
            let w = t.sample_walltime(&mut r);
            assert!((6 * HOUR..=8 * HOUR).contains(&w));
        }
    }
}
