//! Slots, brokering and the job lifecycle.

use std::collections::VecDeque;

use super::events::{EventKind, Payload};
use super::sim::{Running, Sim, TaskState};
use super::JobRecord;
use crate::time::{self, SimTime, HOUR};
use crate::workload::{self, JobId, JobQueue, JobState, WorkflowKind};

struct ReadyQueue<'a> {
    ready: &'a mut [VecDeque<usize>; WorkflowKind::COUNT],
    tasks: &'a mut [TaskState],
}

impl JobQueue for ReadyQueue<'_> {
    type Job = (usize, u64, u64);

    fn peek_cores(&self, kind: WorkflowKind) -> Option<u32> {
        self.ready[kind.index()]
            .iter()
            .find(|&&t| self.tasks[t].has_ready_work())
            .map(|&t| self.tasks[t].cores)
    }

    fn pop(&mut self, kind: WorkflowKind) -> Option<Self::Job> {
        let q = &mut self.ready[kind.index()];
        // entries whose task stalled while queued are dropped lazily
        while let Some(&t) = q.front() {
            if self.tasks[t].has_ready_work() {
                break;
            }
            q.pop_front();
            self.tasks[t].in_ready = false;
        }
        let &t = q.front()?;
        let task = &mut self.tasks[t];
        let (index, events) = task.take_job()?;
        if !task.has_ready_work() {
            q.pop_front();
            task.in_ready = false;
        }
        Some((t, index, events))
    }
}

impl Sim {
    /// Moves the compute site to `target` slots, ramping increases when a
    /// ramp profile is configured.
    pub(super) fn set_slots(&mut self, target: u32) {
        self.ramp_generation += 1;
        let now = self.now();
        match self.setup.ramp {
            Some(profile) if target as u64 > self.slots => {
                let curve = workload::ramp(self.slots as u32, target, &profile, now);
                for &(t, s) in curve.steps() {
                    if t <= self.duration() {
                        self.q.push(
                            t,
                            EventKind::ConfigChange,
                            Payload::Slots(self.ramp_generation, s),
                        );
                    }
                }
            }
            _ => self.apply_slots(target as u64),
        }
    }

    pub(super) fn apply_slots(&mut self, new: u64) {
        let now = self.now();
        if new > self.slots {
            if self.setup.ramp.is_some() {
                self.fresh.push_back((now, new - self.slots));
            }
            self.slots = new;
            self.schedule_dispatch();
            return;
        }
        self.slots = new;
        // unused fresh slots go first, then the youngest jobs
        let free = self.slots.saturating_sub(self.running_cores);
        let mut fresh_total: u64 = self.fresh.iter().map(|f| f.1).sum();
        while fresh_total > free {
            let back = self.fresh.back_mut().expect("fresh cores");
            let cut = back.1.min(fresh_total - free);
            back.1 -= cut;
            fresh_total -= cut;
            if back.1 == 0 {
                self.fresh.pop_back();
            }
        }
        while self.running_cores > self.slots {
            let &(_, id) = self.by_start.iter().next_back().expect("running job");
            self.end_job(id, JobState::Evicted);
        }
    }

    pub(super) fn schedule_dispatch(&mut self) {
        if !self.dispatch_pending {
            self.dispatch_pending = true;
            self.q.push(self.now(), EventKind::JobStart, Payload::None);
        }
    }

    pub(super) fn make_ready(&mut self, t: usize) {
        let task = &mut self.tasks[t];
        if !task.in_ready && task.has_ready_work() {
            task.in_ready = true;
            // retried work goes ahead of fresh tasks
            if task.retries.is_empty() {
                self.ready[task.kind.index()].push_back(t);
            } else {
                self.ready[task.kind.index()].push_front(t);
            }
            self.schedule_dispatch();
        }
    }

    pub(super) fn dispatch(&mut self) {
        self.dispatch_pending = false;
        let free = self.slots.saturating_sub(self.running_cores);
        if free == 0 {
            return;
        }
        let mut queue = ReadyQueue {
            ready: &mut self.ready,
            tasks: &mut self.tasks,
        };
        let picked = workload::broker(
            &mut queue,
            &self.policy,
            free,
            self.slots,
            &mut self.running_by_kind,
        );
        for (t, index, events) in picked {
            let cores = self.tasks[t].cores as u64;
            if !self.start_job(t, index, events) {
                self.running_by_kind[self.tasks[t].kind.index()] -= cores;
                self.tasks[t].retries.push_front((index, events));
            }
        }
    }

    /// Takes `cores` free cores and returns the remaining init window the
    /// job overlaps, averaged over its cores.
    fn take_cores(&mut self, cores: u64) -> SimTime {
        let now = self.now();
        let Some(profile) = self.setup.ramp else {
            return 0;
        };
        let window = time::from_hours(profile.init_window_h);
        while self
            .fresh
            .front()
            .is_some_and(|&(at, _)| at + window <= now)
        {
            self.fresh.pop_front();
        }
        let free = self.slots - self.running_cores;
        let fresh_total: u64 = self.fresh.iter().map(|f| f.1).sum();
        let warm = free.saturating_sub(fresh_total);
        let mut need = cores.saturating_sub(warm);
        let mut weighted = 0u128;
        while need > 0 {
            let Some(front) = self.fresh.front_mut() else {
                break;
            };
            let take = front.1.min(need);
            weighted += take as u128 * (front.0 + window - now) as u128;
            front.1 -= take;
            need -= take;
            if front.1 == 0 {
                self.fresh.pop_front();
            }
        }
        (weighted / cores.max(1) as u128) as SimTime
    }

    /// Starts one attempt. Returns false when the task's input cannot be
    /// brought to the site; the caller requeues the work.
    fn start_job(&mut self, t: usize, index: u64, events: u64) -> bool {
        if !self.prepare_input(t) {
            return false;
        }
        let now = self.now();
        let task = &self.tasks[t];
        let cores = task.cores;
        let kind = task.kind;
        let template = &self.setup.templates[task.template];
        let walltime = template.sample_walltime(&mut self.rng);
        let eviction = workload::hours_until_hit(self.setup.eviction_hazard, &mut self.rng)
            .expect("validated hazard");
        let failure = workload::hours_until_hit(self.setup.failure_hazard, &mut self.rng)
            .expect("validated hazard");

        let overlap = self.take_cores(cores as u64);
        let loss = self.setup.ramp.map_or(0.0, |p| p.effective_loss_fraction());
        let (duration, init_lost) = workload::init_penalty(walltime, overlap, loss);

        let hit = |h: Option<u64>| h.map(|k| k * HOUR).filter(|&s| s < duration);
        let (end, kind_of_end) = match (hit(eviction), hit(failure)) {
            (Some(e), Some(f)) if f < e => (f, EventKind::JobEnd),
            (Some(e), _) => (e, EventKind::Eviction),
            (None, Some(f)) => (f, EventKind::JobEnd),
            (None, None) => (duration, EventKind::JobEnd),
        };
        let id = JobId(self.next_job);
        self.next_job += 1;
        self.running_cores += cores as u64;
        self.running.insert(
            id,
            Running {
                task: t,
                index,
                events,
                cores,
                kind,
                start: now,
                init_lost,
                failing: kind_of_end == EventKind::JobEnd && end < duration,
            },
        );
        self.by_start.insert((now, id));
        self.q.push(now + end, kind_of_end, Payload::Job(id));
        true
    }

    pub(super) fn job_end_event(&mut self, id: JobId) {
        let Some(r) = self.running.get(&id) else {
            return;
        };
        if r.failing {
            self.end_job(id, JobState::Failed);
        } else {
            self.end_job(id, JobState::Done);
        }
    }

    pub(super) fn end_job(&mut self, id: JobId, mut state: JobState) {
        let now = self.now();
        let Some(r) = self.running.get(&id) else {
            return;
        };
        let (t, index, events, start) = (r.task, r.index, r.events, r.start);
        if state == JobState::Done && !self.write_job_output(t, events) {
            state = JobState::Failed;
        }
        let r = self.running.remove(&id).expect("running");
        self.by_start.remove(&(r.start, id));
        self.running_cores -= r.cores as u64;
        self.running_by_kind[r.kind.index()] -= r.cores as u64;
        self.bill_compute(r.start, now, r.cores, self.tasks[t].template);

        let cores = r.cores as f64;
        let wall = now - start;
        let lost = match state {
            JobState::Done => {
                self.stats.productive_core_s += cores * (wall - r.init_lost) as f64;
                self.stats.init_lost_core_s += cores * r.init_lost as f64;
                self.stats.jobs_done += 1;
                self.stats.events_completed += events;
                r.init_lost
            }
            JobState::Evicted => {
                self.stats.evicted_core_s += cores * wall as f64;
                self.stats.jobs_evicted += 1;
                wall
            }
            _ => {
                self.stats.failed_core_s += cores * wall as f64;
                self.stats.jobs_failed += 1;
                wall
            }
        };
        self.record_job(id, &r, now, state, lost);

        if state == JobState::Done {
            let task = &mut self.tasks[t];
            task.done_jobs += 1;
            if task.done_jobs == task.jobs_total {
                self.complete_task(t);
            }
        } else {
            self.tasks[t].retries.push_back((index, events));
            self.make_ready(t);
        }
        self.schedule_dispatch();
    }

    fn record_job(&mut self, id: JobId, r: &Running, end: SimTime, state: JobState, lost: SimTime) {
        if self.opts.record_jobs {
            self.jobs.push(JobRecord {
                id: id.0,
                task: r.task as u32,
                kind: r.kind,
                index: r.index,
                events: r.events,
                cores: r.cores,
                start: r.start,
                end,
                state,
                lost,
            });
        }
    }

    /// Bills attempts still running when the run ends.
    pub(super) fn close_running_jobs(&mut self, end: SimTime) {
        let ids: Vec<JobId> = self.running.keys().copied().collect();
        for id in ids {
            let r = self.running.remove(&id).expect("running");
            let wall = end.saturating_sub(r.start);
            self.bill_compute(r.start, end, r.cores, self.tasks[r.task].template);
            let in_window = r.init_lost.min(wall);
            self.stats.init_lost_core_s += r.cores as f64 * in_window as f64;
            self.stats.productive_core_s += r.cores as f64 * (wall - in_window) as f64;
            self.record_job(id, &r, end, JobState::Running, in_window);
        }
        self.by_start.clear();
        self.running_cores = 0;
        self.running_by_kind = [0; WorkflowKind::COUNT];
    }
}
