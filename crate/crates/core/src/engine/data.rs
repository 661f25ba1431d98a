//! Task inputs and outputs, transfers, external demand and the hourly
//! deletion cycle.

use std::collections::BTreeSet;

use rand::Rng;

use super::events::{EventKind, Payload};
use super::sim::{OpenOutput, Sim, TaskInput, TaskState};
use super::{Activity, TransferRecord};
use crate::datamgmt::{self, DatasetId, Format, Placement};
use crate::scenario::{InputPlan, RulePlan};
use crate::time::{self, HOUR};
use crate::topology::{self, LinkClass, SeId};
use crate::workload;
use crate::{Error, Result};

impl Sim {
    fn compute_disk(&self) -> SeId {
        self.setup
            .compute_disk
            .expect("validated: workload implies a compute DATADISK")
    }

    pub(super) fn create_initial_datasets(&mut self) -> Result<()> {
        for i in 0..self.setup.datasets.len() {
            let d = self.setup.datasets[i].clone();
            let ds = self.data.create_dataset(d.format, d.size_tb, 0, true);
            self.data.write_replica(ds, d.se, 0).map_err(|_| {
                Error::config(format!(
                    "initial dataset '{}' does not fit on {}",
                    d.name,
                    self.setup.topology.se(d.se).name
                ))
            })?;
            self.add_rule(ds, d.se, d.rule);
            self.initial_ids.push(ds);
        }
        Ok(())
    }

    /// Creates a sealed dataset pinned at `se`; `None` when it does not fit.
    fn source_dataset(&mut self, format: Format, tb: f64, se: SeId) -> Option<DatasetId> {
        let now = self.now();
        let ds = self.data.create_dataset(format, tb, now, true);
        if self.data.write_replica(ds, se, now).is_err() {
            return None;
        }
        self.add_rule(ds, se, RulePlan::Persistent);
        Some(ds)
    }

    fn push_task(&mut self, name: String, mut task: TaskState) -> usize {
        let template = &self.setup.templates[task.template];
        task.outputs = vec![OpenOutput::default(); template.outputs().count()];
        let t = self.tasks.len();
        self.tasks.push(task);
        self.task_names.push(name);
        self.active_tasks.insert(t);
        self.make_ready(t);
        t
    }

    pub(super) fn release_task(&mut self, i: usize) -> Result<()> {
        let now = self.now();
        let plan = self.setup.tasks[i].clone();
        let template = self.setup.templates[plan.template].clone();
        let nucleus = plan
            .stream
            .and_then(|s| self.nucleus_stream[s])
            .or(self.nucleus_all)
            .unwrap_or(plan.nucleus);
        let input_tb = plan.total_events as f64 / 1000.0 * template.input_tb_per_1k_events;
        let input_format = template.input_format.unwrap_or(Format::Raw);
        let t = self.tasks.len();
        let input = match plan.input {
            InputPlan::None => TaskInput::None,
            InputPlan::Dataset(k) => TaskInput::Disk(self.initial_ids[k]),
            InputPlan::Generated { at } if input_tb > 0.0 => {
                match self.source_dataset(input_format, input_tb, at) {
                    Some(ds) => TaskInput::Disk(ds),
                    None => TaskInput::None,
                }
            }
            InputPlan::Generated { .. } => TaskInput::None,
            InputPlan::Carousel {
                from,
                tape_rate_tb_per_h,
            } => {
                let schedule = workload::carousel(input_tb, tape_rate_tb_per_h, now)?;
                let mut chunks = Vec::with_capacity(schedule.len());
                for (k, c) in schedule.iter().enumerate() {
                    let ds = self
                        .source_dataset(input_format, c.tb, from)
                        .ok_or_else(|| {
                            Error::config("tape source cannot hold the carousel input")
                        })?;
                    chunks.push(ds);
                    if c.available_at <= self.duration() {
                        self.q.push(
                            c.available_at,
                            EventKind::TransferDone,
                            Payload::Chunk(t, k),
                        );
                    }
                }
                TaskInput::Carousel {
                    chunks,
                    arrived: 0,
                    staged: 0,
                }
            }
        };
        self.stats.tasks_released += 1;
        self.push_task(
            plan.name.clone(),
            TaskState {
                template: plan.template,
                kind: template.kind,
                cores: template.cores_per_job,
                events_per_job: template.events_per_job,
                total_events: plan.total_events,
                jobs_total: template.jobs_for(plan.total_events),
                next_index: 0,
                retries: Default::default(),
                done_jobs: 0,
                nucleus,
                input,
                activated: false,
                in_ready: false,
                stalled: false,
                complete: false,
                outputs: Vec::new(),
                analysis: false,
            },
        );
        Ok(())
    }

    pub(super) fn analysis_arrival(&mut self) {
        self.stats.analysis_arrivals += 1;
        let Some(a) = self.setup.analysis.clone() else {
            return;
        };
        let disk = self.compute_disk();
        let now = self.now();
        if self.analysis_pool_at.is_none_or(|at| now >= at + HOUR) {
            self.refresh_analysis_pool();
        }
        let mut pick = None;
        for _ in 0..2 {
            if !self.analysis_pool.is_empty() {
                let d = self.analysis_pool[self.rng.random_range(0..self.analysis_pool.len())];
                if self.data.has_replica(d, disk) {
                    pick = Some(d);
                    break;
                }
            }
            self.refresh_analysis_pool();
        }
        let Some(pick) = pick else {
            self.stats.analysis_without_input += 1;
            return;
        };
        let template = &self.setup.templates[a.template];
        let name = format!("analysis-{}", self.stats.analysis_arrivals - 1);
        self.push_task(
            name,
            TaskState {
                template: a.template,
                kind: template.kind,
                cores: template.cores_per_job,
                events_per_job: template.events_per_job,
                total_events: template.events_per_job,
                jobs_total: 1,
                next_index: 0,
                retries: Default::default(),
                done_jobs: 0,
                nucleus: a.output_to.unwrap_or(disk),
                input: TaskInput::Disk(pick),
                activated: true,
                in_ready: false,
                stalled: false,
                complete: false,
                outputs: Vec::new(),
                analysis: true,
            },
        );
    }

    fn refresh_analysis_pool(&mut self) {
        let disk = self.compute_disk();
        self.analysis_pool = self
            .data
            .replicas_on(disk)
            .filter(|d| !self.user_outputs.contains(d))
            .filter(|&d| {
                self.data
                    .dataset(d)
                    .is_some_and(|x| x.sealed && x.format == Format::Daod)
            })
            .collect();
        self.analysis_pool_at = Some(self.now());
    }

    /// Makes sure the task's input is on the compute DATADISK, fetching and
    /// pinning it if needed. False when it cannot be brought in.
    pub(super) fn prepare_input(&mut self, t: usize) -> bool {
        let TaskInput::Disk(ds) = self.tasks[t].input else {
            return true;
        };
        let disk = self.compute_disk();
        let now = self.now();
        if self.data.dataset(ds).is_none() {
            return true;
        }
        if !self.data.has_replica(ds, disk) {
            let holders = self.data.holders(ds);
            let Ok(src) = topology::select_source(&holders, disk, &self.setup.topology.distances)
            else {
                return true;
            };
            if !self.transfer(ds, src, disk, Activity::InputStaging, false) {
                self.tasks[t].stalled = true;
                return false;
            }
            self.add_rule(
                ds,
                disk,
                RulePlan::Temporary(self.setup.input_rule_lifetime),
            );
        } else if !self.tasks[t].activated {
            self.add_rule(
                ds,
                disk,
                RulePlan::Temporary(self.setup.input_rule_lifetime),
            );
        }
        self.tasks[t].activated = true;
        self.data.touch(ds, disk, now);
        true
    }

    /// Appends a finished job's products to the task's open datasets. False
    /// when the compute DATADISK cannot take them.
    pub(super) fn write_job_output(&mut self, t: usize, events: u64) -> bool {
        let now = self.now();
        let disk = self.compute_disk();
        let template = &self.setup.templates[self.tasks[t].template];
        let products: Vec<(usize, Format, f64)> = template
            .outputs()
            .enumerate()
            .map(|(k, o)| (k, o.format, events as f64 / 1000.0 * o.tb_per_1k_events))
            .filter(|p| p.2 > 0.0)
            .collect();
        let total: f64 = products.iter().map(|p| p.2).sum();
        if total > 0.0 && !self.data.fits(disk, total) {
            self.data.evict_for(disk, total);
            if !self.data.fits(disk, total) {
                self.tasks[t].stalled = true;
                self.stats.output_stalls += 1;
                return false;
            }
        }
        let per_dataset = self.setup.output_dataset_jobs;
        for (k, format, tb) in products {
            match self.tasks[t].outputs[k].dataset {
                Some((ds, _)) => self.data.append(ds, disk, tb).expect("space checked"),
                None => {
                    let ds = self.data.create_dataset(format, tb, now, false);
                    if self.tasks[t].analysis {
                        self.user_outputs.insert(ds);
                    }
                    self.data
                        .write_replica(ds, disk, now)
                        .expect("space checked");
                    let pin = self.data.add_rule(ds, disk, None, now);
                    self.tasks[t].outputs[k].dataset = Some((ds, pin));
                }
            }
            let open = &mut self.tasks[t].outputs[k];
            open.jobs += 1;
            if open.jobs >= per_dataset {
                self.seal_output(t, k);
            }
        }
        true
    }

    pub(super) fn complete_task(&mut self, t: usize) {
        let now = self.now();
        self.tasks[t].complete = true;
        for k in 0..self.tasks[t].outputs.len() {
            self.seal_output(t, k);
        }
        self.active_tasks.remove(&t);
        if !self.tasks[t].analysis {
            self.stats.tasks_completed += 1;
            self.stats.last_completion = Some(now);
        }
    }

    fn seal_output(&mut self, t: usize, k: usize) {
        let open = &mut self.tasks[t].outputs[k];
        open.jobs = 0;
        let Some((ds, pin)) = open.dataset.take() else {
            return;
        };
        let disk = self.compute_disk();
        self.data.seal(ds);
        self.add_rule(
            ds,
            disk,
            RulePlan::Temporary(self.setup.output_rule_lifetime),
        );
        self.data.remove_rule(pin);
        self.place(ds, t);
    }

    /// Ships a sealed output to its nucleus. False when it has to wait.
    fn place(&mut self, ds: DatasetId, t: usize) -> bool {
        let disk = self.compute_disk();
        let nucleus = self.tasks[t].nucleus;
        let activity = if self.tasks[t].analysis {
            if nucleus == disk {
                return true;
            }
            Activity::Analysis
        } else {
            Activity::ProductionOutput
        };
        let Some(dataset) = self.data.dataset(ds) else {
            return true;
        };
        let site = self.setup.compute_site.expect("compute site");
        let (src, dst) = match datamgmt::place_output(
            nucleus,
            site,
            disk,
            dataset,
            &self.setup.topology,
            &self.data,
        ) {
            // outputs kept at a local nucleus fall back to cached once the
            // temporary output rule lapses
            Placement::Local if nucleus == disk => return true,
            Placement::Local => (disk, nucleus),
            Placement::Transfer { src, dst } => (src, dst),
            Placement::Stall => {
                self.pending_outputs.push((ds, t));
                self.stats.output_stalls += 1;
                return false;
            }
        };
        if self.transfer(ds, src, dst, activity, false) {
            self.add_rule(ds, dst, RulePlan::Persistent);
            true
        } else {
            self.pending_outputs.push((ds, t));
            self.stats.output_stalls += 1;
            false
        }
    }

    /// Copies `ds` from `src` to `dst`, billing egress at the source when it
    /// is a cloud site sending to another site. False when `dst` is full.
    pub(super) fn transfer(
        &mut self,
        ds: DatasetId,
        src: SeId,
        dst: SeId,
        activity: Activity,
        input_read: bool,
    ) -> bool {
        let now = self.now();
        if src == dst {
            return true;
        }
        if self.data.has_replica(ds, dst) {
            self.data.touch(ds, dst, now);
            return true;
        }
        let Some(dataset) = self.data.dataset(ds) else {
            return false;
        };
        let (tb, format) = (dataset.size_tb, dataset.format);
        if !self.data.fits(dst, tb) {
            self.data.evict_for(dst, tb);
        }
        if self.data.receive_replica(ds, dst, now).is_err() {
            return false;
        }
        let topo = &self.setup.topology;
        let (src_site, dst_site) = (topo.site_of(src), topo.site_of(dst));
        let link = topo.route_class(src_site, dst_site);
        let billable = src_site != dst_site && topo.site(src_site).is_cloud;
        if billable {
            let day = self.day_index(now);
            match link {
                LinkClass::Internet => self.usage[day].egress_internet_tb += tb,
                LinkClass::Interconnect => self.usage[day].egress_interconnect_tb += tb,
            }
        }
        if Some(src_site) == self.setup.focus_site && dst_site != src_site {
            if let Some(a) = activity.reported_index() {
                self.recent_egress.push_back((now, a, dst_site, tb));
            }
            if input_read {
                self.cumulative_input_egress += tb;
            }
        }
        self.data.touch(ds, src, now);
        self.transfers.push(TransferRecord {
            time: now,
            dataset: ds,
            format,
            tb,
            src: topo.se(src).name.clone(),
            dst: topo.se(dst).name.clone(),
            activity,
            link,
            billable,
        });
        true
    }

    pub(super) fn chunk_arrived(&mut self, t: usize, k: usize) {
        if let TaskInput::Carousel { arrived, .. } = &mut self.tasks[t].input {
            *arrived = (*arrived).max(k + 1);
        }
        self.try_stage(t);
    }

    /// Copies arrived tape chunks, in order, to the compute DATADISK.
    fn try_stage(&mut self, t: usize) {
        let disk = self.compute_disk();
        loop {
            let TaskInput::Carousel {
                chunks,
                arrived,
                staged,
            } = &self.tasks[t].input
            else {
                return;
            };
            if staged >= arrived {
                self.pending_chunks.remove(&t);
                break;
            }
            let ds = chunks[*staged];
            let holders = self.data.holders(ds);
            let Ok(src) = topology::select_source(&holders, disk, &self.setup.topology.distances)
            else {
                self.pending_chunks.insert(t);
                break;
            };
            if !self.transfer(ds, src, disk, Activity::InputStaging, false) {
                self.pending_chunks.insert(t);
                break;
            }
            self.add_rule(
                ds,
                disk,
                RulePlan::Temporary(self.setup.input_rule_lifetime),
            );
            if let TaskInput::Carousel { staged, .. } = &mut self.tasks[t].input {
                *staged += 1;
            }
        }
        self.make_ready(t);
    }

    pub(super) fn run_placement(&mut self, i: usize) {
        let p = self.setup.placements[i].clone();
        let ds = self.initial_ids[p.dataset];
        if self.data.dataset(ds).is_none() {
            return;
        }
        if !self.data.has_replica(ds, p.to) {
            let holders = self.data.holders(ds);
            let Ok(src) = topology::select_source(&holders, p.to, &self.setup.topology.distances)
            else {
                return;
            };
            if !self.transfer(ds, src, p.to, Activity::Placement, false) {
                return;
            }
        }
        self.add_rule(ds, p.to, p.rule);
    }

    /// One day of reads of the focus site's data by jobs elsewhere.
    pub(super) fn external_demand(&mut self) {
        let Some(demand) = self.setup.demand.clone() else {
            return;
        };
        let Some(focus) = self.setup.focus_site else {
            return;
        };
        let mut candidates = BTreeSet::new();
        for &se in &self.focus_ses {
            for ds in self.data.replicas_on(se) {
                let d = self.data.dataset(ds).expect("replica of a known dataset");
                if d.sealed && (demand.formats.is_empty() || demand.formats.contains(&d.format)) {
                    candidates.insert(ds);
                }
            }
        }
        for ds in candidates {
            if !self.rng.random_bool(demand.reads_per_dataset_day) {
                continue;
            }
            let dests: Vec<SeId> = demand
                .destinations
                .iter()
                .copied()
                .filter(|&d| {
                    !self.data.has_replica(ds, d) && self.setup.topology.site_of(d) != focus
                })
                .collect();
            if dests.is_empty() {
                continue;
            }
            let dst = dests[self.rng.random_range(0..dests.len())];
            let holders = self.data.holders(ds);
            let Ok(src) = topology::select_source(&holders, dst, &self.setup.topology.distances)
            else {
                continue;
            };
            let format = self.data.dataset(ds).expect("candidate").format;
            let activity = if format == Format::Daod {
                Activity::Analysis
            } else {
                Activity::ProductionInput
            };
            self.transfer(ds, src, dst, activity, true);
        }
    }

    pub(super) fn deletion_cycle(&mut self) {
        let ses: Vec<SeId> = self.setup.topology.se_ids().collect();
        for se in ses {
            if let Some(c) = self.setup.topology.se(se).consolidation.clone() {
                for ds in self.data.consolidation_candidates(se, c.pressure) {
                    if self.transfer(ds, se, c.sink, Activity::Consolidation, false) {
                        self.data.move_out(ds, se);
                    }
                }
            }
            let config = self.setup.topology.se(se).clone();
            self.data.run_deletion(se, &config);
        }
        self.retry_stalled();
    }

    pub(super) fn drain(&mut self, se: SeId, to: SeId) {
        let held: Vec<DatasetId> = self.data.replicas_on(se).collect();
        for ds in held {
            if self.data.holders(ds).len() > 1 {
                self.data.delete_replica(ds, se);
            } else if self.transfer(ds, se, to, Activity::Consolidation, false) {
                self.add_rule(ds, to, RulePlan::Persistent);
                self.data.move_out(ds, se);
            }
        }
    }

    pub(super) fn retry_stalled(&mut self) {
        if self.setup.compute_disk.is_none() {
            return;
        }
        let disk = self.compute_disk();
        for (ds, t) in std::mem::take(&mut self.pending_outputs) {
            if self.data.has_replica(ds, disk) {
                self.place(ds, t);
            }
        }
        for t in self.pending_chunks.clone() {
            self.try_stage(t);
        }
        let stalled: Vec<usize> = self
            .active_tasks
            .iter()
            .copied()
            .filter(|&t| self.tasks[t].stalled)
            .collect();
        for t in stalled {
            self.tasks[t].stalled = false;
            self.make_ready(t);
        }
    }

    pub(super) fn day_index(&self, t: time::SimTime) -> usize {
        (time::day_of(t) as usize).min(self.usage.len() - 1)
    }
}
