//! Usage metering and the end-of-run ledger.

use std::collections::BTreeMap;

use super::sim::Sim;
use super::{LostTime, Summary};
use crate::accounting::Ledger;
use crate::time::{self, SimTime, DAY};
use crate::workload::JobState;
use crate::Result;

/// Splits `[start, end)` at day boundaries into `(day, seconds)` pieces.
fn split_days(start: SimTime, end: SimTime) -> impl Iterator<Item = (usize, SimTime)> {
    let mut t = start;
    std::iter::from_fn(move || {
        if t >= end {
            return None;
        }
        let day = t / DAY;
        let next = ((day + 1) * DAY).min(end);
        let piece = (day as usize, next - t);
        t = next;
        Some(piece)
    })
}

impl Sim {
    /// Integrates cloud storage occupancy up to `t`.
    pub(super) fn advance_storage(&mut self, t: SimTime) {
        let t = t.min(self.duration());
        if t <= self.storage_clock {
            return;
        }
        let stored: f64 = self
            .setup
            .topology
            .se_ids()
            .filter(|&se| self.setup.topology.se_is_cloud(se))
            .map(|se| self.data.occupancy(se).max(0.0))
            .sum();
        if stored > 0.0 {
            for (day, secs) in split_days(self.storage_clock, t) {
                self.usage[day].storage_tb_hours += stored * time::to_hours(secs);
            }
        }
        self.storage_clock = t;
    }

    pub(super) fn bill_compute(
        &mut self,
        start: SimTime,
        end: SimTime,
        cores: u32,
        template: usize,
    ) {
        let end = end.min(self.duration());
        let tpl = &self.setup.templates[template];
        let (ram, disk) = (tpl.ram_gb_per_core, tpl.local_disk_gb_per_core);
        for (day, secs) in split_days(start, end) {
            let core_h = cores as f64 * time::to_hours(secs);
            let u = &mut self.usage[day];
            u.core_hours += core_h;
            u.ram_gb_hours += core_h * ram;
            u.local_disk_gb_hours += core_h * disk;
        }
    }

    /// Adds circuit rental and overhead days, then prices the usage.
    pub(super) fn build_ledger(&mut self) -> Result<Ledger> {
        let end = self.duration();
        let hpm = self.setup.catalog.hours_per_month;
        let month_secs = time::from_hours(hpm);
        if end > 0 {
            let last_month = time::month_of(end - 1, hpm);
            for &(since, n) in &self.circuits {
                if since >= end {
                    continue;
                }
                for m in time::month_of(since, hpm)..=last_month {
                    let at = since.max(m as SimTime * month_secs);
                    let day = self.day_index(at);
                    self.usage[day].circuit_hours += n as f64 * hpm;
                }
            }
        }
        for (day, secs) in split_days(0, end) {
            self.usage[day].overhead_days = secs as f64 / DAY as f64;
        }
        Ledger::from_usage(
            &self.usage,
            &self.setup.catalog,
            self.setup.overhead_usd_per_day,
        )
    }

    pub(super) fn summary(&self, ledger: &Ledger) -> Summary {
        let s = &self.stats;
        let lost = LostTime {
            init_core_hours: s.init_lost_core_s / 3600.0,
            eviction_core_hours: s.evicted_core_s / 3600.0,
            failure_core_hours: s.failed_core_s / 3600.0,
        };
        let productive = s.productive_core_s / 3600.0;
        let spent = lost.total() + productive;
        let ratio = |x: f64| if spent > 0.0 { x / spent } else { 0.0 };
        let attempts = s.jobs_done + s.jobs_evicted + s.jobs_failed;
        let unfinished = self
            .jobs
            .iter()
            .filter(|j| j.state == JobState::Running)
            .count() as u64;
        let cost_by_service_usd: BTreeMap<String, f64> = crate::accounting::Service::ALL
            .iter()
            .zip(ledger.total_by_service())
            .map(|(svc, c)| (svc.as_str().to_string(), c.usd()))
            .collect();
        Summary {
            scenario: self.name.clone(),
            seed: self.setup.seed,
            duration_days: time::to_days(self.duration()),
            events_processed: self.events_processed,
            events_completed: s.events_completed,
            tasks_released: s.tasks_released,
            tasks_completed: s.tasks_completed,
            jobs_done: s.jobs_done,
            jobs_evicted: s.jobs_evicted,
            jobs_failed: s.jobs_failed,
            jobs_unfinished: unfinished,
            last_task_completion_h: s.last_completion.map(time::to_hours),
            productive_core_hours: productive,
            lost_fraction: ratio(lost.total()),
            eviction_fraction: if attempts > 0 {
                s.jobs_evicted as f64 / attempts as f64
            } else {
                0.0
            },
            lost,
            analysis_arrivals: s.analysis_arrivals,
            analysis_without_input: s.analysis_without_input,
            output_stalls: s.output_stalls,
            list_total_usd: ledger.total().usd(),
            cost_by_service_usd,
            overhead_usd_per_day: self.setup.overhead_usd_per_day,
            catalog: self.setup.catalog.clone(),
            plan: self.plan.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_days_covers_the_interval() {
        let pieces: Vec<_> = split_days(DAY - 100, 2 * DAY + 50).collect();
        assert_eq!(pieces, vec![(0, 100), (1, DAY), (2, 50)]);
        assert_eq!(split_days(5, 5).count(), 0);
    }
}
