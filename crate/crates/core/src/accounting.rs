//! The billing ledger and the reports derived from it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::pricing::{self, Cents, PricingCatalog, SubscriptionPlan};
use crate::time;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Service {
    ComputeCpu,
    ComputeRam,
    ComputeLocalDisk,
    Storage,
    EgressInternet,
    EgressInterconnect,
    Other,
}

impl Service {
    pub const ALL: [Service; 7] = [
        Service::ComputeCpu,
        Service::ComputeRam,
        Service::ComputeLocalDisk,
        Service::Storage,
        Service::EgressInternet,
        Service::EgressInterconnect,
        Service::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Service::ComputeCpu => "COMPUTE_CPU",
            Service::ComputeRam => "COMPUTE_RAM",
            Service::ComputeLocalDisk => "COMPUTE_LOCAL_DISK",
            Service::Storage => "STORAGE",
            Service::EgressInternet => "EGRESS_INTERNET",
            Service::EgressInterconnect => "EGRESS_INTERCONNECT",
            Service::Other => "OTHER",
        }
    }

    pub fn parse(s: &str) -> Option<Service> {
        Service::ALL.into_iter().find(|v| v.as_str() == s)
    }

    /// Report grouping: compute, storage, egress, other.
    pub fn group(self) -> usize {
        match self {
            Service::ComputeCpu | Service::ComputeRam | Service::ComputeLocalDisk => 0,
            Service::Storage => 1,
            Service::EgressInternet | Service::EgressInterconnect => 2,
            Service::Other => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "core-hours")]
    CoreHours,
    #[serde(rename = "GB-hours")]
    GbHours,
    #[serde(rename = "TB-hours")]
    TbHours,
    #[serde(rename = "TB")]
    Tb,
    #[serde(rename = "circuit-hours")]
    CircuitHours,
    #[serde(rename = "days")]
    Days,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::CoreHours => "core-hours",
            Unit::GbHours => "GB-hours",
            Unit::TbHours => "TB-hours",
            Unit::Tb => "TB",
            Unit::CircuitHours => "circuit-hours",
            Unit::Days => "days",
        }
    }

    pub fn parse(s: &str) -> Option<Unit> {
        [
            Unit::CoreHours,
            Unit::GbHours,
            Unit::TbHours,
            Unit::Tb,
            Unit::CircuitHours,
            Unit::Days,
        ]
        .into_iter()
        .find(|u| u.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub day: u32,
    pub service: Service,
    pub amount: Cents,
    pub usage: f64,
    pub unit: Unit,
}

/// Billable usage accrued during one simulation day.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DailyUsage {
    pub core_hours: f64,
    pub ram_gb_hours: f64,
    pub local_disk_gb_hours: f64,
    pub storage_tb_hours: f64,
    pub egress_internet_tb: f64,
    pub egress_interconnect_tb: f64,
    pub circuit_hours: f64,
    /// Fraction of the day covered by the run (for the flat overhead).
    pub overhead_days: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub entries: Vec<LedgerEntry>,
}

impl Ledger {
    /// Prices daily usage. Internet egress tiers restart with each
    /// accounting month; a day belongs to the month containing its start.
    pub fn from_usage(
        days: &[DailyUsage],
        catalog: &PricingCatalog,
        overhead_usd_per_day: f64,
    ) -> Result<Ledger> {
        let mut entries = Vec::new();
        let mut month_egress: BTreeMap<u32, f64> = BTreeMap::new();
        for (day, u) in days.iter().enumerate() {
            let day = day as u32;
            let mut push = |service, usage: f64, unit, usd: f64| {
                if usage > 0.0 {
                    entries.push(LedgerEntry {
                        day,
                        service,
                        amount: Cents::from_usd(usd),
                        usage,
                        unit,
                    });
                }
            };
            push(
                Service::ComputeCpu,
                u.core_hours,
                Unit::CoreHours,
                pricing::compute_cost(u.core_hours, 0.0, 0.0, catalog)?,
            );
            push(
                Service::ComputeRam,
                u.ram_gb_hours,
                Unit::GbHours,
                pricing::compute_cost(0.0, u.ram_gb_hours, 0.0, catalog)?,
            );
            push(
                Service::ComputeLocalDisk,
                u.local_disk_gb_hours,
                Unit::GbHours,
                pricing::compute_cost(0.0, 0.0, u.local_disk_gb_hours, catalog)?,
            );
            push(
                Service::Storage,
                u.storage_tb_hours,
                Unit::TbHours,
                pricing::storage_cost(u.storage_tb_hours, catalog)?,
            );
            let month = time::month_of_day(day, catalog.hours_per_month);
            let sent = month_egress.entry(month).or_default();
            let egress = pricing::egress_increment(*sent, u.egress_internet_tb, catalog)?;
            *sent += u.egress_internet_tb;
            push(
                Service::EgressInternet,
                u.egress_internet_tb,
                Unit::Tb,
                egress,
            );
            push(
                Service::EgressInterconnect,
                u.egress_interconnect_tb,
                Unit::Tb,
                pricing::interconnect_cost(u.egress_interconnect_tb, 0.0, catalog)?,
            );
            push(
                Service::EgressInterconnect,
                u.circuit_hours,
                Unit::CircuitHours,
                pricing::interconnect_cost(0.0, u.circuit_hours, catalog)?,
            );
            push(
                Service::Other,
                u.overhead_days,
                Unit::Days,
                u.overhead_days * overhead_usd_per_day,
            );
        }
        Ok(Ledger { entries })
    }

    pub fn total(&self) -> Cents {
        self.entries.iter().map(|e| e.amount).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of entries per day, in day order, with gaps filled by zero.
    pub fn daily_totals(&self) -> Vec<Cents> {
        let n = self.entries.iter().map(|e| e.day + 1).max().unwrap_or(0) as usize;
        let mut out = vec![Cents(0); n];
        for e in &self.entries {
            out[e.day as usize] += e.amount;
        }
        out
    }

    pub fn total_by_service(&self) -> [Cents; 7] {
        let mut out = [Cents(0); 7];
        for e in &self.entries {
            out[e.service.index()] += e.amount;
        }
        out
    }

    /// Usage summed per (service, unit).
    pub fn usage_by_service(&self) -> BTreeMap<(Service, Unit), f64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry((e.service, e.unit)).or_default() += e.usage;
        }
        out
    }
}

/// Reprices every entry from its recorded usage and checks it against the
/// stored amount. Returns the first mismatch.
pub fn reprice_check(
    ledger: &Ledger,
    catalog: &PricingCatalog,
    overhead_usd_per_day: f64,
) -> std::result::Result<(), String> {
    let mut sent: BTreeMap<u32, f64> = BTreeMap::new();
    for e in &ledger.entries {
        let usd = match (e.service, e.unit) {
            (Service::ComputeCpu, _) => e.usage * catalog.cpu_usd_per_core_hour,
            (Service::ComputeRam, _) => e.usage * catalog.ram_usd_per_gb_hour,
            (Service::ComputeLocalDisk, _) => e.usage * catalog.local_disk_usd_per_gb_hour,
            (Service::Storage, _) => {
                e.usage * catalog.storage_usd_per_tb_month / catalog.hours_per_month
            }
            (Service::EgressInternet, _) => {
                let m = sent
                    .entry(time::month_of_day(e.day, catalog.hours_per_month))
                    .or_default();
                let before = pricing::egress_cost(*m, catalog).map_err(|x| x.to_string())?;
                *m += e.usage;
                pricing::egress_cost(*m, catalog).map_err(|x| x.to_string())? - before
            }
            (Service::EgressInterconnect, Unit::CircuitHours) => {
                e.usage * catalog.interconnect_fixed_usd_per_hour
            }
            (Service::EgressInterconnect, _) => e.usage * catalog.interconnect_usd_per_tb,
            (Service::Other, _) => e.usage * overhead_usd_per_day,
        };
        if Cents::from_usd(usd) != e.amount {
            return Err(format!(
                "day {} {}: ledger {} != repriced {}",
                e.day,
                e.service.as_str(),
                e.amount,
                Cents::from_usd(usd)
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonthlyBreakdown {
    /// `(accounting month, amount per service in [`Service::ALL`] order)`.
    pub rows: Vec<(u32, [Cents; 7])>,
}

impl MonthlyBreakdown {
    pub fn grand_total(&self) -> Cents {
        self.rows.iter().flat_map(|(_, r)| r.iter().copied()).sum()
    }
}

/// Entries summed per accounting month and service. Rows run
/// chronologically from the first to the last month with entries.
pub fn monthly_breakdown(ledger: &Ledger, hours_per_month: f64) -> MonthlyBreakdown {
    let mut months: BTreeMap<u32, [Cents; 7]> = BTreeMap::new();
    for e in &ledger.entries {
        let m = time::month_of_day(e.day, hours_per_month);
        months.entry(m).or_insert([Cents(0); 7])[e.service.index()] += e.amount;
    }
    let (Some(&first), Some(&last)) = (months.keys().next(), months.keys().last()) else {
        return MonthlyBreakdown::default();
    };
    MonthlyBreakdown {
        rows: (first..=last)
            .map(|m| (m, months.get(&m).copied().unwrap_or([Cents(0); 7])))
            .collect(),
    }
}

/// Cost shares of compute, storage, egress and other within a day window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractions {
    pub raw: [f64; 4],
    /// Integer percentages, summing to exactly 100.
    pub percent: [u32; 4],
}

impl Fractions {
    pub fn compute(&self) -> u32 {
        self.percent[0]
    }
    pub fn storage(&self) -> u32 {
        self.percent[1]
    }
    pub fn egress(&self) -> u32 {
        self.percent[2]
    }
    pub fn other(&self) -> u32 {
        self.percent[3]
    }
}

pub const GROUP_NAMES: [&str; 4] = ["compute", "storage", "egress", "other"];

/// `window` is an inclusive day range.
pub fn fractions(ledger: &Ledger, window: (u32, u32)) -> Result<Fractions> {
    if window.0 > window.1 {
        return Err(Error::domain(format!(
            "empty window {}..{}",
            window.0, window.1
        )));
    }
    let mut sums = [0i64; 4];
    for e in ledger
        .entries
        .iter()
        .filter(|e| (window.0..=window.1).contains(&e.day))
    {
        sums[e.service.group()] += e.amount.0;
    }
    let total: i64 = sums.iter().sum();
    if total <= 0 {
        return Err(Error::UndefinedFractions);
    }
    let raw = sums.map(|s| s as f64 / total as f64);
    Ok(Fractions {
        raw,
        percent: largest_remainder(&raw),
    })
}

/// Rounds shares to integer percentages that sum to 100; leftover points go
/// to the largest remainders, ties to the earlier group.
pub fn largest_remainder(raw: &[f64; 4]) -> [u32; 4] {
    let scaled = raw.map(|r| r * 100.0);
    let mut out = scaled.map(|s| s.floor() as u32);
    let assigned: u32 = out.iter().sum();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        (scaled[b] - scaled[b].floor())
            .total_cmp(&(scaled[a] - scaled[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(100u32.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// One metrics sample as seen by the egress-to-stored ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoragePoint {
    pub time_h: f64,
    pub stored_tb: f64,
    /// Cumulative job-input egress (production input and analysis) since the
    /// start of the run.
    pub cumulative_input_egress_tb: f64,
}

/// Job-input egress over an accounting month divided by the mean stored
/// volume over that month.
pub fn egress_stored_ratio(
    points: &[StoragePoint],
    month: u32,
    hours_per_month: f64,
) -> Result<f64> {
    let start = month as f64 * hours_per_month;
    let end = start + hours_per_month;
    let inside: Vec<&StoragePoint> = points
        .iter()
        .filter(|p| p.time_h >= start && p.time_h < end)
        .collect();
    if inside.is_empty() {
        return Err(Error::domain(format!(
            "month {month} is not within the run"
        )));
    }
    let mean_stored = inside.iter().map(|p| p.stored_tb).sum::<f64>() / inside.len() as f64;
    if !(mean_stored > 0.0) {
        return Err(Error::UndefinedRatio);
    }
    let at = |t: f64| {
        points
            .iter()
            .take_while(|p| p.time_h <= t)
            .last()
            .map_or(0.0, |p| p.cumulative_input_egress_tb)
    };
    let egress = at(end) - at(start);
    Ok(egress / mean_stored)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubscriptionReport {
    pub list_total_usd: f64,
    pub plan_total_usd: f64,
    /// `None` when the ledger is empty.
    pub discount_fraction: Option<f64>,
    pub resource_ratio: f64,
    pub plan_daily_rate_usd: f64,
    pub flagged_days: Vec<FlaggedDay>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlaggedDay {
    pub day: u32,
    pub list_usd: f64,
}

pub fn subscription_report(
    ledger: &Ledger,
    plan: &SubscriptionPlan,
    hours_per_month: f64,
) -> Result<SubscriptionReport> {
    plan.validate()?;
    let list = ledger.total().usd();
    let daily_rate = plan.daily_rate(hours_per_month);
    let (discount, ratio) = if list > 0.0 {
        let c = pricing::compare_subscription(list, plan)?;
        (Some(c.discount_fraction), c.resource_ratio)
    } else {
        (None, 0.0)
    };
    let flagged_days = ledger
        .daily_totals()
        .into_iter()
        .enumerate()
        .filter(|(_, c)| c.usd() > daily_rate)
        .map(|(d, c)| FlaggedDay {
            day: d as u32,
            list_usd: c.usd(),
        })
        .collect();
    Ok(SubscriptionReport {
        list_total_usd: list,
        plan_total_usd: plan.total(),
        discount_fraction: discount,
        resource_ratio: ratio,
        plan_daily_rate_usd: daily_rate,
        flagged_days,
    })
}

/// Hours in the accounting month containing hour `h`.
pub fn month_hours_span(month: u32, hours_per_month: f64) -> (f64, f64) {
    let s = month as f64 * hours_per_month;
    (s, s + hours_per_month)
}
