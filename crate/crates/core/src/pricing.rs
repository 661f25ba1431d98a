//! Unit prices and the cost arithmetic built on them.
//!
//! Every function here is pure. Amounts are returned as unrounded USD `f64`;
//! conversion to integral cents happens once, when ledger rows are emitted
//! (see [`Cents::from_usd`]).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Terabytes per petabyte. Units are decimal throughout.
pub const TB_PER_PB: f64 = 1000.0;
pub const GB_PER_TB: f64 = 1000.0;

/// Integral US cents.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Cents(pub i64);

impl Cents {
    /// Rounds half away from zero.
    pub fn from_usd(usd: f64) -> Cents {
        Cents((usd * 100.0).round() as i64)
    }

    pub fn usd(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl std::ops::Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Cents {
    fn add_assign(&mut self, rhs: Cents) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        iter.fold(Cents(0), |a, b| a + b)
    }
}

impl std::fmt::Display for Cents {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

/// One band of the monthly egress schedule. `up_to_tb` is the cumulative
/// monthly volume at which the band ends; `None` marks the open last band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgressTier {
    pub up_to_tb: Option<f64>,
    pub usd_per_tb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingCatalog {
    pub cpu_usd_per_core_hour: f64,
    pub ram_usd_per_gb_hour: f64,
    pub local_disk_usd_per_gb_hour: f64,
    pub storage_usd_per_tb_month: f64,
    pub egress_tiers: Vec<EgressTier>,
    pub interconnect_fixed_usd_per_hour: f64,
    pub interconnect_usd_per_tb: f64,
    pub hours_per_month: f64,
}

impl Default for PricingCatalog {
    /// Spot compute at about a cent per core-hour, $20/TB-month storage,
    /// internet egress tiered from $85 down to $45 per TB and a 10 Gbps
    /// circuit at $2.4/hour plus $20/TB.
    ///
    /// RAM and local-disk rates are calibration values chosen so a
    /// 4 GB/core, 20 GB/core job costs about 1.5 cents per core-hour in total.
    fn default() -> Self {
        PricingCatalog {
            cpu_usd_per_core_hour: 0.01,
            ram_usd_per_gb_hour: 0.001,
            local_disk_usd_per_gb_hour: 0.00005,
            storage_usd_per_tb_month: 20.0,
            egress_tiers: default_egress_tiers(),
            interconnect_fixed_usd_per_hour: 2.4,
            interconnect_usd_per_tb: 20.0,
            hours_per_month: 730.0,
        }
    }
}

pub fn default_egress_tiers() -> Vec<EgressTier> {
    vec![
        EgressTier {
            up_to_tb: Some(1.0),
            usd_per_tb: 85.0,
        },
        EgressTier {
            up_to_tb: Some(10.0),
            usd_per_tb: 65.0,
        },
        EgressTier {
            up_to_tb: None,
            usd_per_tb: 45.0,
        },
    ]
}

impl PricingCatalog {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("cpu_usd_per_core_hour", self.cpu_usd_per_core_hour),
            ("ram_usd_per_gb_hour", self.ram_usd_per_gb_hour),
            (
                "local_disk_usd_per_gb_hour",
                self.local_disk_usd_per_gb_hour,
            ),
            ("storage_usd_per_tb_month", self.storage_usd_per_tb_month),
            (
                "interconnect_fixed_usd_per_hour",
                self.interconnect_fixed_usd_per_hour,
            ),
            ("interconnect_usd_per_tb", self.interconnect_usd_per_tb),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "{name} must be a finite rate >= 0, got {v}"
                )));
            }
        }
        if !(self.hours_per_month > 0.0 && self.hours_per_month.is_finite()) {
            return Err(Error::config("hours_per_month must be > 0"));
        }
        validate_tiers(&self.egress_tiers)
    }

    /// Cheapest (last) internet egress rate.
    pub fn cheapest_egress_rate(&self) -> f64 {
        self.egress_tiers.last().map_or(0.0, |t| t.usd_per_tb)
    }
}

fn validate_tiers(tiers: &[EgressTier]) -> Result<()> {
    let Some(last) = tiers.last() else {
        return Err(Error::config("egress_tiers must not be empty"));
    };
    if last.up_to_tb.is_some() {
        return Err(Error::config("last egress tier must be unbounded"));
    }
    let mut prev_bound = 0.0;
    let mut prev_rate = f64::INFINITY;
    for (i, t) in tiers.iter().enumerate() {
        if !(t.usd_per_tb >= 0.0 && t.usd_per_tb.is_finite()) {
            return Err(Error::config(format!("egress tier {i}: rate must be >= 0")));
        }
        if t.usd_per_tb > prev_rate {
            return Err(Error::config(format!(
                "egress tier {i}: marginal rates must not increase with volume"
            )));
        }
        prev_rate = t.usd_per_tb;
        match t.up_to_tb {
            Some(b) if i + 1 == tiers.len() => unreachable!("checked above: {b}"),
            Some(b) => {
                if !(b > prev_bound && b.is_finite()) {
                    return Err(Error::config(format!(
                        "egress tier {i}: bounds must be strictly increasing"
                    )));
                }
                prev_bound = b;
            }
            None if i + 1 != tiers.len() => {
                return Err(Error::config(format!(
                    "egress tier {i}: only the last tier may be unbounded"
                )));
            }
            None => {}
        }
    }
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be >= 0, got {v}")))
    }
}

pub fn compute_cost(
    core_hours: f64,
    ram_gb_hours: f64,
    local_disk_gb_hours: f64,
    catalog: &PricingCatalog,
) -> Result<f64> {
    non_negative("core_hours", core_hours)?;
    non_negative("ram_gb_hours", ram_gb_hours)?;
    non_negative("local_disk_gb_hours", local_disk_gb_hours)?;
    Ok(core_hours * catalog.cpu_usd_per_core_hour
        + ram_gb_hours * catalog.ram_usd_per_gb_hour
        + local_disk_gb_hours * catalog.local_disk_usd_per_gb_hour)
}

/// Storage is prorated linearly: one TB held for `hours_per_month` hours costs
/// one month of storage.
pub fn storage_cost(tb_hours: f64, catalog: &PricingCatalog) -> Result<f64> {
    non_negative("tb_hours", tb_hours)?;
    Ok(tb_hours * catalog.storage_usd_per_tb_month / catalog.hours_per_month)
}

/// Marginal tiered cost of `monthly_volume_tb` sent over the internet within
/// one accounting month.
pub fn egress_cost(monthly_volume_tb: f64, catalog: &PricingCatalog) -> Result<f64> {
    non_negative("monthly_volume_tb", monthly_volume_tb)?;
    validate_tiers(&catalog.egress_tiers)?;
    Ok(tiered_sum(monthly_volume_tb, &catalog.egress_tiers))
}

/// Cost of moving `volume` TB on top of `already_sent` TB in the same month.
pub fn egress_increment(already_sent: f64, volume: f64, catalog: &PricingCatalog) -> Result<f64> {
    non_negative("already_sent", already_sent)?;
    non_negative("volume", volume)?;
    validate_tiers(&catalog.egress_tiers)?;
    Ok(tiered_sum(already_sent + volume, &catalog.egress_tiers)
        - tiered_sum(already_sent, &catalog.egress_tiers))
}

fn tiered_sum(volume: f64, tiers: &[EgressTier]) -> f64 {
    let mut cost = 0.0;
    let mut lower = 0.0;
    for t in tiers {
        let upper = t.up_to_tb.unwrap_or(f64::INFINITY);
        if volume <= lower {
            break;
        }
        cost += (volume.min(upper) - lower) * t.usd_per_tb;
        lower = upper;
    }
    cost
}

pub fn interconnect_cost(
    monthly_volume_tb: f64,
    provisioned_hours: f64,
    catalog: &PricingCatalog,
) -> Result<f64> {
    non_negative("monthly_volume_tb", monthly_volume_tb)?;
    non_negative("provisioned_hours", provisioned_hours)?;
    Ok(provisioned_hours * catalog.interconnect_fixed_usd_per_hour
        + monthly_volume_tb * catalog.interconnect_usd_per_tb)
}

const BREAKEVEN_UPPER_TB: f64 = 1e7;
const BREAKEVEN_TOLERANCE_TB: f64 = 0.01;

/// Smallest monthly volume at which one provisioned circuit costs no more
/// than `target_ratio` times the internet egress bill for the same volume.
///
/// Returns `None` when the circuit's per-TB rate is not below
/// `target_ratio` times the cheapest internet tier, or when no volume up to
/// 10^7 TB qualifies.
pub fn breakeven(catalog: &PricingCatalog, target_ratio: f64) -> Result<Option<f64>> {
    if !(target_ratio > 0.0 && target_ratio <= 1.0) {
        return Err(Error::domain(format!(
            "target_ratio must be in (0, 1], got {target_ratio}"
        )));
    }
    catalog.validate()?;
    if catalog.interconnect_usd_per_tb >= target_ratio * catalog.cheapest_egress_rate() {
        return Ok(None);
    }

    let gap = |v: f64| {
        catalog.hours_per_month * catalog.interconnect_fixed_usd_per_hour
            + v * catalog.interconnect_usd_per_tb
            - target_ratio * tiered_sum(v, &catalog.egress_tiers)
    };
    // The gap is piecewise linear with kinks at tier bounds. "Some u <= v has
    // gap(u) <= 0" is monotone in v, which makes bisection find the first
    // crossing even when the gap is not monotone.
    let kinks: Vec<f64> = catalog
        .egress_tiers
        .iter()
        .filter_map(|t| t.up_to_tb)
        .collect();
    let reached = |v: f64| gap(v) <= 0.0 || kinks.iter().any(|&k| k <= v && gap(k) <= 0.0);

    if gap(0.0) <= 0.0 {
        return Ok(Some(0.0));
    }
    if !reached(BREAKEVEN_UPPER_TB) {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, BREAKEVEN_UPPER_TB);
    while hi - lo > BREAKEVEN_TOLERANCE_TB {
        let mid = 0.5 * (lo + hi);
        if reached(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubscriptionPlan {
    pub monthly_fee: f64,
    pub duration_months: u32,
    #[serde(default)]
    pub assumed_cores: f64,
    #[serde(default)]
    pub assumed_storage_tb: f64,
    #[serde(default)]
    pub assumed_egress_tb_per_month: f64,
}

impl SubscriptionPlan {
    /// The 15-month public-sector agreement: 7,000 cores, 7 PB and 0.7 PB of
    /// egress per month at a flat $56,630.54.
    pub fn reference() -> Self {
        SubscriptionPlan {
            monthly_fee: 56_630.54,
            duration_months: 15,
            assumed_cores: 7000.0,
            assumed_storage_tb: 7.0 * TB_PER_PB,
            assumed_egress_tb_per_month: 0.7 * TB_PER_PB,
        }
    }

    pub fn total(&self) -> f64 {
        self.monthly_fee * self.duration_months as f64
    }

    /// Flat fee spread over days of an accounting month.
    pub fn daily_rate(&self, hours_per_month: f64) -> f64 {
        self.monthly_fee * 24.0 / hours_per_month
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.monthly_fee > 0.0 && self.monthly_fee.is_finite()) {
            return Err(Error::config("subscription monthly_fee must be > 0"));
        }
        if self.duration_months < 1 {
            return Err(Error::config("subscription duration_months must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubscriptionComparison {
    /// `1 - plan / list`.
    pub discount_fraction: f64,
    /// `list / plan`: how many times more resources were used than paid for.
    pub resource_ratio: f64,
}

pub fn compare_subscription(
    list_price_total: f64,
    plan: &SubscriptionPlan,
) -> Result<SubscriptionComparison> {
    let plan_total = plan.total();
    if !(plan_total > 0.0) {
        return Err(Error::domain("subscription plan total must be > 0"));
    }
    non_negative("list_price_total", list_price_total)?;
    if list_price_total == 0.0 {
        return Err(Error::domain(
            "discount is undefined for a zero list-price total",
        ));
    }
    let resource_ratio = list_price_total / plan_total;
    Ok(SubscriptionComparison {
        discount_fraction: 1.0 - plan_total / list_price_total,
        resource_ratio,
    })
}
