//! List price points and hand-derived values, each checked against
//! arithmetic written out in the test rather than against the library.

use serde_json::json;
use tcosim::accounting::{self, Service};
use tcosim::engine;
use tcosim::pricing::{self, PricingCatalog, SubscriptionPlan};
use tcosim::scenario::Scenario;

fn cat() -> PricingCatalog {
    PricingCatalog::default()
}

#[test]
fn list_prices() {
    let c = cat();
    assert_eq!(c.storage_usd_per_tb_month, 20.0);
    assert_eq!(c.egress_tiers.first().unwrap().usd_per_tb, 85.0);
    assert_eq!(c.egress_tiers.last().unwrap().usd_per_tb, 45.0);
    assert_eq!(c.interconnect_fixed_usd_per_hour, 2.4);
    assert_eq!(c.interconnect_usd_per_tb, 20.0);
    assert_eq!(c.hours_per_month, 730.0);
}

#[test]
fn storage_is_prorated_per_tb_hour() {
    assert_eq!(pricing::storage_cost(730.0, &cat()).unwrap(), 20.0);
    // 6 PB for one day: 6000 * 24 / 730 * 20
    let day = pricing::storage_cost(6000.0 * 24.0, &cat()).unwrap();
    assert!((day - 3945.205479452055).abs() < 1e-9);
}

#[test]
fn egress_tiers_by_hand() {
    let c = cat();
    // 1 TB at 85, 9 TB at 65, the rest at 45
    assert_eq!(pricing::egress_cost(0.5, &c).unwrap(), 42.5);
    assert_eq!(pricing::egress_cost(10.0, &c).unwrap(), 85.0 + 585.0);
    assert_eq!(
        pricing::egress_cost(100.0, &c).unwrap(),
        670.0 + 90.0 * 45.0
    );
    assert_eq!(
        pricing::egress_cost(3000.0, &c).unwrap(),
        85.0 + 585.0 + 2990.0 * 45.0
    );
    assert_eq!(pricing::egress_cost(3000.0, &c).unwrap(), 135_220.0);
}

#[test]
fn interconnect_by_hand() {
    // 730 h * 2.4 + 3000 TB * 20
    assert_eq!(
        pricing::interconnect_cost(3000.0, 730.0, &cat()).unwrap(),
        1752.0 + 60_000.0
    );
    // 61752 / 135220 = 0.4567, under half
    assert!(
        pricing::interconnect_cost(3000.0, 730.0, &cat()).unwrap() * 2.0
            < pricing::egress_cost(3000.0, &cat()).unwrap()
    );
}

#[test]
fn breakeven_by_hand() {
    // above 10 TB: internet = 45 V + 220, circuit = 1752 + 20 V;
    // circuit <= internet / 2  <=>  V >= 1642 / 2.5 = 656.8
    let v = pricing::breakeven(&cat(), 0.5).unwrap().unwrap();
    assert!((v - 656.8).abs() <= 0.02, "{v}");
    // circuit <= internet  <=>  25 V >= 1532  <=>  V >= 61.28
    let v = pricing::breakeven(&cat(), 1.0).unwrap().unwrap();
    assert!((v - 61.28).abs() <= 0.02, "{v}");
}

#[test]
fn subscription_by_hand() {
    let plan = SubscriptionPlan::reference();
    assert_eq!(plan.monthly_fee, 56_630.54);
    assert_eq!(plan.duration_months, 15);
    assert!((plan.total() - 849_458.10).abs() < 1e-6);
    let c = pricing::compare_subscription(3_162_000.0, &plan).unwrap();
    // 1 - 849458.10 / 3162000 = 0.73135..., 3162000 / 849458.10 = 3.72237...
    assert!((c.discount_fraction - 0.731354).abs() < 1e-6);
    assert!((c.resource_ratio - 3.722373).abs() < 1e-6);
    // about $1900 a day: 56630.54 * 24 / 730
    let daily = plan.daily_rate(730.0);
    assert!((daily - 1861.8260).abs() < 1e-3);
}

#[test]
fn burst_cpu_bounds_by_hand() {
    // 1.40M to 1.57M core-hours at one cent
    assert_eq!(
        pricing::compute_cost(1_400_000.0, 0.0, 0.0, &cat()).unwrap(),
        14_000.0
    );
    assert!(
        (pricing::compute_cost(1_570_000.0, 0.0, 0.0, &cat()).unwrap() - 15_700.0).abs() < 1e-6
    );
}

#[test]
fn largest_remainder_by_hand() {
    assert_eq!(
        accounting::largest_remainder(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]),
        [34, 33, 33, 0]
    );
    // floors 72/10/9/7 leave two points for the .61 and .51 remainders
    assert_eq!(
        accounting::largest_remainder(&[0.7261, 0.1049, 0.0951, 0.0739]),
        [73, 10, 10, 7]
    );
}

/// One 8-core, 4 h job with no hazards and no data movement.
#[test]
fn single_job_bill_by_hand() {
    let s: Scenario = serde_json::from_value(json!({
        "seed": 1,
        "duration_days": 1,
        "sites": [{"name": "CLOUD", "slots": 8, "cloud": true}],
        "storage_elements": [{"name": "CLOUD_DISK", "site": "CLOUD", "capacity_tb": 10}],
        "templates": [{
            "name": "gen", "kind": "EVGEN", "events_per_job": 1000, "cores_per_job": 8,
            "walltime_mean_h": 4.0, "walltime_spread_h": 0.0,
            "ram_gb_per_core": 2, "local_disk_gb_per_core": 10,
            "output_format": "EVNT", "output_tb_per_1k_events": 0.0
        }],
        "tasks": [{"id": "t", "template": "gen", "total_events": 1000, "nucleus": "CLOUD_DISK"}]
    }))
    .unwrap();
    let r = engine::run(&s).unwrap();
    assert_eq!(r.summary.jobs_done, 1);
    assert_eq!(r.summary.productive_core_hours, 32.0);
    let by = r.ledger.total_by_service();
    // 32 core-h * 0.01, 64 GB-h * 0.001, 320 GB-h * 0.00005
    assert_eq!(by[Service::ComputeCpu.index()].0, 32);
    assert_eq!(by[Service::ComputeRam.index()].0, 6);
    assert_eq!(by[Service::ComputeLocalDisk.index()].0, 2);
    assert_eq!(r.ledger.total().0, 40);
}
