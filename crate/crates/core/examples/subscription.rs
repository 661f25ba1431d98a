//! Prices a run at list rates and compares it with the flat subscription.
//!
//! `cargo run --release --example subscription [scenario.json]`

use tcosim::accounting;
use tcosim::pricing::{self, SubscriptionPlan};
use tcosim::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = SubscriptionPlan::reference();
    let c = pricing::compare_subscription(3_162_000.0, &plan)?;
    println!(
        "15 months at list price $3,162,000 vs plan ${:.2}: discount {:.0}%, {:.2}x the resources",
        plan.total(),
        c.discount_fraction * 100.0,
        c.resource_ratio
    );

    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/window_sim.json").into());
    let scenario = Scenario::load(&path)?;
    let r = tcosim::engine::run(&scenario)?;
    let hpm = r.summary.catalog.hours_per_month;
    let report = accounting::subscription_report(&r.ledger, &plan, hpm)?;
    println!("\n{path}");
    println!("list price ${:.2}", r.ledger.total().usd());
    println!("plan daily rate ${:.2}", plan.daily_rate(hpm));
    match report.discount_fraction {
        Some(f) => println!("discount vs plan {:.0}%", f * 100.0),
        None => println!("discount undefined"),
    }
    println!("resource ratio {:.3}", report.resource_ratio);
    println!(
        "{} day(s) above the plan's daily rate",
        report.flagged_days.len()
    );
    Ok(())
}
