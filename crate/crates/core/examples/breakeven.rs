//! Compares internet egress with a dedicated circuit across monthly volumes
//! and prints where the circuit reaches half the internet bill.
//!
//! `cargo run --example breakeven`

use tcosim::pricing::{self, PricingCatalog};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cat = PricingCatalog::default();
    for ratio in [1.0, 0.5, 0.25] {
        match pricing::breakeven(&cat, ratio)? {
            Some(v) => println!("circuit <= {ratio} x internet from {v:.1} TB/month"),
            None => println!("circuit never reaches {ratio} x internet"),
        }
    }
    println!(
        "\n{:>7}  {:>12}  {:>12}  {:>5}",
        "TB", "internet", "circuit", "ratio"
    );
    for tb in [10.0, 100.0, 500.0, 1000.0, 3000.0, 5000.0] {
        let internet = pricing::egress_cost(tb, &cat)?;
        let circuit = pricing::interconnect_cost(tb, cat.hours_per_month, &cat)?;
        println!(
            "{tb:>7}  {internet:>12.2}  {circuit:>12.2}  {:>5.3}",
            circuit / internet
        );
    }
    Ok(())
}
