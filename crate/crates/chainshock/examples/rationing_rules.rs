//! How a constrained supplier splits scarce output across its clients.
//!
//! When a firm cannot serve every order it allocates what it can produce.
//! The default rule scales clients toward a common fraction of their
//! baseline purchase: clients ordering little relative to their baseline
//! are served in full, the rest get the same multiple of their baseline,
//! and the grand total always matches supply exactly, to the last bit. The
//! alternative printed-form sweep instead retires the relatively smallest
//! order each round and rescales the rest; it is kept as a compatibility
//! variant, never overspends, and conserves supply to rounding.
//!
//! Run with: `cargo run --release --example rationing_rules`

use chainshock::{ration, ration_literal};

fn main() {
    // Four clients as (order, baseline) pairs — equal baselines, very
    // different orders — plus the final consumer ordering its baseline 30.
    let clients = [(5.0, 25.0), (20.0, 25.0), (40.0, 25.0), (80.0, 25.0)];
    let consumer = (30.0, 30.0);
    let supply = 100.0; // total ordered: 175

    let (scaled, scaled_consumer) = ration(supply, &clients, consumer);
    let (literal, literal_consumer) = ration_literal(supply, &clients, consumer);

    println!("order   baseline   scaled     literal");
    for (i, &(order, baseline)) in clients.iter().enumerate() {
        println!(
            "{order:>5}   {baseline:>8}   {:>8.4}   {:>8.4}",
            scaled[i], literal[i]
        );
    }
    println!(
        "{:>5}   {:>8}   {scaled_consumer:>8.4}   {literal_consumer:>8.4}   (final consumer)",
        consumer.0, consumer.1
    );

    let scaled_sum: f64 = scaled.iter().sum::<f64>() + scaled_consumer;
    let literal_sum: f64 = literal.iter().sum::<f64>() + literal_consumer;
    println!("totals: scaled {scaled_sum}, literal {literal_sum}, supply {supply}");

    // The scaled rule conserves exactly; the literal sweep never overspends
    // and lands within rounding of the budget.
    assert_eq!(scaled_sum, supply);
    assert!(literal_sum <= supply && supply - literal_sum < 1e-9);

    // Under the scaled rule the small order is served in full and every
    // rationed client ends on the same multiple of its baseline.
    assert_eq!(scaled[0], clients[0].0);
    let lambda = scaled[2] / clients[2].1;
    assert!((scaled[3] / clients[3].1 - lambda).abs() < 1e-12);
    println!("common rationed fraction of baseline: {lambda:.4}");

    // A supplier that can cover everything fills every order exactly.
    let (full, full_consumer) = ration(200.0, &clients, consumer);
    assert_eq!(full, clients.map(|(o, _)| o).to_vec());
    assert_eq!(full_consumer, consumer.0);
    println!("with supply 200 every order is filled");
}
