//! Calibrate link volumes against a sector-level account table.
//!
//! A raw network only says who supplies whom. Calibration turns it into a
//! daily flow economy in three steps: split each supplier's sales across
//! its clients in proportion to client size (tentative volumes), rescale
//! every sector-to-sector block so its annual aggregate matches the account
//! table, and hand each sector's final demand to its firms. The result
//! fixes each firm's baseline daily production, which the simulator treats
//! as an exact fixed point when nothing is restricted.
//!
//! Run with: `cargo run --release --example calibrate_network`

use std::error::Error;

use chainshock::calibration::{
    allocate_tentative, scale_to_io, synthesize_io_table, DAYS_PER_YEAR,
};
use chainshock::network::{generate_synthetic, SyntheticConfig};
use chainshock::SectorCode;

fn main() -> Result<(), Box<dyn Error>> {
    let sectors: Vec<SectorCode> = [11, 57, 75, 76, 80].map(SectorCode).to_vec();
    let net = generate_synthetic(&SyntheticConfig::new(1_500, 6_000, 5, &sectors, 11))?;

    // Tentative volumes: each supplier's sales split over clients by size.
    let tentative = allocate_tentative(&net);

    // A self-consistent account table jittered by ±15% stands in for a real
    // statistical release; calibration must absorb that mismatch.
    let io = synthesize_io_table(&net, &tentative, 0.15, 3)?;
    let (cal, report) = scale_to_io(net, &tentative, &io, DAYS_PER_YEAR)?;

    let daily_volume: f64 = cal.net().links().iter().map(|l| l.volume).sum();
    let daily_demand: f64 = cal.net().final_consumption().iter().sum();
    let baseline: f64 = cal.p_ini().iter().sum();
    println!("daily intermediate flow: {daily_volume:.1}");
    println!("daily final demand:      {daily_demand:.1}");
    println!("baseline production:     {baseline:.1}");

    // Every firm's baseline is exactly its out-flows plus its consumption.
    let identity_holds = cal.net().firms().iter().all(|f| {
        let out: f64 = cal.net().out_links(f.id).iter().map(|l| l.volume).sum::<f64>()
            + cal.net().final_consumption()[f.id.index()];
        out == cal.p_ini()[f.id.index()]
    });
    println!("per-firm budget identity holds: {identity_holds}");

    println!(
        "dropped sector pairs: {} ({}), equal-split sectors: {}, firmless: {}",
        report.dropped_pairs.len(),
        report.dropped_transaction_mass,
        report.equal_split_sectors.len(),
        report.firmless_sectors.len()
    );
    Ok(())
}
