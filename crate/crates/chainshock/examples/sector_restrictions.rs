//! The sector table behind every restriction: rates, tiers, and identities.
//!
//! Each sector's restriction strength comes from a bundled table of labor
//! exposure and work-from-home shares: the worldwide reduction rate is
//! `exposure × (1 − work_at_home)`, and the adjusted rate applied in the
//! simulator scales that by a fixed weight. Coverage tiers pick which
//! sectors a window actually touches, from hospitality only (L1) up to the
//! whole table (L4). This example prints the tiers, checks both identities
//! over the full table, and shows the capacity cut a window imposes at
//! each level.
//!
//! Run with: `cargo run --release --example sector_restrictions`

use std::error::Error;

use chainshock::shock::{coverage_sectors, delta_at, RestrictionWindow};
use chainshock::{
    CoverageLevel, CoverageSets, Firm, FirmId, LockdownSchedule, RegionId, SectorCode, SectorTable,
};

fn main() -> Result<(), Box<dyn Error>> {
    let table = SectorTable::bundled();
    println!("bundled table: {} sectors, weight {}", table.len(), table.weight());

    // Both identities hold for every row within the table's rounding.
    for e in table.entries() {
        let worldwide = e.exposure * (1.0 - e.work_at_home);
        assert!((e.worldwide_rate - worldwide).abs() <= 5e-3);
        assert!((e.adjusted_rate - table.weight() * e.worldwide_rate).abs() <= 5e-3);
    }
    println!("rate identities verified on all rows");

    // Tier sizes nest: L1 ⊂ L2 ⊂ L3 ⊂ L4.
    for level in CoverageLevel::ALL {
        let sectors = coverage_sectors(level, &table);
        println!("{level}: {:>3} sectors", sectors.len());
    }

    // The capacity cut on an accommodation firm (code 75) and a general
    // machinery firm (code 26) under a window at each level. Hospitality
    // is hit from L1; machinery only once L4 covers everything.
    let firm_in = |sector: u32| Firm {
        id: FirmId(0),
        sector: SectorCode(sector),
        region: RegionId(1),
        sales: 1.0,
    };
    let hotel = firm_in(75);
    let machine = firm_in(26);
    let coverage = CoverageSets::defaults(&table);
    println!("\nlevel   cut for code 75   cut for code 26");
    for level in CoverageLevel::ALL {
        let schedule = LockdownSchedule::new(
            10,
            vec![RestrictionWindow {
                region: RegionId(1),
                start_day: 0,
                duration_days: 10,
                coverage: level,
            }],
        )?;
        println!(
            "{level}     {:>15.3}   {:>15.3}",
            delta_at(&hotel, 5, &schedule, &table, &coverage),
            delta_at(&machine, 5, &schedule, &table, &coverage)
        );
    }

    // Outside the window's region or dates nothing is restricted.
    let schedule = LockdownSchedule::new(
        10,
        vec![RestrictionWindow {
            region: RegionId(1),
            start_day: 0,
            duration_days: 5,
            coverage: CoverageLevel::L4,
        }],
    )?;
    let elsewhere = Firm {
        region: RegionId(2),
        ..hotel.clone()
    };
    assert_eq!(delta_at(&elsewhere, 3, &schedule, &table, &coverage), 0.0);
    assert_eq!(delta_at(&hotel, 7, &schedule, &table, &coverage), 0.0);
    println!("\nno cut outside the window's region or dates");
    Ok(())
}
