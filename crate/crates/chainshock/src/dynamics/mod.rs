//! The daily simulation kernel.
//!
//! Each simulated day runs six phases over the whole economy:
//!
//! 1. **orders** — every firm orders from each supplier its baseline share
//!    scaled by yesterday's realized demand, plus a fraction `1/tau` of any
//!    gap between its inventory target and current stock;
//! 2. **demand** — orders are totaled per supplier, plus the (constant)
//!    final-consumer order;
//! 3. **production** — actual production is demand capped by restricted
//!    capacity and by inventory cover: for each supplying sector, stock on
//!    hand relative to baseline use bounds how much the firm can make;
//! 4. **allocation** — firms short of demand ration production across
//!    clients and the final consumer (see [`ration`]);
//! 5. **realized demand** — allocations are totaled per supplier and become
//!    tomorrow's demand signal;
//! 6. **inventory** — stocks receive what was allocated and lose what
//!    production consumed, floored at zero.
//!
//! A [`Simulator`] streams one [`DayRecord`] per day so long runs need not
//! retain full histories. With no restrictions scheduled, the calibrated
//! baseline is an exact fixed point of the step: production equals baseline
//! production bitwise, day after day — a property the integration suite
//! leans on to detect drift.

mod ration;

pub use ration::{ration, ration_literal};
pub(crate) use ration::{RationScratch, CONSUMER_SLOT};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibratedNetwork;
use crate::network::FirmId;
use crate::shock::{CoverageLevel, CoverageSets, LockdownSchedule, SectorTable};

/// Knobs for one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Days over which firms close an inventory shortfall (order smoothing).
    pub tau: u32,
    /// Mean of the per-firm inventory target draw, in days of baseline use.
    pub mean_inventory_days: f64,
    /// Floor applied to the inventory target draw.
    pub min_inventory_days: u32,
    /// Number of days to simulate.
    pub horizon_days: u32,
    /// Seed for the per-firm inventory target draws.
    pub seed: u64,
    /// Consume inputs against the previous day's production instead of the
    /// same day's (compatibility variant).
    pub lagged_consumption: bool,
    /// Use the printed-form allocation sweep instead of the scaled rule
    /// (compatibility variant; see [`ration_literal`]).
    pub ration_literal: bool,
    /// Record capacity, production ceiling, and demand per day, not just
    /// actual production.
    pub diagnostics: bool,
}

impl SimParams {
    /// Defaults: `tau` 6, inventory target mean 10 days floored at 4,
    /// same-day consumption, scaled allocation, no extra diagnostics.
    pub fn new(horizon_days: u32, seed: u64) -> Self {
        Self {
            tau: 6,
            mean_inventory_days: 10.0,
            min_inventory_days: 4,
            horizon_days,
            seed,
            lagged_consumption: false,
            ration_literal: false,
            diagnostics: false,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.tau == 0 {
            return Err(SimError::BadParams("tau must be at least 1".into()));
        }
        if self.min_inventory_days == 0 {
            return Err(SimError::BadParams(
                "min_inventory_days must be at least 1".into(),
            ));
        }
        if !(self.mean_inventory_days > 0.0) || !self.mean_inventory_days.is_finite() {
            return Err(SimError::BadParams(format!(
                "mean_inventory_days must be positive and finite, got {}",
                self.mean_inventory_days
            )));
        }
        if self.horizon_days == 0 {
            return Err(SimError::BadParams("horizon_days must be at least 1".into()));
        }
        Ok(())
    }
}

/// Simulation failures.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation parameters: {0}")]
    BadParams(String),
    #[error("non-finite value in the {phase} phase at firm {firm}, day {day}")]
    NonFinite {
        phase: &'static str,
        firm: FirmId,
        day: u32,
    },
}

/// One day of per-firm results. Capacity, ceiling, and demand are present
/// only when [`SimParams::diagnostics`] is set.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub day: u32,
    /// Actual production per firm.
    pub p_act: Vec<f64>,
    /// Restricted capacity per firm (diagnostics).
    pub p_cap: Option<Vec<f64>>,
    /// Production ceiling after inventory cover per firm (diagnostics).
    pub p_max: Option<Vec<f64>>,
    /// Total demand per firm (diagnostics).
    pub demand: Option<Vec<f64>>,
}

/// Streaming daily simulation over a calibrated network under a restriction
/// schedule. Identical inputs produce bitwise-identical records.
pub struct Simulator<'a> {
    cal: &'a CalibratedNetwork,
    schedule: &'a LockdownSchedule,
    params: SimParams,
    inv_tau: f64,
    day: u32,

    // Per-firm restriction lookup: capacity reduction rate by sector, and a
    // bitmask of coverage levels whose sector set includes the firm.
    rate: Vec<f64>,
    level_mask: Vec<u8>,
    region_pos: Vec<u32>,
    region_mask: Vec<u8>,

    // Incoming links regrouped per client by supplier sector: `in_perm`
    // lists link slots client-major, `run_bounds` cuts it into per-sector
    // runs, `firm_runs` cuts the runs per firm, and `run_a_tot` carries each
    // run's baseline volume total.
    in_perm: Vec<u32>,
    run_bounds: Vec<u32>,
    firm_runs: Vec<u32>,
    run_a_tot: Vec<f64>,

    // Per-link state and per-day scratch.
    inventory: Vec<f64>,
    order: Vec<f64>,
    realized: Vec<f64>,

    // Per-firm state and per-day scratch.
    n_days: Vec<u32>,
    n_f: Vec<f64>,
    dstar_prev: Vec<f64>,
    dstar_next: Vec<f64>,
    pact_prev: Vec<f64>,
    ratio: Vec<f64>,
    demand: Vec<f64>,
    p_cap: Vec<f64>,
    p_max: Vec<f64>,
    p_act: Vec<f64>,
    util: Vec<f64>,
    cstar: Vec<f64>,

    scratch: RationScratch,
    clamped_mass: f64,
}

impl<'a> Simulator<'a> {
    /// Set up a run: draw per-firm inventory targets, fill initial stocks to
    /// target, and start demand and production at their baselines.
    pub fn new(
        cal: &'a CalibratedNetwork,
        schedule: &'a LockdownSchedule,
        table: &SectorTable,
        coverage: &CoverageSets,
        params: SimParams,
    ) -> Result<Self, SimError> {
        params.validate()?;
        let net = cal.net();
        let firms = net.firm_count();
        let links = net.link_count();

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let poisson = Poisson::new(params.mean_inventory_days)
            .map_err(|e| SimError::BadParams(format!("bad inventory target mean: {e}")))?;
        let floor = f64::from(params.min_inventory_days);
        let n_f: Vec<f64> = (0..firms)
            .map(|_| poisson.sample(&mut rng).max(floor))
            .collect();
        let n_days: Vec<u32> = n_f.iter().map(|&n| n as u32).collect();

        let mut rate = vec![0.0; firms];
        let mut level_mask = vec![0u8; firms];
        let mut region_pos = vec![0u32; firms];
        for (i, firm) in net.firms().iter().enumerate() {
            rate[i] = table.get(firm.sector).map_or(0.0, |e| e.adjusted_rate);
            let mut mask = 0u8;
            for level in CoverageLevel::ALL {
                if coverage.contains(level, firm.sector) {
                    mask |= 1u8 << level.index();
                }
            }
            level_mask[i] = mask;
            region_pos[i] = net
                .region_index(firm.region)
                .expect("firm regions are registered") as u32;
        }

        let mut in_perm = Vec::with_capacity(links);
        let mut run_bounds = vec![0u32];
        let mut firm_runs = vec![0u32];
        let mut run_a_tot = Vec::new();
        let mut slots: Vec<(u32, u32)> = Vec::new();
        for firm in net.firms() {
            slots.clear();
            slots.extend(net.in_link_ids(firm.id).iter().map(|&slot| {
                let supplier = net.links()[slot as usize].supplier;
                (net.firm(supplier).sector.0, slot)
            }));
            slots.sort_unstable();
            let mut k = 0;
            while k < slots.len() {
                let sector = slots[k].0;
                let mut a_tot = 0.0;
                while k < slots.len() && slots[k].0 == sector {
                    let slot = slots[k].1;
                    in_perm.push(slot);
                    a_tot += net.links()[slot as usize].volume;
                    k += 1;
                }
                run_bounds.push(in_perm.len() as u32);
                run_a_tot.push(a_tot);
            }
            firm_runs.push(run_a_tot.len() as u32);
        }

        let mut inventory = vec![0.0; links];
        for (slot, link) in net.links().iter().enumerate() {
            inventory[slot] = n_f[link.client.index()] * link.volume;
        }

        let p_ini = cal.p_ini().to_vec();
        Ok(Self {
            cal,
            schedule,
            params,
            inv_tau: 1.0 / f64::from(params.tau),
            day: 0,
            rate,
            level_mask,
            region_pos,
            region_mask: vec![0u8; net.regions().len()],
            in_perm,
            run_bounds,
            firm_runs,
            run_a_tot,
            inventory,
            order: vec![0.0; links],
            realized: vec![0.0; links],
            n_days,
            n_f,
            dstar_prev: p_ini.clone(),
            dstar_next: vec![0.0; firms],
            pact_prev: p_ini,
            ratio: vec![0.0; firms],
            demand: vec![0.0; firms],
            p_cap: vec![0.0; firms],
            p_max: vec![0.0; firms],
            p_act: vec![0.0; firms],
            util: vec![0.0; firms],
            cstar: vec![0.0; firms],
            scratch: RationScratch::default(),
            clamped_mass: 0.0,
        })
    }

    /// Next day to simulate (also the number of days completed).
    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    /// Per-firm inventory targets, in days of baseline use.
    pub fn n_days(&self) -> &[u32] {
        &self.n_days
    }

    /// Total stock mass removed by the non-negativity floor so far. Stays 0
    /// in unshocked runs; a large value signals an inconsistent scenario.
    pub fn clamped_mass(&self) -> f64 {
        self.clamped_mass
    }

    #[cfg(test)]
    pub(crate) fn inventory(&self) -> &[f64] {
        &self.inventory
    }

    /// Simulate one day. Returns `None` once the horizon is reached.
    pub fn step(&mut self) -> Result<Option<DayRecord>, SimError> {
        if self.day >= self.params.horizon_days {
            return Ok(None);
        }
        let day = self.day;
        let net = self.cal.net();
        let links = net.links();
        let p_ini = self.cal.p_ini();
        let consumption = net.final_consumption();

        // Restrictions active today, folded to one bitmask per region.
        self.region_mask.fill(0);
        let mut any_restriction = false;
        for w in self.schedule.active(day) {
            if let Some(pos) = net.region_index(w.region) {
                self.region_mask[pos] |= 1u8 << w.coverage.index();
                any_restriction = true;
            }
        }

        // Orders: baseline share of yesterday's realized demand plus a
        // paced inventory refill. Firms with no baseline production order
        // nothing (their demand ratio is defined as zero).
        for i in 0..net.firm_count() {
            self.ratio[i] = if p_ini[i] > 0.0 {
                self.dstar_prev[i] / p_ini[i]
            } else {
                0.0
            };
        }
        for (slot, link) in links.iter().enumerate() {
            let c = link.client.index();
            let gap = self.n_f[c] * link.volume - self.inventory[slot];
            let refill = if gap > 0.0 { gap * self.inv_tau } else { 0.0 };
            let o = link.volume * self.ratio[c] + refill;
            if !o.is_finite() {
                return Err(SimError::NonFinite {
                    phase: "orders",
                    firm: link.client,
                    day,
                });
            }
            self.order[slot] = o;
        }

        // Demand: incoming orders plus the constant final-consumer order.
        for i in 0..net.firm_count() {
            let mut d = 0.0;
            for slot in net.out_range(FirmId(i as u32)) {
                d += self.order[slot];
            }
            d += consumption[i];
            if !d.is_finite() {
                return Err(SimError::NonFinite {
                    phase: "demand",
                    firm: FirmId(i as u32),
                    day,
                });
            }
            self.demand[i] = d;
        }

        // Production: restricted capacity, then the inventory-cover ceiling
        // per supplying sector (sectors never bought from impose nothing).
        for i in 0..net.firm_count() {
            let delta = if any_restriction
                && self.level_mask[i] & self.region_mask[self.region_pos[i] as usize] != 0
            {
                self.rate[i]
            } else {
                0.0
            };
            let cap = p_ini[i] * (1.0 - delta);
            let mut ceiling = cap;
            for run in self.firm_runs[i]..self.firm_runs[i + 1] {
                let a_tot = self.run_a_tot[run as usize];
                if a_tot <= 0.0 {
                    continue;
                }
                let mut s_tot = 0.0;
                for k in self.run_bounds[run as usize]..self.run_bounds[run as usize + 1] {
                    s_tot += self.inventory[self.in_perm[k as usize] as usize];
                }
                ceiling = ceiling.min(s_tot / a_tot * p_ini[i]);
            }
            let act = ceiling.min(self.demand[i]);
            if !act.is_finite() {
                return Err(SimError::NonFinite {
                    phase: "production",
                    firm: FirmId(i as u32),
                    day,
                });
            }
            self.p_cap[i] = cap;
            self.p_max[i] = ceiling;
            self.p_act[i] = act;
        }

        // Allocation, then next-day realized demand per supplier.
        for i in 0..net.firm_count() {
            let firm = FirmId(i as u32);
            let range = net.out_range(firm);
            let r = self.p_act[i];
            if r >= self.demand[i] {
                for slot in range.clone() {
                    self.realized[slot] = self.order[slot];
                }
                self.cstar[i] = consumption[i];
            } else {
                self.scratch.clear();
                for slot in range.clone() {
                    let o = self.order[slot];
                    self.realized[slot] = 0.0;
                    if o > 0.0 {
                        self.scratch.push(o, links[slot].volume, slot as u32);
                    }
                }
                if consumption[i] > 0.0 {
                    self.scratch.push(consumption[i], consumption[i], CONSUMER_SLOT);
                }
                if self.params.ration_literal {
                    self.scratch.fill_literal(r);
                } else {
                    self.scratch.fill_scaled(r);
                }
                self.cstar[i] = 0.0;
                for p in self.scratch.parts() {
                    if p.slot == CONSUMER_SLOT {
                        self.cstar[i] = p.realized;
                    } else {
                        self.realized[p.slot as usize] = p.realized;
                    }
                }
            }
            let mut dstar = 0.0;
            for slot in range {
                dstar += self.realized[slot];
            }
            dstar += self.cstar[i];
            if !dstar.is_finite() {
                return Err(SimError::NonFinite {
                    phase: "allocation",
                    firm,
                    day,
                });
            }
            debug_assert!(
                self.params.ration_literal
                    || (dstar - r.min(self.demand[i])).abs() <= 1e-9 * r.max(1.0),
                "allocation must close: firm {firm} day {day}"
            );
            self.dstar_next[i] = dstar;
        }

        // Inventory: add what was delivered, consume in proportion to
        // production. The delivered-minus-consumed difference is formed
        // first so the unshocked baseline (delivery exactly cancels
        // consumption) leaves stock bitwise unchanged.
        let lagged = self.params.lagged_consumption;
        for i in 0..net.firm_count() {
            let used = if lagged { self.pact_prev[i] } else { self.p_act[i] };
            self.util[i] = if p_ini[i] > 0.0 { used / p_ini[i] } else { 0.0 };
        }
        for (slot, link) in links.iter().enumerate() {
            let c = link.client.index();
            let v = self.inventory[slot] + (self.realized[slot] - link.volume * self.util[c]);
            if !v.is_finite() {
                return Err(SimError::NonFinite {
                    phase: "inventory",
                    firm: link.client,
                    day,
                });
            }
            self.inventory[slot] = if v < 0.0 {
                self.clamped_mass -= v;
                0.0
            } else {
                v
            };
        }

        std::mem::swap(&mut self.dstar_prev, &mut self.dstar_next);
        self.pact_prev.copy_from_slice(&self.p_act);
        self.day += 1;

        Ok(Some(DayRecord {
            day,
            p_act: self.p_act.clone(),
            p_cap: self.params.diagnostics.then(|| self.p_cap.clone()),
            p_max: self.params.diagnostics.then(|| self.p_max.clone()),
            demand: self.params.diagnostics.then(|| self.demand.clone()),
        }))
    }

    /// Run to the horizon, collecting every day. Prefer looping [`step`]
    /// when the history is reduced on the fly.
    ///
    /// [`step`]: Simulator::step
    pub fn run(&mut self) -> Result<Vec<DayRecord>, SimError> {
        let mut records =
            Vec::with_capacity((self.params.horizon_days - self.day) as usize);
        while let Some(record) = self.step()? {
            records.push(record);
        }
        Ok(records)
    }
}
