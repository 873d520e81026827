//! Batched loss experiments over restriction schedules.
//!
//! This module ties the others together: it derives a value-added baseline
//! from a calibrated network, runs many independently seeded simulations in
//! parallel, reduces each run to total and per-region output losses,
//! compares coordination designs with a rank-sum test, and writes the
//! report files.
//!
//! Determinism is a hard requirement: every run's seed is a hash of the
//! master seed, the schedule label, and the run index, and batch results
//! are assembled in job order, so outputs are byte-identical regardless of
//! how many worker threads execute the batch.

mod stats;

pub use stats::wilcoxon_rank_sum;

use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calibration::CalibratedNetwork;
use crate::dynamics::{SimError, SimParams, Simulator};
use crate::network::{RegionId, SupplyNetwork};
use crate::numfmt::sig9;
use crate::shock::{CoverageSets, LockdownSchedule, SectorTable};

/// Experiment failures.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("run {run} of schedule {label} failed")]
    Simulation {
        label: String,
        run: u32,
        #[source]
        source: SimError,
    },
    #[error("pair {label}: parts have {part_a} and {part_b} runs, cannot pair them up")]
    MismatchedRuns {
        label: String,
        part_a: usize,
        part_b: usize,
    },
    #[error("no loss summaries for region {0}")]
    MissingRegion(RegionId),
    #[error("rank-sum test needs at least 3 values per side, got {left} and {right}")]
    TooFewSamples { left: usize, right: usize },
    #[error("{0}")]
    Shape(String),
}

/// Daily value added per firm: baseline production minus the sum of
/// incoming intermediate volumes, floored at zero (a firm priced below its
/// inputs contributes nothing rather than negative output).
pub fn value_added(cal: &CalibratedNetwork) -> Vec<f64> {
    let mut v = cal.p_ini().to_vec();
    for link in cal.net().links() {
        v[link.client.index()] -= link.volume;
    }
    for x in &mut v {
        *x = x.max(0.0);
    }
    v
}

/// Value-added aggregates of a calibrated network at full utilization, the
/// reference that losses are measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    /// Daily value added per firm (see [`value_added`]).
    pub value_added: Vec<f64>,
    /// Total daily value added.
    pub gdp_per_day: f64,
    /// Daily value added per region, aligned with [`SupplyNetwork::regions`].
    pub region_grp_per_day: Vec<f64>,
}

impl Baseline {
    pub fn compute(cal: &CalibratedNetwork) -> Self {
        let net = cal.net();
        let value_added = value_added(cal);
        let p_ini = cal.p_ini();
        let region_pos = firm_region_positions(net);
        let mut region_grp_per_day = vec![0.0; net.regions().len()];
        let gdp_per_day =
            accumulate_gdp(&value_added, p_ini, p_ini, &region_pos, &mut region_grp_per_day);
        Self {
            value_added,
            gdp_per_day,
            region_grp_per_day,
        }
    }
}

fn firm_region_positions(net: &SupplyNetwork) -> Vec<u32> {
    net.firms()
        .iter()
        .map(|f| net.region_index(f.region).expect("firm regions are listed") as u32)
        .collect()
}

/// Sum `value_added[i] · p_act[i] / p_ini[i]` over firms, accumulating
/// per-region subtotals into `region_out` along the way. The baseline and
/// the daily passes share this exact loop so that an unshocked day, whose
/// `p_act` equals `p_ini` bit for bit, reproduces the baseline figures bit
/// for bit and reports a loss of exactly zero.
fn accumulate_gdp(
    value_added: &[f64],
    p_ini: &[f64],
    p_act: &[f64],
    region_pos: &[u32],
    region_out: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    for i in 0..value_added.len() {
        if p_ini[i] > 0.0 {
            let x = value_added[i] * (p_act[i] / p_ini[i]);
            total += x;
            region_out[region_pos[i] as usize] += x;
        }
    }
    total
}

/// One simulated run reduced to losses against the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSummary {
    pub label: String,
    pub run_index: u32,
    /// Seed the run's inventory targets were drawn with.
    pub seed: u64,
    /// Cumulative value-added shortfall over the whole horizon.
    pub total_loss: f64,
    /// Cumulative per-region shortfall, aligned with
    /// [`SupplyNetwork::regions`].
    pub region_losses: Vec<f64>,
    /// Realized daily value added, one entry per simulated day.
    pub per_day_gdp: Vec<f64>,
}

/// Incremental loss accounting against a baseline. [`run_schedule`] drives
/// it internally; it is public for callers stepping a [`Simulator`] by hand
/// (the diagnostics stream does) so every path shares one accounting loop.
pub struct LossAccumulator<'a> {
    baseline: &'a Baseline,
    p_ini: &'a [f64],
    region_pos: Vec<u32>,
    region_day: Vec<f64>,
    total_loss: f64,
    region_losses: Vec<f64>,
    per_day_gdp: Vec<f64>,
}

impl<'a> LossAccumulator<'a> {
    pub fn new(cal: &'a CalibratedNetwork, baseline: &'a Baseline) -> Self {
        let n_regions = baseline.region_grp_per_day.len();
        Self {
            baseline,
            p_ini: cal.p_ini(),
            region_pos: firm_region_positions(cal.net()),
            region_day: vec![0.0; n_regions],
            total_loss: 0.0,
            region_losses: vec![0.0; n_regions],
            per_day_gdp: Vec::new(),
        }
    }

    /// Fold one day of realized production into the running losses.
    pub fn push_day(&mut self, p_act: &[f64]) {
        self.region_day.fill(0.0);
        let gdp = accumulate_gdp(
            &self.baseline.value_added,
            self.p_ini,
            p_act,
            &self.region_pos,
            &mut self.region_day,
        );
        debug_assert!(
            gdp <= self.baseline.gdp_per_day * (1.0 + 1e-12) + 1e-12,
            "daily output {gdp} above baseline {}",
            self.baseline.gdp_per_day
        );
        self.total_loss += self.baseline.gdp_per_day - gdp;
        for k in 0..self.region_losses.len() {
            self.region_losses[k] += self.baseline.region_grp_per_day[k] - self.region_day[k];
        }
        self.per_day_gdp.push(gdp);
    }

    /// Wrap the accumulated days into a summary.
    pub fn finish(self, label: &str, run_index: u32, seed: u64) -> LossSummary {
        LossSummary {
            label: label.to_string(),
            run_index,
            seed,
            total_loss: self.total_loss,
            region_losses: self.region_losses,
            per_day_gdp: self.per_day_gdp,
        }
    }
}

/// Simulate one schedule and reduce the run to losses. The simulation
/// horizon always comes from the schedule; the seed comes from `params`.
#[allow(clippy::too_many_arguments)]
pub fn run_schedule(
    cal: &CalibratedNetwork,
    baseline: &Baseline,
    table: &SectorTable,
    coverage: &CoverageSets,
    schedule: &LockdownSchedule,
    label: &str,
    run_index: u32,
    mut params: SimParams,
) -> Result<LossSummary, ExperimentError> {
    params.horizon_days = schedule.horizon_days;
    let attach = |source: SimError| ExperimentError::Simulation {
        label: label.to_string(),
        run: run_index,
        source,
    };
    let mut sim = Simulator::new(cal, schedule, table, coverage, params).map_err(attach)?;
    let mut acc = LossAccumulator::new(cal, baseline);
    loop {
        match sim.step() {
            Ok(Some(record)) => acc.push_day(&record.p_act),
            Ok(None) => break,
            Err(source) => return Err(attach(source)),
        }
    }
    Ok(acc.finish(label, run_index, params.seed))
}

/// Deterministic per-run seed: master seed, schedule label, and run index
/// hashed together. Adding schedules or runs never shifts the seeds of
/// existing ones, and the seed is independent of which worker executes the
/// run.
pub fn derive_seed(master_seed: u64, label: &str, run_index: u32) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(run_index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Run `runs` seeded simulations of every labeled schedule on the rayon
/// pool. Results come back schedule-major, run-minor, regardless of worker
/// count or completion order.
pub fn run_batch(
    cal: &CalibratedNetwork,
    baseline: &Baseline,
    table: &SectorTable,
    coverage: &CoverageSets,
    schedules: &[(String, LockdownSchedule)],
    base_params: SimParams,
    runs: u32,
    master_seed: u64,
) -> Result<Vec<LossSummary>, ExperimentError> {
    let jobs: Vec<(&str, &LockdownSchedule, u32)> = schedules
        .iter()
        .flat_map(|(label, schedule)| (0..runs).map(move |run| (label.as_str(), schedule, run)))
        .collect();
    jobs.par_iter()
        .map(|&(label, schedule, run)| {
            let mut params = base_params;
            params.seed = derive_seed(master_seed, label, run);
            run_schedule(cal, baseline, table, coverage, schedule, label, run, params)
        })
        .collect()
}

/// Total losses keyed by schedule label, in run order. One pass, so it
/// stays cheap on large batches.
pub fn group_total_losses(summaries: &[LossSummary]) -> BTreeMap<String, Vec<f64>> {
    let mut map: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in summaries {
        map.entry(s.label.clone()).or_default().push(s.total_loss);
    }
    map
}

/// Mean fractional regional losses for a sweep of single-region shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    /// Shocked regions, one matrix row each.
    pub rows: Vec<RegionId>,
    /// Affected regions, one column each — the network's full region list,
    /// aligned with [`LossSummary::region_losses`].
    pub cols: Vec<RegionId>,
    /// `rates[i][j]`: mean share of `cols[j]`'s output lost over a run's
    /// horizon when `rows[i]` is the region restricted.
    pub rates: Vec<Vec<f64>>,
}

/// Reduce grouped single-region summaries to a loss-rate matrix. `groups`
/// maps each shocked region to its runs; every region in `rows` must
/// appear. Each rate divides a cumulative regional loss by that region's
/// baseline output over the run's horizon (zero-output regions rate as 0).
pub fn loss_matrix(
    rows: &[RegionId],
    cols: &[RegionId],
    baseline: &Baseline,
    groups: &[(RegionId, Vec<LossSummary>)],
) -> Result<LossMatrix, ExperimentError> {
    let n = cols.len();
    if baseline.region_grp_per_day.len() != n {
        return Err(ExperimentError::Shape(format!(
            "baseline covers {} regions, matrix wants {n} columns",
            baseline.region_grp_per_day.len()
        )));
    }
    let mut rates = Vec::with_capacity(rows.len());
    for &shocked in rows {
        let summaries = groups
            .iter()
            .find(|(r, _)| *r == shocked)
            .map(|(_, s)| s.as_slice())
            .filter(|s| !s.is_empty())
            .ok_or(ExperimentError::MissingRegion(shocked))?;
        let mut row = vec![0.0; n];
        for s in summaries {
            if s.region_losses.len() != n {
                return Err(ExperimentError::Shape(format!(
                    "summary {} covers {} regions, matrix wants {n}",
                    s.label,
                    s.region_losses.len()
                )));
            }
            let horizon = s.per_day_gdp.len() as f64;
            for j in 0..n {
                let denom = baseline.region_grp_per_day[j] * horizon;
                if denom > 0.0 {
                    row[j] += s.region_losses[j] / denom;
                }
            }
        }
        let inv = 1.0 / summaries.len() as f64;
        for x in &mut row {
            *x *= inv;
        }
        rates.push(row);
    }
    Ok(LossMatrix {
        rows: rows.to_vec(),
        cols: cols.to_vec(),
        rates,
    })
}

/// Concurrent-versus-staggered outcome for one region pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairComparison {
    pub label: String,
    pub concurrent_mean: f64,
    pub async_mean: f64,
    /// Two-sided rank-sum p-value over the per-run loss samples.
    pub p_value: f64,
}

/// Compare losses when two regions restrict together against restricting
/// independently. The staggered losses are per-run sums of the two parts
/// (run `k` of one part is paired with run `k` of the other), since
/// restrictions far apart in time interact through nothing but addition.
pub fn compare_pair(
    label: &str,
    concurrent: &[f64],
    part_a: &[f64],
    part_b: &[f64],
) -> Result<PairComparison, ExperimentError> {
    if part_a.len() != part_b.len() {
        return Err(ExperimentError::MismatchedRuns {
            label: label.to_string(),
            part_a: part_a.len(),
            part_b: part_b.len(),
        });
    }
    let async_losses: Vec<f64> = part_a.iter().zip(part_b).map(|(a, b)| a + b).collect();
    let p_value = wilcoxon_rank_sum(concurrent, &async_losses)?;
    Ok(PairComparison {
        label: label.to_string(),
        concurrent_mean: mean(concurrent),
        async_mean: mean(&async_losses),
        p_value,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Write the loss-rate matrix as CSV: `region,<cols>` header, then one row
/// per shocked region.
pub fn write_loss_matrix<W: Write>(mut w: W, matrix: &LossMatrix) -> io::Result<()> {
    write!(w, "region")?;
    for r in &matrix.cols {
        write!(w, ",{r}")?;
    }
    writeln!(w)?;
    for (r, row) in matrix.rows.iter().zip(&matrix.rates) {
        write!(w, "{r}")?;
        for &x in row {
            write!(w, ",{}", sig9(x))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Write pair comparisons as CSV.
pub fn write_pair_report<W: Write>(mut w: W, comparisons: &[PairComparison]) -> io::Result<()> {
    writeln!(w, "pair,concurrent_mean,async_mean,p_value")?;
    for c in comparisons {
        writeln!(
            w,
            "{},{},{},{}",
            c.label,
            sig9(c.concurrent_mean),
            sig9(c.async_mean),
            sig9(c.p_value)
        )?;
    }
    Ok(())
}

/// Write per-run daily output as long-format CSV.
pub fn write_gdp_timeseries<W: Write>(mut w: W, summaries: &[LossSummary]) -> io::Result<()> {
    writeln!(w, "schedule,run,day,gdp")?;
    for s in summaries {
        for (day, &gdp) in s.per_day_gdp.iter().enumerate() {
            writeln!(w, "{},{},{},{}", s.label, s.run_index, day, sig9(gdp))?;
        }
    }
    Ok(())
}
