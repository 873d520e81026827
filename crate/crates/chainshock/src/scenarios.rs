//! Builders for the three standard experiment designs.
//!
//! Every design produces labeled [`LockdownSchedule`]s ready for the batch
//! runner:
//!
//! - **single-region** — one restriction window per (region, coverage level,
//!   duration), starting day 0, simulated through a recovery tail;
//! - **region-pair** — for every unordered region pair, a concurrent
//!   schedule (both windows at day 0, widest coverage) next to the pair's
//!   two single-region schedules; "asynchronous" imposition is represented
//!   by running those two schedules independently and summing their losses,
//!   so the parts here are literally the single-region schedules;
//! - **nationwide** — one concurrent schedule restricting every region at
//!   day 0, against Monte Carlo samples that scatter each region's start
//!   uniformly over a multi-month window, with at least one region forced
//!   to start at day 0.
//!
//! Labels are stable and unique within a design, which downstream seed
//! derivation relies on.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::RegionId;
use crate::shock::{CoverageLevel, LockdownSchedule, RestrictionWindow};

pub const DAYS_PER_WEEK: u32 = 7;
/// Calendar-free length of a "month" when sampling staggered starts.
pub const DAYS_PER_MONTH: u32 = 30;

/// Scenario construction failures.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario needs at least one region")]
    NoRegions,
    #[error("pair scenarios need at least two regions")]
    NeedTwoRegions,
    #[error("invalid scenario spec: {0}")]
    BadSpec(String),
    #[error(
        "a {duration_days}-day restriction does not fit a {window_months}-month start window"
    )]
    WindowTooShort {
        duration_days: u32,
        window_months: u32,
    },
}

/// Which experiment design to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioFamily {
    SingleRegion,
    PairRegion,
    Nationwide,
}

/// Parameters shared by the scenario builders. Serializable, so a spec file
/// can drive the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: ScenarioFamily,
    /// Restriction durations to sweep, in weeks.
    pub durations_weeks: Vec<u32>,
    /// Coverage levels to sweep (single-region; pairs and nationwide always
    /// restrict at L4).
    pub coverage_levels: Vec<CoverageLevel>,
    /// Monte Carlo runs per schedule (and nationwide start samples).
    pub mc_runs: u32,
    /// Length of the start-scatter window for nationwide samples, months.
    pub window_months: u32,
    /// Days simulated past the last possible window end.
    pub recovery_tail_days: u32,
    /// Seed for nationwide start sampling.
    pub seed: u64,
}

impl ScenarioSpec {
    /// Standard sweep for `family`: durations 1–4 weeks, all coverage
    /// levels, 30 Monte Carlo runs (100 for nationwide), three-month
    /// scatter window, 60-day recovery tail.
    pub fn standard(family: ScenarioFamily) -> Self {
        Self {
            family,
            durations_weeks: vec![1, 2, 3, 4],
            coverage_levels: CoverageLevel::ALL.to_vec(),
            mc_runs: if family == ScenarioFamily::Nationwide {
                100
            } else {
                30
            },
            window_months: 3,
            recovery_tail_days: 60,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.mc_runs == 0 {
            return Err(ScenarioError::BadSpec("mc_runs must be at least 1".into()));
        }
        if self.durations_weeks.is_empty() {
            return Err(ScenarioError::BadSpec(
                "durations_weeks must be nonempty".into(),
            ));
        }
        if self.durations_weeks.iter().any(|&w| w == 0) {
            return Err(ScenarioError::BadSpec(
                "durations_weeks entries must be at least 1".into(),
            ));
        }
        if self.coverage_levels.is_empty() {
            return Err(ScenarioError::BadSpec(
                "coverage_levels must be nonempty".into(),
            ));
        }
        if self.window_months == 0 {
            return Err(ScenarioError::BadSpec(
                "window_months must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn single_label(region: RegionId, coverage: CoverageLevel, weeks: u32) -> String {
    format!("single-r{region}-{coverage}-w{weeks}")
}

fn single_schedule(
    region: RegionId,
    coverage: CoverageLevel,
    weeks: u32,
    tail: u32,
) -> LockdownSchedule {
    let duration = weeks * DAYS_PER_WEEK;
    LockdownSchedule::new(
        duration + tail,
        vec![RestrictionWindow {
            region,
            start_day: 0,
            duration_days: duration,
            coverage,
        }],
    )
    .expect("window fits horizon by construction")
}

/// One schedule per (region, coverage level, duration), each restricting a
/// single region from day 0.
pub fn single_region_set(
    regions: &[RegionId],
    spec: &ScenarioSpec,
) -> Result<Vec<(String, LockdownSchedule)>, ScenarioError> {
    spec.validate()?;
    if regions.is_empty() {
        return Err(ScenarioError::NoRegions);
    }
    let mut out =
        Vec::with_capacity(regions.len() * spec.coverage_levels.len() * spec.durations_weeks.len());
    for &region in regions {
        for &coverage in &spec.coverage_levels {
            for &weeks in &spec.durations_weeks {
                out.push((
                    single_label(region, coverage, weeks),
                    single_schedule(region, coverage, weeks, spec.recovery_tail_days),
                ));
            }
        }
    }
    Ok(out)
}

/// A two-region comparison: restrict both at once, or each independently.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScenario {
    pub label: String,
    /// Both regions restricted from day 0 at L4.
    pub concurrent: LockdownSchedule,
    /// The two single-region L4 schedules whose independently simulated
    /// losses, summed, represent asynchronous imposition. Their labels let
    /// a runner share one simulation of each part across every pair that
    /// uses it.
    pub async_parts: [(String, LockdownSchedule); 2],
}

/// Every unordered region pair at every requested duration, at L4 coverage.
pub fn pair_region_set(
    regions: &[RegionId],
    spec: &ScenarioSpec,
) -> Result<Vec<PairScenario>, ScenarioError> {
    spec.validate()?;
    if regions.len() < 2 {
        return Err(ScenarioError::NeedTwoRegions);
    }
    let tail = spec.recovery_tail_days;
    let mut out = Vec::new();
    for &weeks in &spec.durations_weeks {
        let duration = weeks * DAYS_PER_WEEK;
        for (i, &a) in regions.iter().enumerate() {
            for &b in &regions[i + 1..] {
                let window = |region| RestrictionWindow {
                    region,
                    start_day: 0,
                    duration_days: duration,
                    coverage: CoverageLevel::L4,
                };
                let concurrent = LockdownSchedule::new(duration + tail, vec![window(a), window(b)])
                    .expect("windows fit horizon by construction");
                out.push(PairScenario {
                    label: format!("pair-r{a}-r{b}-w{weeks}"),
                    concurrent,
                    async_parts: [
                        (
                            single_label(a, CoverageLevel::L4, weeks),
                            single_schedule(a, CoverageLevel::L4, weeks, tail),
                        ),
                        (
                            single_label(b, CoverageLevel::L4, weeks),
                            single_schedule(b, CoverageLevel::L4, weeks, tail),
                        ),
                    ],
                });
            }
        }
    }
    Ok(out)
}

/// Nationwide design: a concurrent schedule against staggered-start samples.
#[derive(Debug, Clone, PartialEq)]
pub struct NationwideScenario {
    /// All regions restricted from day 0.
    pub concurrent: (String, LockdownSchedule),
    /// One schedule per Monte Carlo sample of staggered starts.
    pub async_samples: Vec<(String, LockdownSchedule)>,
}

/// Draw one per-region start vector, uniform on `0..=support_max` per
/// region, plus the index of the region to force to day 0 when no region
/// drew it (the draws themselves are returned unrepaired so their
/// distribution stays testable).
pub fn draw_async_starts(
    region_count: usize,
    support_max: u32,
    rng: &mut impl Rng,
) -> (Vec<u32>, Option<usize>) {
    let starts: Vec<u32> = (0..region_count)
        .map(|_| rng.random_range(0..=support_max))
        .collect();
    let forced = if starts.contains(&0) {
        None
    } else {
        Some(rng.random_range(0..region_count))
    };
    (starts, forced)
}

/// Build the nationwide design: every region restricted for the longest
/// requested duration, either all from day 0 (concurrent) or with starts
/// scattered uniformly over `window_months` months (asynchronous samples,
/// at least one region always starting at day 0).
pub fn nationwide_set(
    regions: &[RegionId],
    spec: &ScenarioSpec,
) -> Result<NationwideScenario, ScenarioError> {
    spec.validate()?;
    if regions.is_empty() {
        return Err(ScenarioError::NoRegions);
    }
    let weeks = *spec
        .durations_weeks
        .iter()
        .max()
        .expect("validated nonempty");
    let duration = weeks * DAYS_PER_WEEK;
    let window_days = spec.window_months * DAYS_PER_MONTH;
    if window_days < duration {
        return Err(ScenarioError::WindowTooShort {
            duration_days: duration,
            window_months: spec.window_months,
        });
    }
    let support_max = window_days - duration;
    let horizon = window_days + spec.recovery_tail_days;

    let window = |region, start_day| RestrictionWindow {
        region,
        start_day,
        duration_days: duration,
        coverage: CoverageLevel::L4,
    };
    let concurrent = LockdownSchedule::new(
        horizon,
        regions.iter().map(|&r| window(r, 0)).collect(),
    )
    .expect("windows fit horizon by construction");

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut async_samples = Vec::with_capacity(spec.mc_runs as usize);
    for sample in 0..spec.mc_runs {
        let (mut starts, forced) = draw_async_starts(regions.len(), support_max, &mut rng);
        if let Some(i) = forced {
            starts[i] = 0;
        }
        let schedule = LockdownSchedule::new(
            horizon,
            regions
                .iter()
                .zip(&starts)
                .map(|(&r, &s)| window(r, s))
                .collect(),
        )
        .expect("windows fit horizon by construction");
        async_samples.push((format!("nationwide-async-s{sample}"), schedule));
    }
    Ok(NationwideScenario {
        concurrent: ("nationwide-concurrent".to_string(), concurrent),
        async_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn regions(n: u32) -> Vec<RegionId> {
        (1..=n).map(RegionId).collect()
    }

    #[test]
    fn single_region_sweep_covers_the_full_grid() {
        let spec = ScenarioSpec::standard(ScenarioFamily::SingleRegion);
        let set = single_region_set(&regions(47), &spec).unwrap();
        assert_eq!(set.len(), 47 * 4 * 4);
        let labels: HashSet<&str> = set.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels.len(), set.len(), "labels must be unique");
    }

    #[test]
    fn single_region_schedule_shape() {
        let mut spec = ScenarioSpec::standard(ScenarioFamily::SingleRegion);
        spec.durations_weeks = vec![2];
        spec.coverage_levels = vec![CoverageLevel::L3];
        let set = single_region_set(&regions(1), &spec).unwrap();
        assert_eq!(set.len(), 1);
        let (label, schedule) = &set[0];
        assert_eq!(label, "single-r1-L3-w2");
        assert_eq!(schedule.horizon_days, 14 + 60);
        assert_eq!(
            schedule.windows,
            vec![RestrictionWindow {
                region: RegionId(1),
                start_day: 0,
                duration_days: 14,
                coverage: CoverageLevel::L3,
            }]
        );
    }

    #[test]
    fn pair_count_matches_the_combination_formula() {
        let mut spec = ScenarioSpec::standard(ScenarioFamily::PairRegion);
        spec.durations_weeks = vec![4];
        let pairs = pair_region_set(&regions(47), &spec).unwrap();
        assert_eq!(pairs.len(), 47 * 46 / 2);
        let ten = pair_region_set(&regions(10), &spec).unwrap();
        assert_eq!(ten.len(), 45);
    }

    #[test]
    fn pair_concurrent_windows_both_start_at_day_zero() {
        let mut spec = ScenarioSpec::standard(ScenarioFamily::PairRegion);
        spec.durations_weeks = vec![4];
        let pairs = pair_region_set(&regions(3), &spec).unwrap();
        for p in &pairs {
            assert_eq!(p.concurrent.windows.len(), 2);
            for w in &p.concurrent.windows {
                assert_eq!(w.start_day, 0);
                assert_eq!(w.duration_days, 28);
                assert_eq!(w.coverage, CoverageLevel::L4);
            }
        }
        assert_eq!(pairs[0].label, "pair-r1-r2-w4");
    }

    #[test]
    fn pair_async_parts_equal_the_single_region_schedules() {
        let mut spec = ScenarioSpec::standard(ScenarioFamily::PairRegion);
        spec.durations_weeks = vec![1, 4];
        let pairs = pair_region_set(&regions(4), &spec).unwrap();

        let mut single_spec = spec.clone();
        single_spec.coverage_levels = vec![CoverageLevel::L4];
        let singles = single_region_set(&regions(4), &single_spec).unwrap();

        for p in &pairs {
            for (label, schedule) in &p.async_parts {
                let matching = singles
                    .iter()
                    .find(|(l, _)| l == label)
                    .unwrap_or_else(|| panic!("no single-region schedule labeled {label}"));
                assert_eq!(schedule, &matching.1);
            }
        }
    }

    #[test]
    fn nationwide_concurrent_restricts_every_region_from_day_zero() {
        let spec = ScenarioSpec::standard(ScenarioFamily::Nationwide);
        let scenario = nationwide_set(&regions(10), &spec).unwrap();
        let (_, concurrent) = &scenario.concurrent;
        assert_eq!(concurrent.windows.len(), 10);
        assert!(concurrent.windows.iter().all(|w| w.start_day == 0));
        assert!(concurrent.windows.iter().all(|w| w.duration_days == 28));
        assert_eq!(concurrent.horizon_days, 90 + 60);
    }

    #[test]
    fn nationwide_samples_are_counted_seeded_and_anchored() {
        let mut spec = ScenarioSpec::standard(ScenarioFamily::Nationwide);
        spec.mc_runs = 40;
        let a = nationwide_set(&regions(10), &spec).unwrap();
        let b = nationwide_set(&regions(10), &spec).unwrap();
        assert_eq!(a, b, "same seed must reproduce the same samples");
        assert_eq!(a.async_samples.len(), 40);
        for (_, schedule) in &a.async_samples {
            let min_start = schedule.windows.iter().map(|w| w.start_day).min().unwrap();
            assert_eq!(min_start, 0, "one region must start at day 0");
            let max_start = schedule.windows.iter().map(|w| w.start_day).max().unwrap();
            assert!(max_start <= 90 - 28);
        }
        // Samples genuinely differ from one another.
        assert!(a.async_samples.windows(2).any(|w| w[0].1 != w[1].1));

        spec.seed = 1;
        let c = nationwide_set(&regions(10), &spec).unwrap();
        assert_ne!(a, c, "a different seed must move the samples");
    }

    #[test]
    fn nationwide_rejects_durations_longer_than_the_window() {
        let mut spec = ScenarioSpec::standard(ScenarioFamily::Nationwide);
        spec.window_months = 1;
        spec.durations_weeks = vec![5];
        let err = nationwide_set(&regions(3), &spec).unwrap_err();
        assert!(matches!(err, ScenarioError::WindowTooShort { .. }));
    }

    #[test]
    fn repair_forces_a_zero_start_only_when_needed() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // Support of a single value: every draw is already 0.
        let (starts, forced) = draw_async_starts(5, 0, &mut rng);
        assert_eq!(starts, vec![0; 5]);
        assert_eq!(forced, None);
        // One region, wide support: any nonzero draw needs the repair.
        let mut seen_forced = false;
        for _ in 0..50 {
            let (starts, forced) = draw_async_starts(1, 1000, &mut rng);
            if starts[0] != 0 {
                assert_eq!(forced, Some(0));
                seen_forced = true;
            }
        }
        assert!(seen_forced);
    }

    #[test]
    fn unrepaired_start_draws_are_uniform() {
        // Chi-square goodness of fit against the uniform distribution on
        // 0..=62, on the raw draws before the day-0 repair. The 99th
        // percentile of the reference distribution comes from the
        // Wilson–Hilferty cube approximation.
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let support_max = 62u32;
        let bins = support_max as usize + 1;
        let mut counts = vec![0u64; bins];
        let samples = 400;
        let regions = 10;
        for _ in 0..samples {
            let (starts, _) = draw_async_starts(regions, support_max, &mut rng);
            for s in starts {
                counts[s as usize] += 1;
            }
        }
        let total = (samples * regions) as f64;
        let expected = total / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let df = (bins - 1) as f64;
        let z = 2.326_347_874_040_841;
        let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
        assert!(
            chi2 < crit,
            "chi-square {chi2:.1} exceeds the 99th percentile {crit:.1}"
        );
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ScenarioSpec::standard(ScenarioFamily::PairRegion);
        let text = serde_json::to_string(&spec).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = ScenarioSpec::standard(ScenarioFamily::SingleRegion);
        spec.mc_runs = 0;
        assert!(spec.validate().is_err());

        let mut spec = ScenarioSpec::standard(ScenarioFamily::SingleRegion);
        spec.durations_weeks = vec![0];
        assert!(spec.validate().is_err());

        assert!(single_region_set(
            &[],
            &ScenarioSpec::standard(ScenarioFamily::SingleRegion)
        )
        .is_err());
        assert!(pair_region_set(
            &regions(1),
            &ScenarioSpec::standard(ScenarioFamily::PairRegion)
        )
        .is_err());
    }
}
