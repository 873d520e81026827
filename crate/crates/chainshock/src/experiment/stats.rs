//! Two-sided rank-sum significance test for loss samples.
//!
//! Small pooled samples get the exact regrouping distribution; larger ones
//! use the normal approximation with tie-corrected variance and a
//! continuity correction. Monte Carlo loss samples are often tie-heavy
//! (many runs of a mild schedule lose identical amounts), so ties are
//! handled on both paths rather than broken arbitrarily.

use super::ExperimentError;

/// Pooled size up to which the regrouping distribution is enumerated
/// exactly (`C(20, 10)` splits at worst, still instant).
const EXACT_LIMIT: usize = 20;
/// Minimum sample size per side for the test to mean anything.
const MIN_SAMPLES: usize = 3;

/// Two-sided rank-sum test of whether `a` and `b` come from the same
/// distribution. Returns the p-value.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64, ExperimentError> {
    let (n, m) = (a.len(), b.len());
    if n < MIN_SAMPLES || m < MIN_SAMPLES {
        return Err(ExperimentError::TooFewSamples { left: n, right: m });
    }
    if n + m <= EXACT_LIMIT {
        Ok(exact_p(a, b))
    } else {
        Ok(approx_p(a, b))
    }
}

/// Doubled pairwise-comparison statistic of `a` against `b`: each win
/// counts 2, each tie counts 1, so the statistic stays an integer with
/// center `2 · nm / 2 = nm`.
fn doubled_wins(a: &[f64], b: &[f64]) -> i64 {
    let mut u = 0i64;
    for &x in a {
        for &y in b {
            if x > y {
                u += 2;
            } else if x == y {
                u += 1;
            }
        }
    }
    u
}

/// Exact two-sided p-value: the share of equal-sized regroupings of the
/// pooled values whose statistic sits at least as far from its center as
/// the observed one.
fn exact_p(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let pool: Vec<f64> = a.iter().chain(b).copied().collect();
    let len = pool.len();
    let center = (n * b.len()) as i64;
    let observed = (doubled_wins(a, b) - center).abs();

    let mut comb: Vec<usize> = (0..n).collect();
    let mut in_a = vec![false; len];
    let mut side_a = Vec::with_capacity(n);
    let mut side_b = Vec::with_capacity(len - n);
    let mut hits: u64 = 0;
    let mut total: u64 = 0;
    loop {
        in_a.fill(false);
        for &i in &comb {
            in_a[i] = true;
        }
        side_a.clear();
        side_b.clear();
        for i in 0..len {
            if in_a[i] {
                side_a.push(pool[i]);
            } else {
                side_b.push(pool[i]);
            }
        }
        total += 1;
        if (doubled_wins(&side_a, &side_b) - center).abs() >= observed {
            hits += 1;
        }

        // Advance to the lexicographically next index choice.
        let mut k = n;
        let advanced = loop {
            if k == 0 {
                break false;
            }
            k -= 1;
            if comb[k] != len - n + k {
                break true;
            }
        };
        if !advanced {
            return hits as f64 / total as f64;
        }
        comb[k] += 1;
        for j in k + 1..n {
            comb[j] = comb[j - 1] + 1;
        }
    }
}

/// Normal approximation on the rank sum of `a`: average ranks for ties,
/// the matching variance reduction, and a ½ continuity correction.
fn approx_p(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let m = b.len() as f64;
    let total = n + m;
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // One-based ranks i+1 ..= j share their average.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for k in i..j {
            if pooled[k].1 {
                rank_sum_a += avg_rank;
            }
        }
        let count = (j - i) as f64;
        tie_term += count * count * count - count;
        i = j;
    }

    let mean = n * (total + 1.0) / 2.0;
    let var = n * m / 12.0 * (total + 1.0 - tie_term / (total * (total - 1.0)));
    if var <= 0.0 {
        // Every pooled value identical: nothing to distinguish.
        return 1.0;
    }
    let z = ((rank_sum_a - mean).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}
