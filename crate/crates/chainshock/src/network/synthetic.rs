//! Seeded random network generation.
//!
//! Real inter-firm transaction data is proprietary, so experiments run on
//! synthetic stand-ins that reproduce the structural features that matter for
//! shock propagation: heavy-tailed degrees (configuration-model wiring of a
//! discrete power-law out-degree sequence), log-normal firm sizes, and
//! configurable sector/region composition. Generation is fully deterministic
//! under the config seed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::LogNormal;

use super::{Firm, FirmId, NetworkError, RegionId, SectorCode, SupplyLink, SupplyNetwork};

/// Knobs for [`generate_synthetic`]. Weights must each sum to 1.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub firm_count: u32,
    pub link_count: u32,
    /// Region assignment probabilities.
    pub region_weights: Vec<(RegionId, f64)>,
    /// Sector assignment probabilities.
    pub sector_weights: Vec<(SectorCode, f64)>,
    /// Exponent of the out-degree distribution P(k) ∝ k^-γ.
    pub degree_exponent: f64,
    /// Mean of ln(sales).
    pub sales_ln_mean: f64,
    /// Standard deviation of ln(sales).
    pub sales_ln_sigma: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Convenience constructor: regions 1..=`region_count` and the given
    /// sectors, both uniformly weighted, with default shape parameters.
    pub fn new(
        firm_count: u32,
        link_count: u32,
        region_count: u32,
        sectors: &[SectorCode],
        seed: u64,
    ) -> Self {
        let rw = 1.0 / region_count.max(1) as f64;
        let sw = 1.0 / sectors.len().max(1) as f64;
        Self {
            firm_count,
            link_count,
            region_weights: (1..=region_count).map(|r| (RegionId(r), rw)).collect(),
            sector_weights: sectors.iter().map(|&s| (s, sw)).collect(),
            degree_exponent: 2.4,
            sales_ln_mean: 10.0,
            sales_ln_sigma: 1.0,
            seed,
        }
    }
}

fn check_weights(kind: &str, weights: &[f64]) -> Result<(), NetworkError> {
    if weights.is_empty() {
        return Err(NetworkError::BadConfig(format!("no {kind} weights given")));
    }
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(NetworkError::BadConfig(format!(
            "{kind} weights must be finite and >= 0"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(NetworkError::BadConfig(format!(
            "{kind} weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Draw an out-degree sequence summing to exactly `target` links.
///
/// Degrees start as i.i.d. draws from the truncated power law on
/// 1..=`max_degree`, then random firms are nudged up or down until the total
/// matches. When the link budget allows it every firm keeps at least one
/// client so the graph has no trivially inert suppliers.
fn degree_sequence(
    rng: &mut ChaCha8Rng,
    n: usize,
    target: u64,
    exponent: f64,
) -> Result<Vec<u32>, NetworkError> {
    let max_degree = (n - 1) as u32;
    let mut cdf = Vec::with_capacity(max_degree as usize);
    let mut acc = 0.0;
    for k in 1..=max_degree {
        acc += (k as f64).powf(-exponent);
        cdf.push(acc);
    }
    let total = *cdf.last().expect("max_degree >= 1");

    let mut degrees = Vec::with_capacity(n);
    let mut sum: u64 = 0;
    for _ in 0..n {
        let u = rng.random::<f64>() * total;
        let k = cdf.partition_point(|&c| c < u) as u32 + 1;
        let k = k.min(max_degree);
        degrees.push(k);
        sum += u64::from(k);
    }

    let floor = if target >= n as u64 { 1 } else { 0 };
    let mut budget = 20 * (sum.abs_diff(target)) + 10 * n as u64;
    while sum != target {
        if budget == 0 {
            return Err(NetworkError::Generation(format!(
                "could not adjust degree sum {sum} to {target} links \
                 (n={n}, max degree {max_degree})"
            )));
        }
        budget -= 1;
        let j = rng.random_range(0..n);
        if sum > target && degrees[j] > floor {
            degrees[j] -= 1;
            sum -= 1;
        } else if sum < target && degrees[j] < max_degree {
            degrees[j] += 1;
            sum += 1;
        }
    }
    Ok(degrees)
}

/// Generate a random simple directed network per `cfg`. Link volumes are zero
/// until calibration fills them.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SupplyNetwork, NetworkError> {
    if cfg.firm_count < 2 {
        return Err(NetworkError::BadConfig(format!(
            "need at least 2 firms, got {}",
            cfg.firm_count
        )));
    }
    if u64::from(cfg.link_count) + 1 < u64::from(cfg.firm_count) {
        return Err(NetworkError::BadConfig(format!(
            "need at least firm_count-1 = {} links, got {}",
            cfg.firm_count - 1,
            cfg.link_count
        )));
    }
    if !(cfg.degree_exponent > 1.0) {
        return Err(NetworkError::BadConfig(format!(
            "degree exponent must exceed 1, got {}",
            cfg.degree_exponent
        )));
    }
    if !(cfg.sales_ln_sigma >= 0.0) {
        return Err(NetworkError::BadConfig(format!(
            "sales_ln_sigma must be >= 0, got {}",
            cfg.sales_ln_sigma
        )));
    }
    let region_w: Vec<f64> = cfg.region_weights.iter().map(|&(_, w)| w).collect();
    let sector_w: Vec<f64> = cfg.sector_weights.iter().map(|&(_, w)| w).collect();
    check_weights("region", &region_w)?;
    check_weights("sector", &sector_w)?;

    let n = cfg.firm_count as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let degrees = degree_sequence(&mut rng, n, u64::from(cfg.link_count), cfg.degree_exponent)?;

    // Configuration-model wiring: each supplier draws distinct clients
    // uniformly at random, rejecting self-loops and repeats. The per-stub
    // attempt bound only trips when a degree approaches the firm count.
    const MAX_ATTEMPTS: u32 = 1_000;
    let mut links = Vec::with_capacity(cfg.link_count as usize);
    let mut chosen: std::collections::HashSet<u32> = std::collections::HashSet::new();
    for (j, &degree) in degrees.iter().enumerate() {
        let j = j as u32;
        chosen.clear();
        for _ in 0..degree {
            let mut attempts = 0;
            let client = loop {
                let c = rng.random_range(0..cfg.firm_count);
                if c != j && !chosen.contains(&c) {
                    break c;
                }
                attempts += 1;
                if attempts >= MAX_ATTEMPTS {
                    return Err(NetworkError::Generation(format!(
                        "firm {j} could not place {degree} distinct clients \
                         among {} firms after {MAX_ATTEMPTS} draws per stub",
                        cfg.firm_count
                    )));
                }
            };
            chosen.insert(client);
            links.push(SupplyLink {
                supplier: FirmId(j),
                client: FirmId(client),
                volume: 0.0,
            });
        }
    }

    let sales_dist = LogNormal::new(cfg.sales_ln_mean, cfg.sales_ln_sigma)
        .map_err(|e| NetworkError::BadConfig(format!("log-normal sales: {e}")))?;
    let region_dist = WeightedIndex::new(&region_w)
        .map_err(|e| NetworkError::BadConfig(format!("region weights: {e}")))?;
    let sector_dist = WeightedIndex::new(&sector_w)
        .map_err(|e| NetworkError::BadConfig(format!("sector weights: {e}")))?;

    let mut firms = Vec::with_capacity(n);
    for i in 0..cfg.firm_count {
        let sales = sales_dist.sample(&mut rng);
        let sector = cfg.sector_weights[sector_dist.sample(&mut rng)].0;
        let region = cfg.region_weights[region_dist.sample(&mut rng)].0;
        firms.push(Firm {
            id: FirmId(i),
            sector,
            region,
            sales,
        });
    }

    SupplyNetwork::new(firms, links)
}
