//! Acceptance suite: ten numbered end-to-end checks with pinned tolerances,
//! one printed pass/fail line each.
//!
//! Everything runs inside a single sequential test so fixtures are shared
//! and the memory/runtime checks see a predictable process. Run
//! `cargo test --test acceptance -- --nocapture` to watch the lines go by.

use std::fmt::Write as _;
use std::process::Command;
use std::time::{Duration, Instant};

use chainshock::calibration::{
    allocate_tentative, scale_to_io, synthesize_io_table, DAYS_PER_YEAR,
};
use chainshock::experiment::{compare_pair, group_total_losses, run_batch, wilcoxon_rank_sum, Baseline};
use chainshock::network::{diagnostics, generate_synthetic, save_network, DiagnosticsConfig, SyntheticConfig};
use chainshock::scenarios::{nationwide_set, pair_region_set, single_region_set, ScenarioFamily, ScenarioSpec};
use chainshock::shock::RestrictionWindow;
use chainshock::{
    ration, CalibratedNetwork, CoverageLevel, CoverageSets, LockdownSchedule, RegionId,
    SectorTable, SimParams, Simulator,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ten-region Monte Carlo fixture shared by most criteria.
const FIXTURE_SEED: u64 = 4242;

fn build_fixture(firms: u32, links: u32, regions: u32, seed: u64) -> CalibratedNetwork {
    let table = SectorTable::bundled();
    let sectors: Vec<_> = table.codes().collect();
    let net = generate_synthetic(&SyntheticConfig::new(firms, links, regions, &sectors, seed))
        .expect("synthetic network");
    let tentative = allocate_tentative(&net);
    let io = synthesize_io_table(&net, &tentative, 0.2, seed).expect("account table");
    let (cal, _) = scale_to_io(net, &tentative, &io, DAYS_PER_YEAR).expect("calibration");
    cal
}

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("worker pool")
        .install(job)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn acceptance() {
    let table = SectorTable::bundled();
    let coverage = CoverageSets::defaults(&table);
    let fixture = build_fixture(10_000, 40_000, 10, FIXTURE_SEED);
    let baseline = Baseline::compute(&fixture);

    let mut failures: Vec<String> = Vec::new();
    let mut report = |n: u32, name: &str, outcome: Result<String, String>| match outcome {
        Ok(detail) => println!("criterion {n:02} {name}: PASS  {detail}"),
        Err(detail) => {
            println!("criterion {n:02} {name}: FAIL  {detail}");
            failures.push(format!("criterion {n:02} {name}: {detail}"));
        }
    };

    report(1, "zero-shock fixed point", zero_shock(&fixture, &table, &coverage));
    report(2, "rationing vs bisection oracle", rationing_oracle());
    report(3, "sector table identities", table_identities(&table));
    report(4, "worked reduction example", worked_example());
    report(5, "calibration consistency", calibration_consistency());
    report(6, "pair coordination ordering", pair_ordering(&fixture, &baseline, &table, &coverage));
    report(7, "nationwide ordering", nationwide_ordering(&fixture, &baseline, &table, &coverage));
    report(8, "post-restriction recovery", recovery(&fixture, &baseline, &table, &coverage));
    report(9, "worker-count determinism", worker_determinism(&fixture));
    report(10, "scale and memory budget", scale_budget(&table, &coverage));

    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}

/// 1. Unshocked 10,000-firm run over 120 days: realized production must stay
/// within 1e-9 relative of baseline every day; under 10 s on one worker.
fn zero_shock(
    fixture: &CalibratedNetwork,
    table: &SectorTable,
    coverage: &CoverageSets,
) -> Result<String, String> {
    let started = Instant::now();
    let schedule = LockdownSchedule::unshocked(120);
    let mut sim = Simulator::new(fixture, &schedule, table, coverage, SimParams::new(120, 1))
        .map_err(|e| e.to_string())?;
    let p_ini = fixture.p_ini();
    let mut worst = 0.0f64;
    while let Some(rec) = sim.step().map_err(|e| e.to_string())? {
        for (i, &p) in rec.p_act.iter().enumerate() {
            if p_ini[i] > 0.0 {
                worst = worst.max((p - p_ini[i]).abs() / p_ini[i]);
            }
        }
    }
    let elapsed = secs(started.elapsed());
    if worst <= 1e-9 && elapsed < 10.0 {
        Ok(format!("max rel deviation {worst:.2e} (tol 1e-9), {elapsed:.2} s (< 10 s)"))
    } else {
        Err(format!("max rel deviation {worst:.2e} (tol 1e-9), {elapsed:.2} s (< 10 s)"))
    }
}

/// Independent oracle: bisect the common fraction λ until served supply
/// meets the budget, then read each allocation as min(order, λ·baseline).
fn bisection_oracle(r: f64, clients: &[(f64, f64)], fin: (f64, f64)) -> (Vec<f64>, f64) {
    let total: f64 = clients.iter().map(|&(o, _)| o).sum::<f64>() + fin.0;
    if r >= total {
        return (clients.iter().map(|&(o, _)| o).collect(), fin.0);
    }
    let served = |lam: f64| -> f64 {
        clients.iter().map(|&(o, b)| o.min(lam * b)).sum::<f64>() + fin.0.min(lam * fin.1)
    };
    let mut hi = 1.0f64;
    while served(hi) < r {
        hi *= 2.0;
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if served(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    (
        clients.iter().map(|&(o, b)| o.min(lam * b)).collect(),
        fin.0.min(lam * fin.1),
    )
}

/// 2. 10,000 random instances with up to 20 clients: the production
/// allocator agrees with the bisection oracle within 1e-9 per allocation,
/// and conservation Σ realized = min(r, Σ orders) holds exactly.
fn rationing_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for case in 0..10_000u32 {
        let n = rng.random_range(1..=20usize);
        let clients: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let b = rng.random_range(0.01..100.0f64);
                let o = if rng.random::<f64>() < 0.05 {
                    0.0
                } else {
                    b * rng.random_range(0.0..3.0f64)
                };
                (o, b)
            })
            .collect();
        let fb = rng.random_range(0.01..100.0f64);
        let fin = (fb * rng.random_range(0.0..3.0f64), fb);
        let order_total: f64 = clients.iter().map(|&(o, _)| o).sum::<f64>() + fin.0;
        let r = rng.random_range(0.0..(1.2 * order_total).max(1e-6));

        let (mine, mine_fin) = ration(r, &clients, fin);
        let (oracle, oracle_fin) = bisection_oracle(r, &clients, fin);
        for (a, b) in mine.iter().zip(&oracle).chain([(&mine_fin, &oracle_fin)]) {
            let diff = (a - b).abs();
            worst = worst.max(diff);
            if diff > 1e-9 {
                return Err(format!("case {case}: allocation differs from oracle by {diff:.3e} (tol 1e-9)"));
            }
        }
        let sum: f64 = mine.iter().sum::<f64>() + mine_fin;
        let expected = r.min(order_total);
        if sum != expected {
            return Err(format!(
                "case {case}: conserved {sum:.17e} but budget is {expected:.17e} (must match exactly)"
            ));
        }
    }
    Ok(format!("10,000 instances, worst oracle gap {worst:.2e} (tol 1e-9), conservation exact"))
}

/// 3. Every bundled table row satisfies both rate identities within 5e-3,
/// and the first row carries the expected adjusted rate.
fn table_identities(table: &SectorTable) -> Result<String, String> {
    let mut worst = 0.0f64;
    for e in table.entries() {
        let worldwide = e.exposure * (1.0 - e.work_at_home);
        let r1 = (e.worldwide_rate - worldwide).abs();
        let r2 = (e.adjusted_rate - 0.323 * e.worldwide_rate).abs();
        worst = worst.max(r1).max(r2);
        if r1 > 5e-3 || r2 > 5e-3 {
            return Err(format!("code {} breaks an identity: residuals {r1:.2e}/{r2:.2e} (tol 5e-3)", e.code));
        }
    }
    let first = table
        .get(chainshock::SectorCode(1))
        .ok_or_else(|| "code 1 missing from the bundled table".to_string())?;
    if first.adjusted_rate != 0.140 {
        return Err(format!("code 1 adjusted rate {} ≠ 0.140", first.adjusted_rate));
    }
    Ok(format!(
        "{} rows checked, worst residual {worst:.2e} (tol 5e-3), code 1 adjusted = 0.140",
        table.len()
    ))
}

/// 4. The worked half-exposure case: 0.5 exposure with 0.475 work-at-home
/// reduces capacity by exactly 26.25%.
fn worked_example() -> Result<String, String> {
    let rate = 0.5 * (1.0 - 0.475);
    if rate == 0.2625 {
        Ok("0.5 × (1 − 0.475) = 0.2625 exactly".to_string())
    } else {
        Err(format!("0.5 × (1 − 0.475) = {rate:.17} ≠ 0.2625"))
    }
}

/// 5. 1,000-firm, 5-sector fixture against a jittered account table:
/// post-scaling sector-pair totals match the table within 1e-6 relative and
/// the per-firm budget identity holds bit for bit.
fn calibration_consistency() -> Result<String, String> {
    let sectors: Vec<_> = [11, 26, 57, 75, 80].map(chainshock::SectorCode).to_vec();
    let net = generate_synthetic(&SyntheticConfig::new(1_000, 4_000, 5, &sectors, 5))
        .map_err(|e| e.to_string())?;
    let tentative = allocate_tentative(&net);
    let io = synthesize_io_table(&net, &tentative, 0.3, 5).map_err(|e| e.to_string())?;
    let (cal, _) = scale_to_io(net, &tentative, &io, DAYS_PER_YEAR).map_err(|e| e.to_string())?;

    // Annualized sector-pair flow totals vs the account table.
    let n = io.sectors().len();
    let mut pair_flow = vec![0.0f64; n * n];
    let net = cal.net();
    for l in net.links() {
        let s = io.sector_index(net.firms()[l.supplier.index()].sector).unwrap();
        let c = io.sector_index(net.firms()[l.client.index()].sector).unwrap();
        pair_flow[s * n + c] += l.volume * DAYS_PER_YEAR;
    }
    let mut worst = 0.0f64;
    for s in 0..n {
        for c in 0..n {
            let target = io.transaction(io.sectors()[s], io.sectors()[c]).unwrap();
            let got = pair_flow[s * n + c];
            if target > 0.0 {
                let rel = (got - target).abs() / target;
                worst = worst.max(rel);
                if rel > 1e-6 {
                    return Err(format!(
                        "pair {}→{} off by {rel:.3e} relative (tol 1e-6)",
                        io.sectors()[s],
                        io.sectors()[c]
                    ));
                }
            } else if got != 0.0 {
                return Err(format!(
                    "pair {}→{} carries {got} despite a zero account entry",
                    io.sectors()[s],
                    io.sectors()[c]
                ));
            }
        }
    }

    // Per-firm identity: baseline production = out-flows + final demand,
    // recomputed in the canonical order, must match exactly.
    for f in net.firms() {
        let out: f64 = net.out_links(f.id).iter().map(|l| l.volume).sum::<f64>()
            + net.final_consumption()[f.id.index()];
        if out != cal.p_ini()[f.id.index()] {
            return Err(format!("firm {} breaks the budget identity", f.id.index()));
        }
    }
    Ok(format!("worst pair deviation {worst:.2e} relative (tol 1e-6), budget identity exact for all firms"))
}

/// 6. All 45 region pairs, four-week full-coverage windows, 30 Monte Carlo
/// runs each: summed asynchronous losses are at least the concurrent losses
/// for ≥ 90% of pairs, inside 10 minutes on 8 workers.
fn pair_ordering(
    fixture: &CalibratedNetwork,
    baseline: &Baseline,
    table: &SectorTable,
    coverage: &CoverageSets,
) -> Result<String, String> {
    let d = diagnostics(fixture.net(), &DiagnosticsConfig::default()).map_err(|e| e.to_string())?;
    if d.gscc_share < 0.5 {
        return Err(format!("fixture is not well connected (gscc share {:.2})", d.gscc_share));
    }
    let started = Instant::now();
    let mut spec = ScenarioSpec::standard(ScenarioFamily::PairRegion);
    spec.durations_weeks = vec![4];
    spec.mc_runs = 30;
    let pairs = pair_region_set(fixture.net().regions(), &spec).map_err(|e| e.to_string())?;
    if pairs.len() != 45 {
        return Err(format!("expected 45 pairs, built {}", pairs.len()));
    }

    let mut schedules: Vec<(String, LockdownSchedule)> = pairs
        .iter()
        .map(|p| (p.label.clone(), p.concurrent.clone()))
        .collect();
    let mut parts = std::collections::BTreeMap::new();
    for p in &pairs {
        for (label, schedule) in &p.async_parts {
            parts.entry(label.clone()).or_insert_with(|| schedule.clone());
        }
    }
    schedules.extend(parts);

    let summaries = in_pool(8, || {
        run_batch(
            fixture,
            baseline,
            table,
            coverage,
            &schedules,
            SimParams::new(0, 0),
            spec.mc_runs,
            1,
        )
    })
    .map_err(|e| e.to_string())?;
    let groups = group_total_losses(&summaries);

    let mut favorable = 0usize;
    for p in &pairs {
        let cmp = compare_pair(
            &p.label,
            &groups[&p.label],
            &groups[&p.async_parts[0].0],
            &groups[&p.async_parts[1].0],
        )
        .map_err(|e| e.to_string())?;
        if cmp.async_mean >= cmp.concurrent_mean {
            favorable += 1;
        }
    }
    let elapsed = secs(started.elapsed());
    let share = favorable as f64 / pairs.len() as f64;
    if share >= 0.9 && elapsed < 600.0 {
        Ok(format!(
            "async ≥ concurrent in {favorable}/45 pairs (need ≥ 41), {elapsed:.0} s on 8 workers (< 600 s)"
        ))
    } else {
        Err(format!(
            "async ≥ concurrent in {favorable}/45 pairs (need ≥ 41), {elapsed:.0} s on 8 workers (< 600 s)"
        ))
    }
}

/// 7. Nationwide: 100 staggered-start samples vs 100 concurrent Monte Carlo
/// runs; the rank-sum test must separate them at p < 0.05 with the
/// concurrent mean smaller.
fn nationwide_ordering(
    fixture: &CalibratedNetwork,
    baseline: &Baseline,
    table: &SectorTable,
    coverage: &CoverageSets,
) -> Result<String, String> {
    let mut spec = ScenarioSpec::standard(ScenarioFamily::Nationwide);
    spec.mc_runs = 100;
    spec.seed = 9;
    let nat = nationwide_set(fixture.net().regions(), &spec).map_err(|e| e.to_string())?;

    let (concurrent, staggered) = in_pool(8, || {
        let c = run_batch(
            fixture,
            baseline,
            table,
            coverage,
            std::slice::from_ref(&nat.concurrent),
            SimParams::new(0, 0),
            spec.mc_runs,
            9,
        )?;
        let s = run_batch(
            fixture,
            baseline,
            table,
            coverage,
            &nat.async_samples,
            SimParams::new(0, 0),
            1,
            9,
        )?;
        Ok::<_, chainshock::experiment::ExperimentError>((c, s))
    })
    .map_err(|e| e.to_string())?;

    let conc: Vec<f64> = concurrent.iter().map(|s| s.total_loss).collect();
    let stag: Vec<f64> = staggered.iter().map(|s| s.total_loss).collect();
    let conc_mean = conc.iter().sum::<f64>() / conc.len() as f64;
    let stag_mean = stag.iter().sum::<f64>() / stag.len() as f64;
    let p = wilcoxon_rank_sum(&conc, &stag).map_err(|e| e.to_string())?;
    if p < 0.05 && conc_mean < stag_mean {
        Ok(format!(
            "p = {p:.2e} (< 0.05), concurrent mean {conc_mean:.3e} < staggered mean {stag_mean:.3e}"
        ))
    } else {
        Err(format!(
            "p = {p:.2e} (need < 0.05), concurrent mean {conc_mean:.3e}, staggered mean {stag_mean:.3e}"
        ))
    }
}

/// 8. Every single-region four-week full-coverage window: 60 days after the
/// window lifts, daily output is back within 1% of baseline.
fn recovery(
    fixture: &CalibratedNetwork,
    baseline: &Baseline,
    table: &SectorTable,
    coverage: &CoverageSets,
) -> Result<String, String> {
    let mut spec = ScenarioSpec::standard(ScenarioFamily::SingleRegion);
    spec.durations_weeks = vec![4];
    spec.coverage_levels = vec![CoverageLevel::L4];
    spec.mc_runs = 1;
    let schedules = single_region_set(fixture.net().regions(), &spec).map_err(|e| e.to_string())?;
    let summaries = run_batch(
        fixture,
        baseline,
        table,
        coverage,
        &schedules,
        SimParams::new(0, 0),
        1,
        1,
    )
    .map_err(|e| e.to_string())?;

    let mut worst_share = f64::INFINITY;
    for s in &summaries {
        // Horizon = 28 restricted days + 60 tail days; the last entry is the
        // 60th day after lifting.
        let last = *s.per_day_gdp.last().expect("non-empty run");
        let share = last / baseline.gdp_per_day;
        worst_share = worst_share.min(share);
        if share < 0.99 {
            return Err(format!(
                "{} ends at {:.2}% of baseline (need ≥ 99%)",
                s.label,
                100.0 * share
            ));
        }
    }
    Ok(format!(
        "all {} regions ≥ 99% of baseline 60 days post-lift (worst {:.3}%)",
        summaries.len(),
        100.0 * worst_share
    ))
}

/// 9. The same pipeline invocation through the installed binary produces
/// byte-identical outputs for 1, 4, and 8 workers and across repeats.
fn worker_determinism(fixture: &CalibratedNetwork) -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_chainshock");
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let net_dir = root.path().join("net");
    std::fs::create_dir_all(&net_dir).map_err(|e| e.to_string())?;
    save_network(fixture.net(), &net_dir, true).map_err(|e| e.to_string())?;

    let run = |tag: &str, workers: &str| -> Result<std::path::PathBuf, String> {
        let out = root.path().join(tag);
        let status = Command::new(bin)
            .args(["scenario", "pair", "--net"])
            .arg(&net_dir)
            .arg("--out")
            .arg(&out)
            .args(["--regions", "4", "--weeks", "2", "--mc", "4", "--seed", "11", "--workers", workers])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "binary failed with workers={workers}: {}",
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        Ok(out)
    };
    let w1 = run("w1", "1")?;
    let w4 = run("w4", "4")?;
    let w8 = run("w8", "8")?;
    let w4b = run("w4b", "4")?;

    for file in ["pair_report.csv", "summary.json"] {
        let reference = std::fs::read(w1.join(file)).map_err(|e| e.to_string())?;
        for other in [&w4, &w8, &w4b] {
            let bytes = std::fs::read(other.join(file)).map_err(|e| e.to_string())?;
            if bytes != reference {
                return Err(format!("{file} differs between worker counts ({other:?})"));
            }
        }
    }
    Ok("pair_report.csv and summary.json byte-identical for workers 1/4/8 and a repeat".to_string())
}

/// 10. Engineering budget: a 100,000-firm, 400,000-link network simulated
/// for 120 days with an active window finishes in under a minute on one
/// worker and the process peak stays under 1.5 GB.
fn scale_budget(table: &SectorTable, coverage: &CoverageSets) -> Result<String, String> {
    let fixture = build_fixture(100_000, 400_000, 10, 99);
    let baseline = Baseline::compute(&fixture);
    let schedule = LockdownSchedule::new(
        120,
        vec![RestrictionWindow {
            region: RegionId(1),
            start_day: 7,
            duration_days: 28,
            coverage: CoverageLevel::L4,
        }],
    )
    .map_err(|e| e.to_string())?;

    let started = Instant::now();
    let summary = chainshock::experiment::run_schedule(
        &fixture,
        &baseline,
        table,
        coverage,
        &schedule,
        "scale",
        0,
        SimParams::new(0, 3),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = secs(started.elapsed());

    let hwm_kb = vm_hwm_kb().ok_or_else(|| "cannot read VmHWM".to_string())?;
    let mut detail = String::new();
    let _ = write!(
        detail,
        "120 days in {elapsed:.1} s (< 60 s), peak {:.2} GB (< 1.5 GB), loss {:.3e}",
        hwm_kb as f64 / 1024.0 / 1024.0,
        summary.total_loss
    );
    if elapsed < 60.0 && hwm_kb < 1_464_844 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Peak resident set of this process in KiB, from the kernel's accounting.
fn vm_hwm_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}
