//! Command-line front end: the generate → calibrate → simulate / scenario →
//! report pipeline as subcommands over on-disk networks.
//!
//! Every run is a pure function of its declared inputs: the input files, the
//! flags, an optional JSON config file, and the resolved seed. Option
//! precedence is command line over config file over built-in default, and the
//! effective values are echoed into `summary.json` next to the results.
//! `--workers` (or the `CHAINSHOCK_WORKERS` environment variable) only picks
//! the thread count; it never changes an output byte, and for that reason it
//! is deliberately absent from the config echo.
//!
//! Exit status: 0 on success, 1 for command-line usage errors, 2 for
//! everything that fails after parsing (missing files, malformed data,
//! validation errors).

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::calibration::{
    allocate_tentative, scale_to_io, synthesize_io_table, CalibratedNetwork, CalibrationError,
    CalibrationReport, IoTable, DAYS_PER_YEAR,
};
use crate::dynamics::{SimError, SimParams, Simulator};
use crate::experiment::{
    compare_pair, group_total_losses, loss_matrix, run_batch, run_schedule, wilcoxon_rank_sum,
    write_gdp_timeseries, write_loss_matrix, write_pair_report, Baseline, ExperimentError,
    LossAccumulator, LossSummary, PairComparison,
};
use crate::network::{
    diagnostics, generate_synthetic, load_network_dir, save_network, DiagnosticsConfig,
    NetworkError, RegionId, SectorCode, SupplyNetwork, SyntheticConfig,
};
use crate::numfmt::{round_sig9, sig9};
use crate::scenarios::{
    nationwide_set, pair_region_set, single_region_set, ScenarioError, ScenarioFamily,
    ScenarioSpec,
};
use crate::shock::{CoverageLevel, CoverageSets, LockdownSchedule, SectorTable, ShockError};

/// Environment variable consulted for the default worker count.
pub const ENV_WORKERS: &str = "CHAINSHOCK_WORKERS";

/// Anything a subcommand can fail with after argument parsing.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Shock(#[from] ShockError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Msg(String),
}

fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

#[derive(Debug, Parser)]
#[command(
    name = "chainshock",
    version,
    about = "Firm-level supply-chain simulator for regionally staggered lockdowns",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Args, Default)]
struct GlobalArgs {
    /// Master random seed (config file key: seed; default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 means one per core. Precedence: this flag, then the
    /// config file, then CHAINSHOCK_WORKERS, then 0.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON config file supplying defaults for any of these options.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Allocate scarce output by the printed-form sweep instead of the scaled
    /// rule.
    #[arg(long, global = true)]
    ration_literal: bool,
    /// Consume inputs against the previous day's production.
    #[arg(long, global = true)]
    lagged_consumption: bool,
    /// Stream per-firm capacity/ceiling/demand (simulate writes
    /// diagnostics.csv).
    #[arg(long, global = true)]
    diagnostics: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic firm network plus a consistent account table.
    Generate(GenerateArgs),
    /// Scale link volumes to an account table and assign final demand.
    Calibrate(CalibrateArgs),
    /// Print structural statistics of a network.
    Diagnose(DiagnoseArgs),
    /// Simulate one restriction schedule on a calibrated network.
    Simulate(SimulateArgs),
    /// Run a scenario family and reduce it to report files.
    Scenario(ScenarioArgs),
    /// Summarize the output files of an earlier run.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Output directory (created if absent).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of firms.
    #[arg(long, default_value_t = 1_000)]
    firms: u32,
    /// Number of supplier→client links.
    #[arg(long, default_value_t = 4_000)]
    links: u32,
    /// Number of regions.
    #[arg(long, default_value_t = 10)]
    regions: u32,
    /// Sector codes to draw from (default: every code in the bundled table).
    #[arg(long, value_delimiter = ',')]
    sectors: Option<Vec<u32>>,
    /// Relative jitter on the synthesized account table, in [0, 1).
    #[arg(long, default_value_t = 0.2)]
    io_noise: f64,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Network directory (firms.csv, links.csv).
    #[arg(long, value_name = "DIR")]
    net: PathBuf,
    /// Account table CSV.
    #[arg(long, value_name = "FILE")]
    io: PathBuf,
    /// Output directory for the calibrated network.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// Network directory.
    #[arg(long, value_name = "DIR")]
    net: PathBuf,
    /// BFS sources for the path-length estimate.
    #[arg(long, default_value_t = 1_000)]
    path_samples: usize,
    /// Smallest degree included in the tail fit.
    #[arg(long, default_value_t = 5)]
    degree_xmin: u32,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Calibrated network directory.
    #[arg(long, value_name = "DIR")]
    net: PathBuf,
    /// Restriction schedule JSON.
    #[arg(long, value_name = "FILE")]
    schedule: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    table: TableArgs,
}

/// Sector-table selection shared by simulate and scenario.
#[derive(Debug, Args)]
struct TableArgs {
    /// Sector table CSV (default: the bundled table).
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
    /// Weight tying adjusted rates to worldwide rates in a custom table.
    #[arg(long, default_value_t = 0.323)]
    table_weight: f64,
    /// Coverage override JSON mapping levels to sector code lists.
    #[arg(long, value_name = "FILE")]
    coverage: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Which scenario family to run.
    #[arg(value_enum)]
    family: FamilyArg,
    /// Calibrated network directory.
    #[arg(long, value_name = "DIR")]
    net: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Regions to shock: "all", a comma list of ids, or a count N meaning
    /// ids 1..=N.
    #[arg(long, default_value = "all")]
    regions: String,
    /// Restriction durations to sweep, in weeks.
    #[arg(long, value_delimiter = ',')]
    weeks: Option<Vec<u32>>,
    /// Coverage levels to sweep (single-region family), e.g. L1,L4.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<String>>,
    /// Monte Carlo runs per schedule (nationwide: also the number of
    /// staggered-start samples).
    #[arg(long = "mc", value_name = "RUNS")]
    mc_runs: Option<u32>,
    /// Start-scatter window for nationwide samples, in months.
    #[arg(long)]
    months: Option<u32>,
    /// Days simulated past the last possible window end.
    #[arg(long)]
    tail: Option<u32>,
    #[command(flatten)]
    table: TableArgs,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory holding the output files of an earlier run.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Single,
    Pair,
    Nationwide,
}

impl From<FamilyArg> for ScenarioFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Single => ScenarioFamily::SingleRegion,
            FamilyArg::Pair => ScenarioFamily::PairRegion,
            FamilyArg::Nationwide => ScenarioFamily::Nationwide,
        }
    }
}

/// Optional JSON config file. Every key is optional; unknown keys are
/// rejected so typos fail loudly.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    seed: Option<u64>,
    workers: Option<usize>,
    ration_literal: Option<bool>,
    lagged_consumption: Option<bool>,
    diagnostics: Option<bool>,
    tau: Option<u32>,
    mean_inventory_days: Option<f64>,
    min_inventory_days: Option<u32>,
    mc_runs: Option<u32>,
    durations_weeks: Option<Vec<u32>>,
    coverage_levels: Option<Vec<String>>,
    window_months: Option<u32>,
    recovery_tail_days: Option<u32>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Msg(format!("{}: {e}", path.display())))
    }
}

/// Flags, config file, and defaults folded into effective values.
#[derive(Debug, Clone)]
struct ResolvedConfig {
    seed: u64,
    /// 0 means one thread per core.
    workers: usize,
    ration_literal: bool,
    lagged_consumption: bool,
    diagnostics: bool,
    tau: u32,
    mean_inventory_days: f64,
    min_inventory_days: u32,
}

impl ResolvedConfig {
    fn resolve(global: &GlobalArgs, file: &FileConfig) -> Result<Self, CliError> {
        let workers = match global.workers.or(file.workers) {
            Some(w) => w,
            None => match std::env::var(ENV_WORKERS) {
                Ok(raw) => raw.parse().map_err(|_| {
                    CliError::Msg(format!("{ENV_WORKERS}={raw} is not a worker count"))
                })?,
                Err(_) => 0,
            },
        };
        Ok(Self {
            seed: global.seed.or(file.seed).unwrap_or(0),
            workers,
            ration_literal: global.ration_literal || file.ration_literal.unwrap_or(false),
            lagged_consumption: global.lagged_consumption
                || file.lagged_consumption.unwrap_or(false),
            diagnostics: global.diagnostics || file.diagnostics.unwrap_or(false),
            tau: file.tau.unwrap_or(6),
            mean_inventory_days: file.mean_inventory_days.unwrap_or(10.0),
            min_inventory_days: file.min_inventory_days.unwrap_or(4),
        })
    }

    /// Simulation parameters with a placeholder horizon; every runner
    /// overrides the horizon from its schedule.
    fn sim_params(&self) -> SimParams {
        let mut p = SimParams::new(0, self.seed);
        p.tau = self.tau;
        p.mean_inventory_days = self.mean_inventory_days;
        p.min_inventory_days = self.min_inventory_days;
        p.lagged_consumption = self.lagged_consumption;
        p.ration_literal = self.ration_literal;
        p
    }

    /// The config echo written into `summary.json`. The worker count is
    /// omitted on purpose: results are worker-independent and the echo
    /// should be too.
    fn echo(&self) -> serde_json::Value {
        json!({
            "seed": self.seed,
            "ration_literal": self.ration_literal,
            "lagged_consumption": self.lagged_consumption,
            "diagnostics": self.diagnostics,
            "tau": self.tau,
            "mean_inventory_days": round_sig9(self.mean_inventory_days),
            "min_inventory_days": self.min_inventory_days,
        })
    }
}

/// Parse, dispatch, and report; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            2
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.global.config.as_deref())?;
    let resolved = ResolvedConfig::resolve(&cli.global, &file)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolved.workers)
        .build()
        .map_err(|e| CliError::Msg(format!("cannot build worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Generate(args) => generate(&args, &resolved),
        Command::Calibrate(args) => calibrate(&args),
        Command::Diagnose(args) => diagnose(&args, &resolved),
        Command::Simulate(args) => simulate(&args, &resolved),
        Command::Scenario(args) => scenario(&args, &resolved, &file),
        Command::Report(args) => report(&args),
    })
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn generate(args: &GenerateArgs, resolved: &ResolvedConfig) -> Result<(), CliError> {
    if args.firms == 0 || args.links == 0 || args.regions == 0 {
        return Err(CliError::Msg(
            "firms, links, and regions must all be positive".into(),
        ));
    }
    let sectors: Vec<SectorCode> = match &args.sectors {
        Some(list) if !list.is_empty() => list.iter().copied().map(SectorCode).collect(),
        Some(_) => return Err(CliError::Msg("sector list must not be empty".into())),
        None => SectorTable::bundled().codes().collect(),
    };
    let cfg = SyntheticConfig::new(args.firms, args.links, args.regions, &sectors, resolved.seed);
    let net = generate_synthetic(&cfg)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    save_network(&net, &args.out, false)?;
    let tentative = allocate_tentative(&net);
    let io = synthesize_io_table(&net, &tentative, args.io_noise, resolved.seed)?;
    let io_path = args.out.join("io.csv");
    io.to_csv_path(&io_path)?;
    println!(
        "generated {} firms, {} links, {} regions, {} sectors -> {}",
        net.firm_count(),
        net.link_count(),
        net.regions().len(),
        net.sectors().len(),
        args.out.display()
    );
    println!("account table -> {}", io_path.display());
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let net = load_network_dir(&args.net)?;
    let tentative = allocate_tentative(&net);
    let io = IoTable::from_csv_path(&args.io)?;
    let (cal, rep) = scale_to_io(net, &tentative, &io, DAYS_PER_YEAR)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    save_network(cal.net(), &args.out, true)?;
    println!(
        "calibrated network -> {} (baseline output {}/day)",
        args.out.display(),
        sig9(cal.p_ini().iter().sum::<f64>())
    );
    print_calibration_report(&rep);
    Ok(())
}

fn print_calibration_report(rep: &CalibrationReport) {
    if !rep.dropped_pairs.is_empty() {
        println!(
            "  dropped {} sector pairs with no carrying links ({} of annual transactions)",
            rep.dropped_pairs.len(),
            sig9(rep.dropped_transaction_mass)
        );
    }
    if !rep.equal_split_sectors.is_empty() {
        println!(
            "  split final demand equally in {} all-zero-sales sectors",
            rep.equal_split_sectors.len()
        );
    }
    if !rep.firmless_sectors.is_empty() {
        println!(
            "  dropped final demand of {} firmless sectors",
            rep.firmless_sectors.len()
        );
    }
}

fn diagnose(args: &DiagnoseArgs, resolved: &ResolvedConfig) -> Result<(), CliError> {
    let net = load_network_dir(&args.net)?;
    let cfg = DiagnosticsConfig {
        path_sample_size: args.path_samples,
        degree_xmin: args.degree_xmin,
        seed: resolved.seed,
    };
    let d = diagnostics(&net, &cfg)?;
    println!("firms: {}", net.firm_count());
    println!("links: {}", net.link_count());
    println!("gscc_share: {}", sig9(d.gscc_share));
    println!("avg_path_length: {}", sig9(d.avg_path_length));
    match d.degree_tail_exponent {
        Some(mu) => println!("degree_tail_exponent: {}", sig9(mu)),
        None => println!("degree_tail_exponent: n/a"),
    }
    Ok(())
}

/// Reject a network whose volumes and final demand were never calibrated —
/// simulating it would only ever produce zeros.
fn require_calibrated(net: &SupplyNetwork, dir: &Path) -> Result<(), CliError> {
    let volume: f64 = net.links().iter().map(|l| l.volume).sum();
    let consumption: f64 = net.final_consumption().iter().sum();
    if volume + consumption == 0.0 {
        return Err(CliError::Msg(format!(
            "network in {} carries no volumes or final demand; run `calibrate` first",
            dir.display()
        )));
    }
    Ok(())
}

fn load_table(args: &TableArgs) -> Result<(SectorTable, CoverageSets), CliError> {
    let table = match &args.table {
        Some(path) => SectorTable::from_csv_path(path, args.table_weight)?,
        None => SectorTable::bundled(),
    };
    let coverage = match &args.coverage {
        Some(path) => CoverageSets::with_overrides(&table, path)?,
        None => CoverageSets::defaults(&table),
    };
    Ok((table, coverage))
}

fn simulate(args: &SimulateArgs, resolved: &ResolvedConfig) -> Result<(), CliError> {
    let net = load_network_dir(&args.net)?;
    require_calibrated(&net, &args.net)?;
    let cal = CalibratedNetwork::new(net);
    let baseline = Baseline::compute(&cal);
    let schedule = LockdownSchedule::from_json_path(&args.schedule)?;
    let (table, coverage) = load_table(&args.table)?;
    let mut params = resolved.sim_params();
    params.diagnostics = resolved.diagnostics;

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let summary = if resolved.diagnostics {
        simulate_with_diagnostics(&cal, &baseline, &schedule, &table, &coverage, params, args)?
    } else {
        run_schedule(
            &cal, &baseline, &table, &coverage, &schedule, "simulate", 0, params,
        )?
    };

    let ts_path = args.out.join("gdp_timeseries.csv");
    let mut w = BufWriter::new(File::create(&ts_path).map_err(io_err(&ts_path))?);
    write_gdp_timeseries(&mut w, std::slice::from_ref(&summary)).map_err(io_err(&ts_path))?;
    w.flush().map_err(io_err(&ts_path))?;

    let days = summary.per_day_gdp.len();
    let horizon_output = baseline.gdp_per_day * days as f64;
    let results = json!({
        "horizon_days": days,
        "baseline_gdp_per_day": round_sig9(baseline.gdp_per_day),
        "total_loss": round_sig9(summary.total_loss),
        "loss_share_of_horizon_output": round_sig9(if horizon_output > 0.0 {
            summary.total_loss / horizon_output
        } else {
            0.0
        }),
        "region_losses": region_loss_map(&cal, &summary),
    });
    let inputs = json!({
        "net": args.net.display().to_string(),
        "schedule": args.schedule.display().to_string(),
        "table": table_input(&args.table),
        "coverage": coverage_input(&args.table),
    });
    write_summary(&args.out, "simulate", resolved.echo(), inputs, results)?;
    println!(
        "simulated {} days: total loss {} -> {}",
        days,
        sig9(summary.total_loss),
        args.out.display()
    );
    Ok(())
}

/// The diagnostics variant steps the simulator by hand so it can stream
/// per-firm capacity, ceiling, and demand while sharing the loss accounting
/// with the plain path.
fn simulate_with_diagnostics(
    cal: &CalibratedNetwork,
    baseline: &Baseline,
    schedule: &LockdownSchedule,
    table: &SectorTable,
    coverage: &CoverageSets,
    mut params: SimParams,
    args: &SimulateArgs,
) -> Result<LossSummary, CliError> {
    params.horizon_days = schedule.horizon_days;
    let mut sim = Simulator::new(cal, schedule, table, coverage, params)?;
    let mut acc = LossAccumulator::new(cal, baseline);
    let diag_path = args.out.join("diagnostics.csv");
    let mut w = BufWriter::new(File::create(&diag_path).map_err(io_err(&diag_path))?);
    writeln!(w, "day,firm,p_act,p_cap,p_max,demand").map_err(io_err(&diag_path))?;
    while let Some(rec) = sim.step()? {
        acc.push_day(&rec.p_act);
        let (p_cap, p_max, demand) = (
            rec.p_cap.as_deref().unwrap_or(&[]),
            rec.p_max.as_deref().unwrap_or(&[]),
            rec.demand.as_deref().unwrap_or(&[]),
        );
        for i in 0..rec.p_act.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                rec.day,
                i,
                sig9(rec.p_act[i]),
                sig9(p_cap[i]),
                sig9(p_max[i]),
                sig9(demand[i]),
            )
            .map_err(io_err(&diag_path))?;
        }
    }
    w.flush().map_err(io_err(&diag_path))?;
    Ok(acc.finish("simulate", 0, params.seed))
}

fn scenario(
    args: &ScenarioArgs,
    resolved: &ResolvedConfig,
    file: &FileConfig,
) -> Result<(), CliError> {
    let net = load_network_dir(&args.net)?;
    require_calibrated(&net, &args.net)?;
    let selected = parse_regions(&args.regions, net.regions())?;
    let spec = build_spec(args, resolved, file)?;
    let cal = CalibratedNetwork::new(net);
    let baseline = Baseline::compute(&cal);
    let (table, coverage) = load_table(&args.table)?;
    let params = resolved.sim_params();
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;

    let results = match args.family {
        FamilyArg::Single => scenario_single(
            args, resolved, &spec, &cal, &baseline, &table, &coverage, params, &selected,
        )?,
        FamilyArg::Pair => scenario_pair(
            args, resolved, &spec, &cal, &baseline, &table, &coverage, params, &selected,
        )?,
        FamilyArg::Nationwide => scenario_nationwide(
            args, resolved, &spec, &cal, &baseline, &table, &coverage, params, &selected,
        )?,
    };

    let mut config = resolved.echo();
    config["scenario"] = json!({
        "family": spec.family,
        "durations_weeks": spec.durations_weeks,
        "coverage_levels": spec.coverage_levels.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
        "mc_runs": spec.mc_runs,
        "window_months": spec.window_months,
        "recovery_tail_days": spec.recovery_tail_days,
    });
    let inputs = json!({
        "net": args.net.display().to_string(),
        "regions": selected.iter().map(|r| r.0).collect::<Vec<_>>(),
        "table": table_input(&args.table),
        "coverage": coverage_input(&args.table),
    });
    write_summary(&args.out, "scenario", config, inputs, results)?;
    Ok(())
}

/// Scenario spec from standard values, config file, and flags, in rising
/// precedence.
fn build_spec(
    args: &ScenarioArgs,
    resolved: &ResolvedConfig,
    file: &FileConfig,
) -> Result<ScenarioSpec, CliError> {
    let mut spec = ScenarioSpec::standard(args.family.into());
    if let Some(w) = &file.durations_weeks {
        spec.durations_weeks = w.clone();
    }
    if let Some(levels) = &file.coverage_levels {
        spec.coverage_levels = parse_levels(levels)?;
    }
    if let Some(mc) = file.mc_runs {
        spec.mc_runs = mc;
    }
    if let Some(m) = file.window_months {
        spec.window_months = m;
    }
    if let Some(t) = file.recovery_tail_days {
        spec.recovery_tail_days = t;
    }
    if let Some(w) = &args.weeks {
        spec.durations_weeks = w.clone();
    }
    if let Some(levels) = &args.levels {
        spec.coverage_levels = parse_levels(levels)?;
    }
    if let Some(mc) = args.mc_runs {
        spec.mc_runs = mc;
    }
    if let Some(m) = args.months {
        spec.window_months = m;
    }
    if let Some(t) = args.tail {
        spec.recovery_tail_days = t;
    }
    spec.seed = resolved.seed;
    spec.validate()?;
    Ok(spec)
}

fn parse_levels(raw: &[String]) -> Result<Vec<CoverageLevel>, CliError> {
    raw.iter()
        .map(|s| CoverageLevel::from_str(s).map_err(CliError::from))
        .collect()
}

/// Region selection: "all", a comma list of ids, or a bare count N meaning
/// ids 1..=N. Every id must exist in the network.
fn parse_regions(raw: &str, available: &[RegionId]) -> Result<Vec<RegionId>, CliError> {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case("all") {
        return Ok(available.to_vec());
    }
    let ids: Vec<u32> = raw
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| CliError::Msg(format!("bad region spec {part:?}")))
        })
        .collect::<Result<_, _>>()?;
    let chosen: Vec<RegionId> = if ids.len() == 1 && !raw.contains(',') {
        (1..=ids[0]).map(RegionId).collect()
    } else {
        ids.into_iter().map(RegionId).collect()
    };
    if chosen.is_empty() {
        return Err(CliError::Msg("region selection is empty".into()));
    }
    for r in &chosen {
        if !available.contains(r) {
            return Err(CliError::Msg(format!(
                "region {r} is not in the network (available: {})",
                available
                    .iter()
                    .map(|r| r.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )));
        }
    }
    Ok(chosen)
}

#[allow(clippy::too_many_arguments)]
fn scenario_single(
    args: &ScenarioArgs,
    resolved: &ResolvedConfig,
    spec: &ScenarioSpec,
    cal: &CalibratedNetwork,
    baseline: &Baseline,
    table: &SectorTable,
    coverage: &CoverageSets,
    params: SimParams,
    selected: &[RegionId],
) -> Result<serde_json::Value, CliError> {
    let schedules = single_region_set(selected, spec)?;
    let summaries = run_batch(
        cal,
        baseline,
        table,
        coverage,
        &schedules,
        params,
        spec.mc_runs,
        resolved.seed,
    )?;

    // Fold every schedule of a region (all durations and levels) into that
    // region's matrix row.
    let shocked_of: BTreeMap<&str, RegionId> = schedules
        .iter()
        .map(|(label, s)| (label.as_str(), s.windows[0].region))
        .collect();
    let mut groups: Vec<(RegionId, Vec<LossSummary>)> =
        selected.iter().map(|&r| (r, Vec::new())).collect();
    for s in summaries {
        let region = shocked_of[s.label.as_str()];
        let slot = groups
            .iter_mut()
            .find(|(r, _)| *r == region)
            .expect("every schedule targets a selected region");
        slot.1.push(s);
    }
    let matrix = loss_matrix(selected, cal.net().regions(), baseline, &groups)?;

    let path = args.out.join("loss_matrix.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    write_loss_matrix(&mut w, &matrix).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;

    let runs: usize = groups.iter().map(|(_, g)| g.len()).sum();
    println!(
        "single-region sweep: {} schedules x {} runs -> {}",
        schedules.len(),
        spec.mc_runs,
        path.display()
    );
    Ok(json!({
        "schedules": schedules.len(),
        "runs": runs,
        "loss_matrix": "loss_matrix.csv",
    }))
}

#[allow(clippy::too_many_arguments)]
fn scenario_pair(
    args: &ScenarioArgs,
    resolved: &ResolvedConfig,
    spec: &ScenarioSpec,
    cal: &CalibratedNetwork,
    baseline: &Baseline,
    table: &SectorTable,
    coverage: &CoverageSets,
    params: SimParams,
    selected: &[RegionId],
) -> Result<serde_json::Value, CliError> {
    let pairs = pair_region_set(selected, spec)?;

    // One batch covers every concurrent schedule plus each distinct
    // single-region part; parts shared between pairs are simulated once.
    // Seeds derive from labels, so a shared part gets identical runs no
    // matter which pairs reference it.
    let mut schedules: Vec<(String, LockdownSchedule)> = pairs
        .iter()
        .map(|p| (p.label.clone(), p.concurrent.clone()))
        .collect();
    let mut parts: BTreeMap<String, LockdownSchedule> = BTreeMap::new();
    for p in &pairs {
        for (label, schedule) in &p.async_parts {
            parts
                .entry(label.clone())
                .or_insert_with(|| schedule.clone());
        }
    }
    let part_count = parts.len();
    schedules.extend(parts);

    let summaries = run_batch(
        cal,
        baseline,
        table,
        coverage,
        &schedules,
        params,
        spec.mc_runs,
        resolved.seed,
    )?;
    let groups = group_total_losses(&summaries);
    let series = |label: &str| -> Result<&[f64], CliError> {
        groups
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| CliError::Msg(format!("no runs recorded for {label}")))
    };

    let mut comparisons: Vec<PairComparison> = Vec::with_capacity(pairs.len());
    for p in &pairs {
        comparisons.push(compare_pair(
            &p.label,
            series(&p.label)?,
            series(&p.async_parts[0].0)?,
            series(&p.async_parts[1].0)?,
        )?);
    }

    let path = args.out.join("pair_report.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    write_pair_report(&mut w, &comparisons).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;

    let not_worse = comparisons
        .iter()
        .filter(|c| c.async_mean >= c.concurrent_mean)
        .count();
    let share = not_worse as f64 / comparisons.len() as f64;
    println!(
        "pair sweep: {} pairs, {} shared parts, async >= concurrent in {} of {} -> {}",
        comparisons.len(),
        part_count,
        not_worse,
        comparisons.len(),
        path.display()
    );
    Ok(json!({
        "pairs": comparisons.len(),
        "shared_parts": part_count,
        "share_async_ge_concurrent": round_sig9(share),
        "pair_report": "pair_report.csv",
    }))
}

#[allow(clippy::too_many_arguments)]
fn scenario_nationwide(
    args: &ScenarioArgs,
    resolved: &ResolvedConfig,
    spec: &ScenarioSpec,
    cal: &CalibratedNetwork,
    baseline: &Baseline,
    table: &SectorTable,
    coverage: &CoverageSets,
    params: SimParams,
    selected: &[RegionId],
) -> Result<serde_json::Value, CliError> {
    let nat = nationwide_set(selected, spec)?;
    let concurrent = run_batch(
        cal,
        baseline,
        table,
        coverage,
        std::slice::from_ref(&nat.concurrent),
        params,
        spec.mc_runs,
        resolved.seed,
    )?;
    // Each staggered-start sample is its own schedule; one run each keeps
    // the sample count equal to the concurrent count.
    let staggered = run_batch(
        cal,
        baseline,
        table,
        coverage,
        &nat.async_samples,
        params,
        1,
        resolved.seed,
    )?;

    let conc: Vec<f64> = concurrent.iter().map(|s| s.total_loss).collect();
    let asy: Vec<f64> = staggered.iter().map(|s| s.total_loss).collect();
    let p_value = wilcoxon_rank_sum(&conc, &asy)?;
    let concurrent_mean = conc.iter().sum::<f64>() / conc.len() as f64;
    let async_mean = asy.iter().sum::<f64>() / asy.len() as f64;

    let path = args.out.join("gdp_timeseries.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    let mut all = concurrent;
    all.extend(staggered);
    write_gdp_timeseries(&mut w, &all).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;

    println!(
        "nationwide: concurrent mean {}, staggered mean {}, p {} -> {}",
        sig9(concurrent_mean),
        sig9(async_mean),
        sig9(p_value),
        args.out.display()
    );
    Ok(json!({
        "concurrent_runs": conc.len(),
        "async_samples": asy.len(),
        "concurrent_mean": round_sig9(concurrent_mean),
        "async_mean": round_sig9(async_mean),
        "p_value": round_sig9(p_value),
        "gdp_timeseries": "gdp_timeseries.csv",
    }))
}

fn report(args: &ReportArgs) -> Result<(), CliError> {
    let dir = &args.input;
    let mut found = false;

    let summary_path = dir.join("summary.json");
    if summary_path.exists() {
        found = true;
        let text = fs::read_to_string(&summary_path).map_err(io_err(&summary_path))?;
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Msg(format!("{}: {e}", summary_path.display())))?;
        println!("summary.json:");
        for key in ["command", "chainshock_version"] {
            if let Some(val) = v.get(key).and_then(|x| x.as_str()) {
                println!("  {key}: {val}");
            }
        }
        if let Some(results) = v.get("results").and_then(|r| r.as_object()) {
            for (k, val) in results {
                println!("  {k}: {val}");
            }
        }
    }

    let pair_path = dir.join("pair_report.csv");
    if pair_path.exists() {
        found = true;
        let mut rdr = csv::Reader::from_path(&pair_path).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CliError::Msg(format!("{}: {e}", pair_path.display())),
            _ => CliError::Msg(format!("{}: {e}", pair_path.display())),
        })?;
        let mut rows = 0usize;
        let mut not_worse = 0usize;
        let mut significant = 0usize;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CliError::Msg(format!("{}: {e}", pair_path.display())))?;
            let conc: f64 = parse_field(&rec, 1, &pair_path)?;
            let asy: f64 = parse_field(&rec, 2, &pair_path)?;
            let p: f64 = parse_field(&rec, 3, &pair_path)?;
            rows += 1;
            if asy >= conc {
                not_worse += 1;
            }
            if p < 0.05 {
                significant += 1;
            }
        }
        println!("pair_report.csv: {rows} pairs, async >= concurrent in {not_worse}, p < 0.05 in {significant}");
    }

    let matrix_path = dir.join("loss_matrix.csv");
    if matrix_path.exists() {
        found = true;
        let mut rdr = csv::Reader::from_path(&matrix_path)
            .map_err(|e| CliError::Msg(format!("{}: {e}", matrix_path.display())))?;
        let cols: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Msg(format!("{}: {e}", matrix_path.display())))?
            .iter()
            .skip(1)
            .map(str::to_string)
            .collect();
        let mut rows = 0usize;
        let mut max_spill = 0.0f64;
        let mut max_pair = (String::new(), String::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CliError::Msg(format!("{}: {e}", matrix_path.display())))?;
            let shocked = rec.get(0).unwrap_or("").to_string();
            rows += 1;
            for (j, col) in cols.iter().enumerate() {
                if *col == shocked {
                    continue;
                }
                let rate: f64 = parse_field(&rec, j + 1, &matrix_path)?;
                if rate > max_spill {
                    max_spill = rate;
                    max_pair = (shocked.clone(), col.clone());
                }
            }
        }
        println!(
            "loss_matrix.csv: {rows} shocked regions x {} affected; largest spillover {} ({} -> {})",
            cols.len(),
            sig9(max_spill),
            max_pair.0,
            max_pair.1
        );
    }

    let ts_path = dir.join("gdp_timeseries.csv");
    if ts_path.exists() {
        found = true;
        let mut rdr = csv::Reader::from_path(&ts_path)
            .map_err(|e| CliError::Msg(format!("{}: {e}", ts_path.display())))?;
        let mut rows = 0usize;
        let mut schedules: std::collections::BTreeSet<String> = Default::default();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CliError::Msg(format!("{}: {e}", ts_path.display())))?;
            schedules.insert(rec.get(0).unwrap_or("").to_string());
            rows += 1;
        }
        println!(
            "gdp_timeseries.csv: {rows} run-days across {} schedules",
            schedules.len()
        );
    }

    if !found {
        return Err(CliError::Msg(format!(
            "no report files found in {} (expected summary.json, pair_report.csv, loss_matrix.csv, or gdp_timeseries.csv)",
            dir.display()
        )));
    }
    Ok(())
}

fn parse_field(rec: &csv::StringRecord, idx: usize, path: &Path) -> Result<f64, CliError> {
    rec.get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::Msg(format!("{}: bad numeric field {idx}", path.display())))
}

// ---------------------------------------------------------------------------
// Summary file
// ---------------------------------------------------------------------------

fn table_input(args: &TableArgs) -> serde_json::Value {
    match &args.table {
        Some(p) => json!({"path": p.display().to_string(), "weight": round_sig9(args.table_weight)}),
        None => json!("bundled"),
    }
}

fn coverage_input(args: &TableArgs) -> serde_json::Value {
    match &args.coverage {
        Some(p) => json!(p.display().to_string()),
        None => json!("defaults"),
    }
}

fn region_loss_map(cal: &CalibratedNetwork, summary: &LossSummary) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (r, &loss) in cal.net().regions().iter().zip(&summary.region_losses) {
        map.insert(r.to_string(), json!(round_sig9(loss)));
    }
    serde_json::Value::Object(map)
}

/// Write `summary.json`: command, version, config echo, declared inputs, and
/// results. Keys come out sorted, floats rounded to nine significant digits,
/// so equal runs produce byte-equal files.
fn write_summary(
    out: &Path,
    command: &str,
    config: serde_json::Value,
    inputs: serde_json::Value,
    results: serde_json::Value,
) -> Result<(), CliError> {
    let summary = json!({
        "command": command,
        "chainshock_version": env!("CARGO_PKG_VERSION"),
        "format_version": 1,
        "config": config,
        "inputs": inputs,
        "results": results,
    });
    let path = out.join("summary.json");
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    serde_json::to_writer_pretty(&mut w, &sorted(summary))
        .map_err(|e| CliError::Msg(format!("{}: {e}", path.display())))?;
    writeln!(w).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    Ok(())
}

/// Recursively rebuild object keys in sorted order so serialization is
/// deterministic regardless of insertion order.
fn sorted(v: serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(map) => {
            let mut out: BTreeMap<String, serde_json::Value> = BTreeMap::new();
            for (k, val) in map {
                out.insert(k, sorted(val));
            }
            serde_json::to_value(out).expect("BTreeMap serializes")
        }
        serde_json::Value::Array(items) => {
            serde_json::Value::Array(items.into_iter().map(sorted).collect())
        }
        other => other,
    }
}
