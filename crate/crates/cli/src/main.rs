use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gridflex::config::ScenarioConfig;
use gridflex::engine::Engine;
use gridflex::portfolio::{frontier_csv, sweep_csv, FrontierOptions};
use gridflex::sector::sectors_csv;
use gridflex::{
    estimate_sector_capacities, frontier_search, hourly_sector_mw, marginal_curve, Error, SectorProfileMatrix,
};

/// Grid-scarcity simulation with demand flexibility.
///
/// Exit codes: 0 success, 1 validation failure, 2 runtime or convergence failure.
#[derive(Parser, Debug)]
#[command(name = "gridflex", version)]
struct Cli {
    /// Scenario config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and frontiers.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the config and every input file.
    Validate,
    /// Run the hourly simulation; writes report.csv and density.csv.
    Simulate,
    /// ENS over `sweep_scales` of `sweep_mechanism`; writes sweep.csv.
    Sweep,
    /// Minimal interruptible scale per rationing level; writes frontier.csv.
    Frontier,
    /// Fit sector maxima to `profiles`; writes capacities.csv and sectors.csv.
    ProfileEstimate,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Config { .. }
            | Error::Io { .. }
            | Error::Dimension(_)
            | Error::Model(_)
            | Error::InvalidArgument(_) => Failure::Validation(e.into()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Validation(anyhow::anyhow!("--jobs must be >= 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let Some(config_path) = cli.config.as_deref() else {
        return Err(Failure::Validation(anyhow::anyhow!("--config <path> is required")));
    };
    let mut cfg = ScenarioConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.engine.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if !matches!(cli.command, Command::Validate) {
        check_files(&cfg)?;
    }
    match cli.command {
        Command::Validate => validate(&cfg),
        Command::Simulate => simulate(&cfg),
        Command::Sweep => sweep(&cfg),
        Command::Frontier => frontier(&cfg),
        Command::ProfileEstimate => profile_estimate(&cfg),
    }
}

fn check_files(cfg: &ScenarioConfig) -> CmdResult {
    let missing = cfg.missing_files();
    if missing.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = missing.iter().map(|p| format!("missing file: {}", p.display())).collect();
    Err(Failure::Validation(anyhow::anyhow!(list.join("\n"))))
}

fn validate(cfg: &ScenarioConfig) -> CmdResult {
    check_files(cfg)?;
    let case = match cfg.load_case() {
        Ok(c) => c,
        Err(Error::Validation(violations)) => {
            let list: Vec<String> = violations.iter().map(|v| format!("[{}] {v}", v.code())).collect();
            return Err(Failure::Validation(anyhow::anyhow!(
                "{} violation(s)\n{}",
                violations.len(),
                list.join("\n")
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let timeline = cfg.load_timeline(&case)?;
    for r in cfg.resources_for(&cfg.portfolio) {
        r.validate()?;
    }
    if let Some(p) = &cfg.paths.profiles {
        SectorProfileMatrix::load(p)?;
    }
    emit(&format!(
        "ok: {} buses, {} branches, {} generators, {} load buses, {} hours\n",
        case.buses.len(),
        case.branches.len(),
        case.generators.len(),
        case.load_buses.len(),
        timeline.len()
    ));
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn write(dir: &Path, name: &str, text: &str) -> CmdResult {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn simulate(cfg: &ScenarioConfig) -> CmdResult {
    let case = cfg.load_case()?;
    let timeline = cfg.load_timeline(&case)?;
    let engine = Engine::new(&case, cfg.resources_for(&cfg.portfolio), cfg.engine.clone())?;
    let report = engine.run(&timeline)?;
    write(&cfg.out_dir, "report.csv", &report.report_csv())?;
    write(&cfg.out_dir, "density.csv", &report.density_csv())?;
    let [il, lr, inc] = report.mechanism_energy_mwh();
    let mut summary = String::new();
    let _ = writeln!(summary, "hours: {}", report.hours.len());
    let _ = writeln!(summary, "ENS: {} MWh", report.ens_mwh);
    let _ = writeln!(summary, "interruptible: {il} MWh");
    let _ = writeln!(summary, "rationing: {lr} MWh");
    let _ = writeln!(summary, "incentive: {inc} MWh");
    let _ = writeln!(summary, "total shedding (interruptible + forced): {} MWh", il + report.ens_mwh);
    match (&timeline.reference_shed, report.correlation_vs_reference) {
        (Some(_), Some(r)) => {
            let _ = writeln!(summary, "pearson r: {r}");
        }
        (Some(_), None) => summary.push_str("pearson r: undefined (constant series)\n"),
        (None, _) => {}
    }
    emit(&summary);
    Ok(())
}

fn sweep(cfg: &ScenarioConfig) -> CmdResult {
    let base = cfg.portfolio_base()?;
    let points = marginal_curve(
        &base,
        cfg.sweep_mechanism,
        &cfg.sweep_scales,
        cfg.portfolio,
        cfg.replications,
    )?;
    let csv = sweep_csv(cfg.sweep_mechanism, &points);
    write(&cfg.out_dir, "sweep.csv", &csv)?;
    emit(&csv);
    Ok(())
}

fn frontier(cfg: &ScenarioConfig) -> CmdResult {
    let base = cfg.portfolio_base()?;
    let points = frontier_search(
        &base,
        cfg.frontier_incentive_coverage,
        &cfg.frontier_rationing,
        FrontierOptions {
            tolerance: cfg.frontier_tolerance,
            lower: 1.0,
            upper: cfg.frontier_upper,
            replications: cfg.replications,
        },
    )?;
    let csv = frontier_csv(&points);
    write(&cfg.out_dir, "frontier.csv", &csv)?;
    emit(&csv);
    Ok(())
}

fn profile_estimate(cfg: &ScenarioConfig) -> CmdResult {
    let Some(path) = &cfg.paths.profiles else {
        return Err(Failure::Validation(anyhow::anyhow!(
            "config key `profiles`: required by profile-estimate"
        )));
    };
    let profiles = SectorProfileMatrix::load(path)?;
    let est = estimate_sector_capacities(&profiles)?;
    let c = est.capacities;
    let caps = format!("r_max,b_max,o_max,residual\n{},{},{},{}\n", c.r_max, c.b_max, c.o_max, est.residual);
    write(&cfg.out_dir, "capacities.csv", &caps)?;
    write(&cfg.out_dir, "sectors.csv", &sectors_csv(&hourly_sector_mw(&profiles, &c)))?;
    emit(&caps);
    Ok(())
}
