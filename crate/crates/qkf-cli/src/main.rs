//! `qkf` — simulate, track, score and benchmark elliptical extended objects.
//!
//! Exit codes: 0 success, 2 config error, 3 I/O error, 4 malformed input
//! line, 5 estimate/truth step misalignment.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qkf::io::{self, EstimateRecord, EvalSummary, MeasurementRecord, RunManifest};
use qkf::sim::{self, Execution, ScenarioConfig};
use qkf::{ConfigError, Diagnostics, EllipseParams, ErrorRecord, FilterKind};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "qkf", version, about = "Decoupled quadratic Kalman filter for elliptical extended objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one run of ground truth and measurements as JSON Lines.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Monte-Carlo run index; run r is drawn with seed ⊕ r.
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a filter over a measurement file and write per-step estimates.
    Track {
        /// Measurement JSON Lines, as written by `simulate`.
        measurements: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "sequential")]
        filter: FilterKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score estimates against the truth in a measurement file.
    Eval {
        estimates: PathBuf,
        truth: PathBuf,
        /// Error CSV; the summary goes to `<out>.summary.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded Monte-Carlo campaign.
    Mc {
        /// Builtin scenario name or path to a config file.
        scenario_pos: Option<String>,
        /// sequential or batch.
        filter_pos: Option<FilterKind>,
        /// Number of runs.
        runs_pos: Option<usize>,
        /// Campaign seed.
        seed_pos: Option<u64>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Re-run the campaign recorded in a manifest.
        #[arg(long, conflicts_with_all = ["scenario", "config", "scenario_pos"])]
        manifest: Option<PathBuf>,
        /// sequential or batch [default: sequential].
        #[arg(long)]
        filter: Option<FilterKind>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Run sequentially on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Print a builtin scenario as a config file.
    ShowScenario { name: String },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Builtin scenario: moderate, noisy, sparse or stationary.
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario config JSON.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Line { path: PathBuf, source: qkf::error::LineError },
    #[error("{0}")]
    Misaligned(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Line { .. } => 4,
            CliError::Misaligned(_) => 5,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { scenario, seed, run, out } => {
            let mut cfg = resolve(&scenario, None)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            simulate(&cfg, run, &out)
        }
        Command::Track { measurements, scenario, filter, out } => {
            let cfg = resolve(&scenario, None)?;
            track(&cfg, filter, &measurements, &out)
        }
        Command::Eval { estimates, truth, out } => eval(&estimates, &truth, &out),
        Command::Mc {
            scenario_pos,
            filter_pos,
            runs_pos,
            seed_pos,
            scenario,
            manifest,
            filter,
            runs,
            seed,
            out,
            serial,
        } => {
            let (mut cfg, recorded_filter) = match manifest {
                Some(path) => {
                    let m = io::parse_manifest(&read(&path)?)?;
                    (m.scenario()?, Some(m.filter))
                }
                None => (resolve(&scenario, scenario_pos.as_deref())?, None),
            };
            if let Some(runs) = runs.or(runs_pos) {
                cfg.runs = runs;
            }
            if let Some(seed) = seed.or(seed_pos) {
                cfg.seed = seed;
            }
            let kind = filter.or(filter_pos).or(recorded_filter).unwrap_or(FilterKind::Sequential);
            let execution = if serial { Execution::Serial } else { Execution::Parallel };
            monte_carlo(&cfg, kind, execution, &out)
        }
        Command::ShowScenario { name } => {
            print!("{}", io::scenario_to_json(&sim::builtin_scenario(&name)?));
            Ok(())
        }
    }
}

/// A builtin name, or a path to a config file.
fn resolve(args: &ScenarioArgs, positional: Option<&str>) -> Result<ScenarioConfig, CliError> {
    if let Some(path) = &args.config {
        return Ok(io::parse_scenario(&read(path)?)?);
    }
    let name = args.scenario.as_deref().or(positional).ok_or_else(|| {
        ConfigError::Invalid("a scenario is required (--scenario NAME or --config PATH)".into())
    })?;
    match sim::builtin_scenario(name) {
        Ok(cfg) => Ok(cfg),
        Err(_) if Path::new(name).is_file() => Ok(io::parse_scenario(&read(Path::new(name))?)?),
        Err(e) => Err(e.into()),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Write via a temporary sibling and rename, so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |source| CliError::Io { path: path.into(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

fn lines(records: impl Iterator<Item = String>) -> String {
    records
        .map(|mut l| {
            l.push('\n');
            l
        })
        .collect()
}

fn simulate(cfg: &ScenarioConfig, run: usize, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let data = sim::simulate_run(cfg, run);
    let text = lines(data.truth.iter().zip(data.measurements).enumerate().map(|(i, (truth, z))| {
        io::measurement_line(&MeasurementRecord { t: i + 1, truth: Some(*truth), measurements: z })
    }));
    write_atomic(out, &text)
}

fn track(cfg: &ScenarioConfig, kind: FilterKind, input: &Path, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let records = io::parse_measurement_lines(&read(input)?)
        .map_err(|source| CliError::Line { path: input.into(), source })?;
    let filter_cfg = cfg.filter_config();
    let mut diag = Diagnostics::default();
    let mut est = cfg.prior;
    let text = lines(records.iter().map(|rec| {
        est = kind.step(&est, &rec.measurements, &cfg.motion, &filter_cfg, &mut diag);
        io::estimate_line(&EstimateRecord { t: rec.t, estimate: est })
    }));
    if diag.total_skipped() > 0 {
        eprintln!("warning: skipped updates: {diag:?}");
    }
    write_atomic(out, &text)
}

fn eval(estimates: &Path, truth: &Path, out: &Path) -> Result<(), CliError> {
    let est = io::parse_estimate_lines(&read(estimates)?)
        .map_err(|source| CliError::Line { path: estimates.into(), source })?;
    let truth_records = io::parse_measurement_lines(&read(truth)?)
        .map_err(|source| CliError::Line { path: truth.into(), source })?;
    if est.len() != truth_records.len() {
        return Err(CliError::Misaligned(format!(
            "{} estimate lines but {} truth lines",
            est.len(),
            truth_records.len()
        )));
    }
    let mut rows = Vec::with_capacity(est.len());
    for (k, (e, t)) in est.iter().zip(&truth_records).enumerate() {
        if e.t != t.t {
            return Err(CliError::Misaligned(format!(
                "record {}: estimate step {} does not match truth step {}",
                k + 1,
                e.t,
                t.t
            )));
        }
        let g = t.truth.ok_or_else(|| CliError::Line {
            path: truth.into(),
            source: qkf::error::LineError { line: k + 1, message: "missing `truth`".into() },
        })?;
        let truth_ellipse = EllipseParams::new(g.center, g.theta, g.axes);
        rows.push((e.t, ErrorRecord::between(&EllipseParams::from(&e.estimate), &truth_ellipse)));
    }
    let errors: Vec<ErrorRecord> = rows.iter().map(|r| r.1).collect();
    write_atomic(out, &io::errors_csv(rows))?;
    write_atomic(&with_suffix(out, ".summary.json"), &EvalSummary::from_errors(&errors).to_json())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

fn monte_carlo(cfg: &ScenarioConfig, kind: FilterKind, execution: Execution, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let campaign = sim::run_scenario(cfg, kind, execution)?;
    let wall = start.elapsed().as_secs_f64();
    let summary = &campaign.summary;
    let files = [
        ("per_step.csv", io::per_step_csv(summary)),
        ("summary.json", io::summary_json(summary)),
        ("runtime.json", io::runtime_json(summary, wall)),
    ];
    for (name, contents) in &files {
        write_atomic(&out.join(name), contents)?;
    }
    let outputs = files.iter().map(|(n, _)| n.to_string()).collect();
    let manifest = RunManifest::new(cfg, kind, env!("CARGO_PKG_VERSION"), outputs, wall);
    write_atomic(&out.join("manifest.json"), &manifest.to_json())?;
    println!(
        "{} {}: {} runs, mean GWD² {:.4} m², mean orientation error {:.4} rad, {:.3e} s/step",
        summary.scenario,
        kind.as_str(),
        summary.runs,
        summary.overall_mean_gwd_sq,
        summary.overall_mean_orient_err,
        summary.mean_step_runtime
    );
    Ok(())
}
