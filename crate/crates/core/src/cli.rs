//! Command-line front end: `run`, `plot` and `suite`.
//!
//! Exit status 1 covers configuration, usage, CSV and I/O errors; 2 means a
//! policy failed while the experiment was running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::config::{AlgorithmFile, ConfigError, ConfigFile, EnvironmentFile};
use crate::environments::CostSchedule;
use crate::harness::{run_experiment, ExperimentOutput, HarnessError, DEFAULT_CHECKPOINTS};
use crate::plot::{render_svg, Metric};
use crate::trace_csv::{aggregate_csv, read_aggregate_csv, runs_csv, CsvError};

pub const THREADS_ENV: &str = "BANDIT_SWITCH_THREADS";

pub const SUITE_HORIZON: u64 = 100_000;
pub const SUITE_REPS: usize = 10;
pub const SUITE_SEED: u64 = 2021;
pub const SUITE_ARMS: usize = 8;

const ALL_ALGORITHMS: [&str; 6] = [
    "tsallis_switch",
    "tsallis_inf",
    "exp3",
    "exp3_blocks",
    "base_arith",
    "base_geom",
];

#[derive(Debug, Parser)]
#[command(
    name = "bandit-switch",
    version,
    about = "Bandits with switching costs: experiments and plots"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment from a JSON config.
    Run(RunArgs),
    /// Render an aggregate CSV as SVG.
    Plot(PlotArgs),
    /// Run every bundled experiment and plot it.
    Suite(SuiteArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `reps`.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Worker cap; falls back to BANDIT_SWITCH_THREADS.
    #[arg(long)]
    pub parallel: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// regret, switches, regret_with_cost, or all (three panels).
    #[arg(long, default_value = "all")]
    pub metric: String,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = SUITE_HORIZON)]
    pub horizon: u64,
    #[arg(long, default_value_t = SUITE_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = SUITE_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub parallel: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Harness(HarnessError::Run { .. })
            | CliError::Harness(HarnessError::ThreadPool(_)) => 2,
            _ => 1,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_error(path))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(io_error(path))
}

/// `--parallel` if given, else the environment variable, else the global pool.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return match n {
            0 => Err(CliError::Usage("--parallel must be at least 1".into())),
            n => Ok(Some(n)),
        };
    }
    match std::env::var(THREADS_ENV) {
        Ok(text) => match text.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{text}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

pub fn parse_metrics(text: &str) -> Result<Vec<Metric>, CliError> {
    if text == "all" {
        return Ok(Metric::ALL.to_vec());
    }
    text.parse::<Metric>()
        .map(|m| vec![m])
        .map_err(CliError::Usage)
}

/// Writes `<out>/<name>.csv` and `<out>/<name>.agg.csv`; returns the aggregate text.
pub fn write_output(out: &Path, output: &ExperimentOutput) -> Result<String, CliError> {
    create_dir(out)?;
    write_file(&out.join(format!("{}.csv", output.name)), &runs_csv(output))?;
    let aggregate = aggregate_csv(&output.name, &output.aggregates);
    write_file(&out.join(format!("{}.agg.csv", output.name)), &aggregate)?;
    Ok(aggregate)
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut file = ConfigFile::load(&args.config)?;
    if let Some(seed) = args.seed {
        file.master_seed = seed;
    }
    if let Some(reps) = args.reps {
        file.reps = reps;
    }
    let config = file.to_experiment()?;
    let threads = resolve_threads(args.parallel)?;
    let output = run_experiment(&config, threads)?;
    write_output(&args.out, &output)?;
    Ok(())
}

pub fn cmd_plot(args: &PlotArgs) -> Result<(), CliError> {
    let metrics = parse_metrics(&args.metric)?;
    let file = read_aggregate_csv(&args.input)?;
    let svg = render_svg(&file.experiment, &file.traces, &metrics);
    write_file(&args.out, &svg)
}

/// One suite output: several configs whose traces share a CSV and a plot.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub name: String,
    pub parts: Vec<ConfigFile>,
}

fn params(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn config(
    name: &str,
    horizon: u64,
    reps: usize,
    seed: u64,
    algorithms: Vec<AlgorithmFile>,
    environment: EnvironmentFile,
    cost: CostSchedule,
) -> ConfigFile {
    ConfigFile {
        experiment: name.to_string(),
        arms: SUITE_ARMS,
        horizon,
        reps,
        master_seed: seed,
        checkpoints: DEFAULT_CHECKPOINTS,
        algorithms,
        environment,
        cost,
    }
}

fn environment(id: &str, pairs: &[(&str, Value)]) -> EnvironmentFile {
    EnvironmentFile {
        id: id.to_string(),
        params: params(pairs),
    }
}

fn labeled(id: &str, label: String) -> Vec<AlgorithmFile> {
    vec![AlgorithmFile {
        label: Some(label),
        ..AlgorithmFile::new(id)
    }]
}

/// The bundled experiments at K = 8.
pub fn suite_entries(horizon: u64, reps: usize, seed: u64) -> Vec<SuiteEntry> {
    let all = || {
        ALL_ALGORITHMS
            .iter()
            .map(|id| AlgorithmFile::new(id))
            .collect::<Vec<_>>()
    };
    let single = |name: &str, env: EnvironmentFile, cost: CostSchedule| SuiteEntry {
        name: name.to_string(),
        parts: vec![config(name, horizon, reps, seed, all(), env, cost)],
    };
    let fixed = |lambda: f64| CostSchedule::Fixed { lambda };
    let mut entries = vec![
        single(
            "easy",
            environment("stochastic", &[("gap", json!(0.2))]),
            fixed(0.025),
        ),
        single(
            "hard",
            environment("stochastic", &[("gap", json!(0.05))]),
            fixed(1.0),
        ),
        single(
            "zero_cost",
            environment("stochastic", &[("gap", json!(0.05))]),
            fixed(0.0),
        ),
        single(
            "constrained_easy",
            environment("constrained", &[("gap", json!(0.2))]),
            fixed(0.025),
        ),
        single(
            "constrained_hard",
            environment("constrained", &[("gap", json!(0.05))]),
            fixed(1.0),
        ),
        single("flip", environment("flip", &[]), fixed(1.0)),
    ];
    for env_id in ["stochastic", "constrained"] {
        let name = format!("multi_best_{env_id}");
        let parts = (1..SUITE_ARMS)
            .map(|m| {
                config(
                    &format!("{name}_m{m}"),
                    horizon,
                    reps,
                    seed,
                    labeled("tsallis_switch", format!("m={m}")),
                    environment(env_id, &[("gap", json!(0.2)), ("best_arms", json!(m))]),
                    fixed(1.0),
                )
            })
            .collect();
        entries.push(SuiteEntry { name, parts });
    }
    let parts = [0.5, 1.0, 1.4]
        .iter()
        .map(|&alpha| {
            config(
                &format!("power_cost_alpha{alpha}"),
                horizon,
                reps,
                seed,
                labeled("tsallis_switch", format!("alpha={alpha}")),
                environment("stochastic", &[("gap", json!(0.05))]),
                CostSchedule::Power { alpha },
            )
        })
        .collect();
    entries.push(SuiteEntry {
        name: "power_cost".into(),
        parts,
    });
    entries
}

/// Runs every part and merges their traces under the entry name.
pub fn run_entry(entry: &SuiteEntry, threads: Option<usize>) -> Result<ExperimentOutput, CliError> {
    let mut merged = ExperimentOutput {
        name: entry.name.clone(),
        runs: Vec::new(),
        aggregates: Vec::new(),
    };
    for part in &entry.parts {
        let output = run_experiment(&part.to_experiment()?, threads)?;
        merged.runs.extend(output.runs);
        merged.aggregates.extend(output.aggregates);
    }
    Ok(merged)
}

/// Runs the entries, writing CSVs, a three-panel SVG and the configs used.
pub fn run_suite(
    entries: &[SuiteEntry],
    out: &Path,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let config_dir = out.join("configs");
    create_dir(&config_dir)?;
    for entry in entries {
        for part in &entry.parts {
            let path = config_dir.join(format!("{}.json", part.experiment));
            write_file(&path, &(part.to_json() + "\n"))?;
        }
        let output = run_entry(entry, threads)?;
        write_output(out, &output)?;
        let svg = render_svg(&output.name, &sorted_aggregates(&output), &Metric::ALL);
        write_file(&out.join(format!("{}.svg", output.name)), &svg)?;
    }
    Ok(())
}

/// Aggregates as they read back from the aggregate CSV, so `plot` on the
/// written file reproduces the suite SVG exactly.
fn sorted_aggregates(output: &ExperimentOutput) -> Vec<crate::harness::AggregateTrace> {
    let mut traces: Vec<_> = output
        .aggregates
        .iter()
        .map(crate::trace_csv::quantize_aggregate)
        .collect();
    traces.sort_by(|a, b| a.algorithm.cmp(&b.algorithm));
    traces
}

pub fn cmd_suite(args: &SuiteArgs) -> Result<(), CliError> {
    let threads = resolve_threads(args.parallel)?;
    let entries = suite_entries(args.horizon, args.reps, args.seed);
    run_suite(&entries, &args.out, threads)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Suite(args) => cmd_suite(args),
    }
}

/// Parses `args`, runs the command and reports errors on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_covers_every_setup() {
        let entries = suite_entries(1000, 2, 5);
        let names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "easy",
                "hard",
                "zero_cost",
                "constrained_easy",
                "constrained_hard",
                "flip",
                "multi_best_stochastic",
                "multi_best_constrained",
                "power_cost"
            ]
        );
        assert_eq!(entries[6].parts.len(), 7);
        assert_eq!(entries[8].parts.len(), 3);
        for entry in &entries {
            for part in &entry.parts {
                let exp = part.to_experiment().unwrap();
                assert_eq!(exp.arms, 8);
                assert_eq!(exp.horizon, 1000);
                let back = ConfigFile::from_json(&part.to_json()).unwrap();
                assert_eq!(&back, part);
            }
        }
    }

    #[test]
    fn metrics_and_exit_codes() {
        assert_eq!(parse_metrics("all").unwrap().len(), 3);
        assert!(parse_metrics("loss").is_err());
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(
            CliError::Harness(HarnessError::InvalidConfig("x".into())).exit_code(),
            1
        );
        let failure = HarnessError::Run {
            algorithm: "exp3".into(),
            master_seed: 1,
            repetition: 0,
            round: 9,
            source: crate::algorithms::PolicyError::InvalidParameter("x".into()),
        };
        assert_eq!(CliError::Harness(failure).exit_code(), 2);
    }

    #[test]
    fn parallel_flag_wins() {
        assert_eq!(resolve_threads(Some(3)).unwrap(), Some(3));
        assert!(resolve_threads(Some(0)).is_err());
    }
}
