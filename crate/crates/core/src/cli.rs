//! Command-line driver. Exit status: 0 on success, 1 for usage or
//! configuration errors, 2 for runtime failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;
use tracing::info;

use crate::agent::{Backend, BackendKind, HttpBackend, MockBackend};
use crate::analysis::{self, AnalysisError, RunData};
use crate::config::RunConfig;
use crate::engine::{prepare_population, run_simulation, EngineError};
use crate::experiment::ScenarioKind;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Setup(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Usage(_) | AnalysisError::Mismatch(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Mock,
    Http,
}

#[derive(Debug, Parser)]
#[command(name = "sociopol", version, about = "Agent-based voter-mobilization simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured scenario.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Overrides the configured backend kind.
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Named seed set (from the config's `seed_sets`, or derived from the name).
    #[arg(long)]
    pub seed_set: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run directories; needs at least two including a control run.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long, default_value = "analysis")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the agent population and write population.json.
    InitPopulation(RunArgs),
    /// Run one scenario end to end.
    Run(RunArgs),
    /// Estimate treatment effects from run directories.
    Analyze(AnalyzeArgs),
    /// Write the tidy tables and metadata consumed by the plotting scripts.
    ExportFigureData(AnalyzeArgs),
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(s) = &args.scenario {
        cfg.scenario = s.parse::<ScenarioKind>().map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(b) = args.backend {
        cfg.backend.kind = match b {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Http => BackendKind::Http,
        };
    }
    if let Some(name) = &args.seed_set {
        cfg.select_seed_set(name);
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// The configured backend; the HTTP backend reads its key from the
/// environment.
pub fn make_backend(cfg: &RunConfig) -> Result<Box<dyn Backend>, CliError> {
    Ok(match cfg.backend.kind {
        BackendKind::Mock => Box::new(MockBackend::with_config(cfg.seeds.mock, cfg.mock)),
        BackendKind::Http => {
            Box::new(HttpBackend::from_env(&cfg.backend).map_err(|e| CliError::Config(e.to_string()))?)
        }
    })
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, body).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn init_population(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let backend = make_backend(&cfg)?;
    let population = prepare_population(&cfg, backend.as_ref())?;
    write_file(&args.out.join("effective_config.json"), &cfg.to_json())?;
    write_file(&args.out.join("population.json"), &population.to_json().expect("population serializes"))?;
    info!(users = population.len(), out = %args.out.display(), "population written");
    println!("{}", json!({ "users": population.len(), "eligible": population.eligible_ids().len() }));
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let backend = make_backend(&cfg)?;
    let population = prepare_population(&cfg, backend.as_ref())?;
    let summary = run_simulation(&cfg, population, backend.as_ref(), &args.out)?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn load_runs(dirs: &[PathBuf]) -> Result<Vec<RunData>, CliError> {
    if dirs.len() < 2 {
        return Err(CliError::Config(
            "analysis needs at least two run directories, including a control run".into(),
        ));
    }
    dirs.iter().map(|d| RunData::load(d).map_err(CliError::from)).collect()
}

fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let runs = load_runs(&args.runs)?;
    analysis::analyze(&runs)?.write(&args.out)?;
    println!("{}", json!({ "runs": runs.len(), "out": args.out }));
    Ok(())
}

fn export_figure_data(args: &AnalyzeArgs) -> Result<(), CliError> {
    let runs = load_runs(&args.runs)?;
    analysis::analyze(&runs)?.write(&args.out)?;
    let first = &runs[0].config;
    let mut seed_sets: Vec<&str> = runs.iter().map(RunData::seed_set).collect();
    seed_sets.sort_unstable();
    seed_sets.dedup();
    let mut scenarios: Vec<&str> = runs.iter().map(|r| r.scenario().as_str()).collect();
    scenarios.sort_unstable();
    scenarios.dedup();
    let meta = json!({
        "tables": analysis::TABLE_NAMES,
        "phase_transitions": first.scenario().phase_transitions(),
        "warmup_rounds": first.warmup_rounds,
        "treatment_periods": first.treatment_periods,
        "seed_sets": seed_sets,
        "scenarios": scenarios,
    });
    write_file(&args.out.join("figure_meta.json"), &serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
    println!("{}", json!({ "runs": runs.len(), "out": args.out }));
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::InitPopulation(a) => init_population(a),
        Command::Run(a) => run(a),
        Command::Analyze(a) => analyze(a),
        Command::ExportFigureData(a) => export_figure_data(a),
    }
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
