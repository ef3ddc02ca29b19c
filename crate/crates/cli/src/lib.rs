//! Command-line orchestration of the lrshield pipeline.

pub mod config;
pub mod stages;
pub mod store;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use log::warn;

pub use config::{load_config, ConfigError, Diagnostic, RunConfig, Severity};
pub use stages::{Run, Stage};

#[derive(Debug, Parser)]
#[command(name = "lrshield", version, about = "Load-redistribution attack detection workbench")]
pub struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub seed: Option<i64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Re-run stages even when their cached outputs are current.
    #[arg(long, global = true)]
    pub no_cache: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Synthesize zonal load data.
    SynthData,
    /// Read load CSVs, repair the calendar and map zones onto load buses.
    Ingest,
    /// Build the lagged feature matrix.
    Features,
    /// Train one load regressor per load and predict every hour.
    TrainPredictor,
    /// Generate random, cost-maximization and line-overflow attacks.
    GenAttacks,
    /// Run the hyperparameter sweep and train the detector.
    TrainDetector,
    /// Score the detector on held-out, graded and designed attacks.
    Evaluate,
    /// Re-dispatch on predicted loads for the designed attacks.
    Mitigate,
    /// Write the report and its tables.
    Report,
    /// Every stage in order.
    All,
    /// Check the configuration.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SynthData => "synth-data",
            Command::Ingest => "ingest",
            Command::Features => "features",
            Command::TrainPredictor => "train-predictor",
            Command::GenAttacks => "gen-attacks",
            Command::TrainDetector => "train-detector",
            Command::Evaluate => "evaluate",
            Command::Mitigate => "mitigate",
            Command::Report => "report",
            Command::All => "all",
            Command::Validate => "validate",
        }
    }

    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::SynthData => Stage::SynthData,
            Command::Ingest => Stage::Ingest,
            Command::Features => Stage::Features,
            Command::TrainPredictor => Stage::TrainPredictor,
            Command::GenAttacks => Stage::GenAttacks,
            Command::TrainDetector => Stage::TrainDetector,
            Command::Evaluate => Stage::Evaluate,
            Command::Mitigate => Stage::Mitigate,
            Command::Report => Stage::Report,
            Command::All | Command::Validate => return None,
        })
    }
}

/// Config file (or defaults) with flag overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out_dir {
        cfg.paths.out_dir = Some(o.clone());
    }
    Ok(cfg)
}

/// Diagnostics for `validate`.
pub fn validate(cli: &Cli) -> Result<Vec<Diagnostic>> {
    Ok(resolve_config(cli)?.validate())
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let diags = cfg.validate();
    for d in diags.iter().filter(|d| d.severity == Severity::Warning) {
        warn!("{d}");
    }
    if let Some(d) = diags.iter().find(|d| d.severity == Severity::Error) {
        return Err(ConfigError(d.to_string()).into());
    }
    if cli.command == Command::Validate {
        return Ok(());
    }
    let out = cfg.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut run = Run::new(cfg, out, !cli.no_cache)?;
    match cli.command.stage() {
        Some(s) => run.run_stage(s),
        None => run.run_all(),
    }
}

/// 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    if e.chain().any(|c| c.is::<ConfigError>()) {
        2
    } else {
        1
    }
}

/// Single-line JSON error document.
pub fn error_json(command: &str, e: &anyhow::Error) -> String {
    let kind = if exit_code(e) == 2 { "config" } else { "runtime" };
    let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
    serde_json::json!({ "error": chain.join(": "), "kind": kind, "command": command }).to_string()
}
