//! Configuration, ingestion, stage orchestration and report emission for the
//! `qlb` command-line tool.

pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod plot;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::AnalysisConfig;
pub use error::{Category, CliError, Result};
pub use pipeline::{Pipeline, Stage};
pub use report::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    PlotCsv,
}

#[derive(Debug, Parser)]
#[command(name = "qlb", version, about = "Interface loss budgeting for superconducting circuits")]
pub struct Cli {
    /// Analysis configuration (TOML).
    #[arg(long, global = true, env = "QLB_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for Monte-Carlo cross-checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Fit the TLS model to each resonator's Q grid.
    TlsFit,
    /// Regress 1/Q_TLS,0 on participation per treatment.
    SprFit,
    /// Solve the interface loss ladder(s).
    Budget,
    /// Predict qubit Q and split the measured loss.
    Qubit,
    /// Fit Al2p spectra and convert to oxide thickness.
    XpsFit,
    /// Fit the oxide growth curve.
    Kinetics,
    /// Run every configured stage.
    Report,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::TlsFit => Stage::TlsFit,
            Command::SprFit => Stage::SprFit,
            Command::Budget => Stage::Budget,
            Command::Qubit => Stage::Qubit,
            Command::XpsFit => Stage::XpsFit,
            Command::Kinetics => Stage::Kinetics,
            Command::Report => return None,
        })
    }

    fn file_stem(self) -> &'static str {
        self.stage().map_or("report", Stage::name)
    }
}

/// Run a parsed command line; returns the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("no configuration given (use --config or QLB_CONFIG)".into()))?;
    let config = AnalysisConfig::load(path)?;
    let stages = match cli.command.stage() {
        Some(s) => vec![s],
        None => Pipeline::configured_stages(&config),
    };
    if stages.is_empty() {
        return Err(CliError::Config("the configuration enables no stages".into()));
    }
    let report = Pipeline::new(&config, cli.seed).run(&stages)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    match cli.format {
        Format::Json => {
            let file = cli.out.join(format!("{}.json", cli.command.file_stem()));
            report.write(&file)?;
            Ok(vec![file])
        }
        Format::PlotCsv => plot::write_plot_csv(&report, &cli.out),
    }
}
