//! `battcap` — estimate smartphone battery capacity from charging telemetry.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

/// Command failures with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, flags, or missing prerequisite artifacts (exit 2).
    Config(String),
    /// Filesystem failures (exit 3).
    Io(String),
    /// Not enough usable data to estimate (exit 4).
    InsufficientData(String),
    /// The telemetry shows no constant-current phase (exit 5).
    NoCcPhase(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::InsufficientData(_) => 4,
            CliError::NoCcPhase(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Io(m)
            | CliError::InsufficientData(m)
            | CliError::NoCcPhase(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "battcap",
    version,
    about = "Battery full-charge-capacity estimation from charging telemetry",
    long_about = "Simulates CC-CV charging, estimates present battery capacity from SOC/voltage \
                  telemetry, and runs a crowdsourced pipeline that derives per-model reference \
                  curves and flags degraded devices."
)]
struct Cli {
    /// Key=value config file (default: $BATTCAP_CONFIG if set).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate deterministic synthetic charging telemetry plus a
    /// ground-truth capacity sidecar CSV.
    Simulate {
        /// Output JSONL sample file; the ground-truth table lands next to it
        /// with a .truth.csv extension.
        #[arg(long, default_value = "samples.jsonl")]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate one device's present capacity from its charging telemetry.
    Estimate {
        /// JSONL sample file holding one device's charging event(s).
        file: PathBuf,
        /// Labeled new-battery capacity, mAh.
        #[arg(long)]
        fcc_new: f64,
        /// New-battery charging C-rate for the charger used.
        #[arg(long)]
        c_new: f64,
        /// Maximum charging voltage, mV.
        #[arg(long)]
        vmax: Option<f64>,
        /// CC-end detection tolerance, mV.
        #[arg(long)]
        tol_mv: Option<f64>,
        /// Rate selection: at-cc-end or max-in-cc.
        #[arg(long)]
        strategy: Option<String>,
        /// Emit the estimate as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Crowdsourced pipeline: reference curves, device assessment, reporting.
    #[command(subcommand)]
    Crowd(CrowdCommand),
}

#[derive(Subcommand)]
enum CrowdCommand {
    /// Build one reference JSON per qualifying model, plus a rejects CSV.
    BuildReference {
        /// Fleet JSONL sample file.
        file: PathBuf,
        /// Directory for `<model>.reference.json` documents.
        #[arg(long, default_value = "references")]
        out_dir: PathBuf,
    },
    /// Assess every device against its model reference; write a CSV.
    Assess {
        /// Fleet JSONL sample file.
        file: PathBuf,
        /// Directory holding reference JSON documents.
        #[arg(long, default_value = "references")]
        refs: PathBuf,
        /// Output assessment CSV.
        #[arg(long, default_value = "assessments.csv")]
        out: PathBuf,
    },
    /// Summarize an assessment CSV per model.
    Report {
        /// Assessment CSV written by `crowd assess`.
        assessments: PathBuf,
        /// Output per-model summary CSV.
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
        /// Optional long-form quartile file for external plotting.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { out, seed } => commands::simulate::run(&config, &out, seed),
        Command::Estimate { file, fcc_new, c_new, vmax, tol_mv, strategy, json } => {
            commands::estimate::run(
                &config,
                &file,
                fcc_new,
                c_new,
                vmax,
                tol_mv,
                strategy.as_deref(),
                json,
            )
        }
        Command::Crowd(cmd) => match cmd {
            CrowdCommand::BuildReference { file, out_dir } => {
                commands::crowd::build_reference(&config, &file, &out_dir)
            }
            CrowdCommand::Assess { file, refs, out } => {
                commands::crowd::assess(&config, &file, &refs, &out)
            }
            CrowdCommand::Report { assessments, out, plot_data } => {
                commands::crowd::report(&assessments, &out, plot_data.as_deref())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
