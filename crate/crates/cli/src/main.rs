//! Command-line front end for the SPMD bottleneck analyzer.
//!
//! Exit codes: 0 success, 1 I/O error, 2 document parse error, 3 validation
//! error (schema, config, or spec), 4 analysis error.

use clap::{Parser, Subcommand};
use spmd_analysis::external::AnalysisError;
use spmd_analysis::profile::ProfileError;
use spmd_analysis::synth::SynthError;
use spmd_analysis::{report, synth, AnalysisConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spmd-analyze",
    about = "Locates bottlenecks in SPMD parallel programs from per-process profiles \
             and uncovers their root causes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a profile: detection, localization, and root causes.
    Analyze {
        profile: PathBuf,
        /// Cluster radius as a fraction of the seed vector length.
        #[arg(long, default_value_t = 0.10)]
        threshold_fraction: f64,
        /// A cluster needs strictly more than this many in-threshold points.
        #[arg(long, default_value_t = 2)]
        count_threshold: usize,
        /// Write the machine-readable result document to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the result document to stdout instead of the text report.
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic profile from a spec file.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the decision tables and discernibility matrices for a profile.
    Tables {
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 0.10)]
        threshold_fraction: f64,
        #[arg(long, default_value_t = 2)]
        count_threshold: usize,
        /// Render the built-in worked example instead of a profile.
        #[arg(long)]
        demo: bool,
    },
}

enum CliError {
    Io(String),
    Parse(String),
    Validation(String),
    Analysis(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Analysis(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Parse(m) | CliError::Validation(m)
            | CliError::Analysis(m) => m,
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::Parse { .. } => CliError::Parse(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Analysis(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Parse { .. } => CliError::Parse(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn config(threshold_fraction: f64, count_threshold: usize) -> Result<AnalysisConfig, CliError> {
    AnalysisConfig::new(threshold_fraction, count_threshold)
        .map_err(|e| CliError::Validation(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze {
            profile,
            threshold_fraction,
            count_threshold,
            out,
            json,
        } => {
            let config = config(threshold_fraction, count_threshold)?;
            let profile = spmd_analysis::ingest_profile(&read(&profile)?)?;
            if profile.process_count < 2 {
                eprintln!("note: single-process profile, external stage skipped");
            }
            let result = report::analyze(&profile, &config)?;
            let document = serde_json::to_string_pretty(&result)
                .map_err(|e| CliError::Analysis(e.to_string()))?;
            if let Some(path) = out {
                write(&path, document.as_bytes())?;
            }
            if json {
                println!("{document}");
            } else {
                print!("{}", report::render_text(&result));
            }
            Ok(())
        }
        Command::Synth { spec, seed, out } => {
            let spec = synth::parse_spec(&read(&spec)?)?;
            let profile = synth::generate(&spec, seed)?;
            write(&out, &synth::emit_fixture(&profile))?;
            println!(
                "wrote profile: {} processes, {} regions, seed {}",
                profile.process_count,
                profile.region_count(),
                seed
            );
            Ok(())
        }
        Command::Tables {
            profile,
            threshold_fraction,
            count_threshold,
            demo,
        } => {
            if demo {
                print!("{}", report::render_demo());
                return Ok(());
            }
            let path = profile.ok_or_else(|| {
                CliError::Validation("a profile path is required unless --demo is given".into())
            })?;
            let config = config(threshold_fraction, count_threshold)?;
            let profile = spmd_analysis::ingest_profile(&read(&path)?)?;
            print!("{}", report::render_tables(&profile, &config)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
