//! Command-line driver: validate scenario configs, run simulations, verify
//! written reports, and regenerate the canonical scenario files.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 runtime error,
//! 3 report verification failure. Diagnostics go to stderr.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use infermesh_core::simnet::config::ScenarioConfig;
use infermesh_core::simnet::report::{verify_report_dir, write_run, OutputFormat, ReportError};
use infermesh_core::simnet::{run_scenario, scenarios, SimError};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "infermesh",
    about = "Deterministic simulator for a stake-incentivized decentralized inference network",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write epoch reports, a summary, and a CSV.
    Run {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for reports (created if absent).
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Which artifacts to write.
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
        /// Overwrite existing report files.
        #[arg(long)]
        force: bool,
    },
    /// Parse and validate a scenario file without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Re-verify a written report directory: VRF tickets, election rule,
    /// reward splits, slashing conditions, and the report hash chain.
    VerifyReport {
        #[arg(long)]
        report_dir: PathBuf,
    },
    /// Write the canonical scenario files used by the acceptance suite.
    GenAcceptance {
        /// Output directory for scenario TOML files.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite existing scenario files.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
            Format::Both => OutputFormat::Both,
        }
    }
}

enum CliError {
    /// Bad input: missing files, parse failures, invalid configs. Exit 1.
    Config(String),
    /// Failures while running or writing. Exit 2.
    Runtime(String),
    /// Report verification found violations. Exit 3.
    Verification(String),
}

impl CliError {
    fn report(self) -> ExitCode {
        let (message, code) = match self {
            CliError::Config(m) => (m, 1),
            CliError::Runtime(m) => (m, 2),
            CliError::Verification(m) => (m, 3),
        };
        eprintln!("error: {message}");
        ExitCode::from(code)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::ConfigInvalid { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::WouldOverwrite(_) | ReportError::MissingSummary(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            format,
            force,
        } => cmd_run(&scenario, &out, seed, format.into(), force),
        Command::Validate { scenario } => {
            load_scenario(&scenario, None).map(|config| {
                println!(
                    "scenario {:?} is valid: {} epochs, {} models, {} workers, {} validators",
                    config.name,
                    config.epochs,
                    config.models.len(),
                    config.workers.len(),
                    config.validators.len()
                );
            })
        }
        Command::VerifyReport { report_dir } => cmd_verify_report(&report_dir),
        Command::GenAcceptance { out, force } => cmd_gen_acceptance(&out, force),
    }
}

fn load_scenario(path: &Path, seed_override: Option<u64>) -> Result<ScenarioConfig, CliError> {
    if !path.exists() {
        return Err(CliError::Config(format!(
            "scenario not found: {}",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = ScenarioConfig::from_toml_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    config.validate().map_err(|issues| {
        let mut msg = format!("invalid scenario {}:", path.display());
        for issue in issues {
            let _ = write!(msg, "\n  - {issue}");
        }
        CliError::Config(msg)
    })?;
    Ok(config)
}

fn cmd_run(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    format: OutputFormat,
    force: bool,
) -> Result<(), CliError> {
    let config = load_scenario(scenario, seed)?;
    let name = config.name.clone();
    let run = run_scenario(config)?;
    write_run(out, &run, format, force)?;
    println!(
        "{}: {} epochs, {} rejections, minted {} tokens, slashed {} tokens -> {}",
        name,
        run.summary.epochs,
        run.summary.rejections_total,
        run.total_rewards_minted(),
        run.total_slashed(),
        out.display()
    );
    Ok(())
}

fn cmd_verify_report(report_dir: &Path) -> Result<(), CliError> {
    let failures = verify_report_dir(report_dir)?;
    if failures.is_empty() {
        println!("report verified: {}", report_dir.display());
        Ok(())
    } else {
        let mut msg = format!("{} failed checks in {}:", failures.len(), report_dir.display());
        for f in &failures {
            let _ = write!(msg, "\n  - {f}");
        }
        Err(CliError::Verification(msg))
    }
}

fn cmd_gen_acceptance(out: &Path, force: bool) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let all = scenarios::builtin();
    for (name, _) in &all {
        let path = out.join(format!("{name}.toml"));
        if path.exists() && !force {
            return Err(CliError::Config(format!(
                "scenario file {} exists; pass --force to overwrite",
                path.display()
            )));
        }
    }
    for (name, config) in &all {
        let path = out.join(format!("{name}.toml"));
        std::fs::write(&path, config.to_toml_string())
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    println!("wrote {} scenario files to {}", all.len(), out.display());
    Ok(())
}
