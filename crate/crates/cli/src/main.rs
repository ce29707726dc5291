//! `curvegas`: Grunsky operators, large-n predictions and Monte Carlo checks
//! for the Coulomb gas on an analytic Jordan curve.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{CliError, Context, Profile};
use config::RunConfig;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "curvegas", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for reports and sample streams.
    #[arg(long, global = true, default_value = "curvegas-out")]
    out_dir: PathBuf,
    /// Overrides the seed in the config's mcmc block.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for chains and integration nodes.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Profile::Strict)]
    tolerance_profile: Profile,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Grunsky matrix, K, d, Fredholm determinant and Loewner energy.
    Analyze,
    /// CLT mean/variance and log-partition-function expansion for each n.
    Predict,
    /// Solution h of the integral equation and its residuals.
    SolveH,
    /// Oracle cross-checks with a pass/fail table.
    Verify,
    /// Metropolis sampling of the gas; CSV streams and estimator report.
    Sample,
    /// Partition-function ratio by thermodynamic integration vs closed form.
    Thermo,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Predict => "predict",
            Command::SolveH => "solve-h",
            Command::Verify => "verify",
            Command::Sample => "sample",
            Command::Thermo => "thermo",
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let config = RunConfig::load(path).map_err(CliError::Validation)?;
    if cli.threads == 0 {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let ctx = Context { config, out_dir: cli.out_dir.clone(), seed: cli.seed, profile: cli.tolerance_profile };
    let outcome = match cli.command {
        Command::Analyze => commands::analyze(&ctx),
        Command::Predict => commands::predict_cmd(&ctx),
        Command::SolveH => commands::solve_h_cmd(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Sample => commands::sample(&ctx),
        Command::Thermo => commands::thermo(&ctx),
    }?;
    std::fs::write(ctx.report_path(cli.command.name()), &outcome.report)?;
    // a closed pipe on stdout is not a failure; the report is already on disk
    let _ = writeln!(std::io::stdout().lock(), "{}", outcome.stdout.trim_end());
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: tolerance check failed");
            ExitCode::from(3)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
