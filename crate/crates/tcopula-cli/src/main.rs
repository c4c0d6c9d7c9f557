mod artifacts;
mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tcopula::error::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_CONVERGENCE: u8 = 4;
const EXIT_PARTIAL_FAMILY: u8 = 5;

#[derive(Parser)]
#[command(
    name = "tcopula",
    about = "Calibrate and compare t-copula dependence models on return data",
    version
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest prices, fit per-asset GARCH(1,1) filters, and write
    /// residuals, pseudo-observations, and the rank correlation matrix.
    Filter,
    /// Fit a single model by maximum likelihood and MCMC.
    Calibrate {
        /// Model id, e.g. M0.
        #[arg(short, long)]
        model: String,
    },
    /// Score every model in the family and rank by posterior probability.
    Select,
    /// Draw pseudo-observations from a calibrated model.
    Simulate {
        #[arg(short, long)]
        model: String,
        #[arg(short, long, default_value_t = 10000)]
        n_draws: usize,
    },
    /// Compare tail risk of two calibrated models by Monte Carlo.
    Cvar {
        /// Base model id.
        #[arg(long)]
        model_a: Option<String>,
        /// Alternative model id.
        #[arg(long)]
        model_b: Option<String>,
        /// Check the tail estimator against uniform losses instead.
        #[arg(long)]
        self_test: bool,
    },
    /// Write a MANIFEST with a digest of every artifact in the output
    /// directory.
    Report,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Domain(_) | Error::Shape(_) => EXIT_VALIDATION,
        Error::Data(_) | Error::Io(_) | Error::Csv(_) => EXIT_DATA,
        Error::Convergence { .. } | Error::Numeric(_) => EXIT_CONVERGENCE,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let config = config::RunConfig::load(&cli.config)?;
    match cli.command {
        Command::Filter => commands::cmd_filter(&config)?,
        Command::Calibrate { model } => commands::cmd_calibrate(&config, &model)?,
        Command::Select => {
            let failures = commands::cmd_select(&config)?;
            if failures > 0 {
                eprintln!("{failures} model(s) failed; report is partial");
                return Ok(EXIT_PARTIAL_FAMILY);
            }
        }
        Command::Simulate { model, n_draws } => commands::cmd_simulate(&config, &model, n_draws)?,
        Command::Cvar {
            model_a,
            model_b,
            self_test,
        } => {
            if self_test {
                commands::cmd_cvar_self_test(&config)?;
            } else {
                let (a, b) = match (model_a, model_b) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(Error::domain(
                            "cvar needs --model-a and --model-b (or --self-test)".to_string(),
                        ))
                    }
                };
                commands::cmd_cvar(&config, &a, &b)?;
            }
        }
        Command::Report => commands::cmd_report(&config)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
