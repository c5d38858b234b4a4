use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use percolab::runner::{self, clt_for_side, fit_summary, parse_exponent, read_samples, read_summary};
use percolab::{CliError, CliResult, ExperimentConfig};
use percolab_core::estimation::Sign;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "percolab", version, about = "Percolation Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Fit the size expansion to a summary.json.
    Fit {
        summary: PathBuf,
        #[arg(long)]
        degree: usize,
        #[arg(long, default_value = "minus")]
        sign: String,
    },
    /// Normality check of the samples at one side of a samples.csv.
    Clt {
        samples: PathBuf,
        #[arg(long)]
        side: f64,
        /// Scaling exponent, e.g. `1` or `3/2`.
        #[arg(long)]
        exponent: String,
    },
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Run { config } => {
            let config = ExperimentConfig::load(&config)?;
            let manifest = runner::run_experiment(&config)?;
            print_json(&manifest);
        }
        Command::Fit { summary, degree, sign } => {
            let sign: Sign = sign
                .parse()
                .map_err(|e: percolab_core::Error| CliError::Validation {
                    key: "sign".into(),
                    reason: e.to_string(),
                })?;
            print_json(&fit_summary(&read_summary(&summary)?, degree, sign)?);
        }
        Command::Clt { samples, side, exponent } => {
            let exponent = parse_exponent(&exponent)?;
            print_json(&clt_for_side(&read_samples(&samples)?, side, exponent)?);
        }
        Command::Validate { config } => {
            let config = ExperimentConfig::load(&config)?;
            print_json(&config);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("percolab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
