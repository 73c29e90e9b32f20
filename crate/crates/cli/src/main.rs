//! `denots`: dataset generation, training, attacks, verification studies and sweeps.

mod commands;
mod config;
mod error;
mod sweep;
mod svg;

use clap::{Parser, Subcommand};
use config::ExperimentFlags;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "denots", version, about = "Scaled neural CDEs with negative feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset: CSV splits plus a manifest.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: ExperimentFlags,
    },
    /// Train a model; writes weights, JSON-lines history and test metrics.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset directory from `generate`; otherwise the dataset is built from the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        flags: ExperimentFlags,
    },
    /// Evaluate a trained model under drop or change attacks.
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// drop or change.
        #[arg(long, default_value = "drop")]
        kind: String,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.85")]
        fractions: Vec<f64>,
        /// Number of attack seeds.
        #[arg(long, default_value_t = 5)]
        attack_seeds: u64,
        /// Also write an SVG chart.
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        flags: ExperimentFlags,
    },
    /// Run a named verification study; exit code 3 when its assertions fail.
    Verify {
        study: String,
        /// JSON overrides merged over the study defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Iteration count for Monte Carlo studies.
        #[arg(long)]
        iterations: Option<usize>,
        /// Override `dotted.key=json`, repeatable.
        #[arg(long = "set", value_parser = config::parse_assignment)]
        set: Vec<(String, serde_json::Value)>,
        /// Print the default configuration and exit.
        #[arg(long)]
        print_defaults: bool,
    },
    /// Train over a tolerance or time-scale grid and correlate log NFE with the metric.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// scale or tolerance.
        #[arg(long, default_value = "scale")]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        /// Seeds per grid point.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        flags: ExperimentFlags,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DENOTS_LOG", "info")).format_timestamp(None).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, flags } => commands::generate(config.as_deref(), &flags),
        Command::Train { config, data, flags } => commands::train(config.as_deref(), data.as_deref(), &flags),
        Command::Attack { model, config, data, kind, fractions, attack_seeds, svg, flags } => commands::attack(
            &commands::AttackArgs { model, config, data, kind, fractions, attack_seeds, svg },
            &flags,
        ),
        Command::Verify { study, config, seed, out, iterations, set, print_defaults } => {
            commands::verify(&commands::VerifyArgs { study, config, seed, out, iterations, set, print_defaults })
        }
        Command::Sweep { config, axis, grid, seeds, svg, flags } => {
            sweep::run(&sweep::SweepArgs { config, axis, grid, seeds, svg }, &flags)
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
