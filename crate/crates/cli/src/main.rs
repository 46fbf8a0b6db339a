mod calibrate;
mod failure;
mod hedge;
mod price;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failure::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "longevity",
    version,
    about = "Pricing, calibration and hedge experiments for index-based longevity derivatives"
)]
struct Cli {
    /// Worker threads for Monte Carlo loops (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit model parameters to a table of central death rates.
    Calibrate(calibrate::Args),
    /// Price an instrument in closed form (or by Monte Carlo with --mc).
    Price(price::Args),
    /// Simulate surplus distributions of unhedged and hedged annuity portfolios.
    Hedge(hedge::Args),
    /// Write a synthetic `age,year,mx` table generated from model parameters.
    SynthData(synth::Args),
}

/// Model and market parameters from `--params`, or the built-in defaults.
pub(crate) fn load_params(
    path: Option<&PathBuf>,
) -> Result<(longevity_core::ModelParams, longevity_core::MarketParams), Failure> {
    match path {
        None => Ok((
            longevity_core::ModelParams::australian_males_2008(),
            longevity_core::MarketParams::default(),
        )),
        Some(p) => {
            let text = failure::read_input(p)?;
            longevity_core::io::parse_params(&text)
                .map_err(|e| Failure::input(e).context(format!("in {}", p.display())))
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(Failure::runtime)?;
    }
    match cli.command {
        Command::Calibrate(a) => calibrate::run(a),
        Command::Price(a) => price::run(a),
        Command::Hedge(a) => hedge::run(a),
        Command::SynthData(a) => synth::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
