//! `epnilab` command-line front end.
//!
//! Exit codes: 0 success with no violation, 1 internal failure, 2 usage or
//! configuration error, 3 a counterexample dossier was written.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "epnilab", version, about = "Entropy photon-number inequality laboratory")]
pub struct Cli {
    /// Master seed (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `epnilab-out/<subcommand>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML config file, or a `manifest.json` from an earlier run to replay it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form capacity sweep over (eta, nbar, noise) grids.
    Capacity(CapacityArgs),
    /// Seeded EPnI campaign.
    Epni(CampaignArgs),
    /// Seeded minimum-output-entropy campaign.
    Moe(CampaignArgs),
    /// Classical EPI slacks for Gaussian mixtures.
    Epi(EpiArgs),
    /// Derivative-free search for low output entropy.
    Search(SearchArgs),
    /// Inspect and validate a stored state.
    State(StateArgs),
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    /// Transmissivities, comma separated.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    /// Mean signal photon numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    nbar: Option<Vec<f64>>,
    /// Thermal noise photon numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    noise: Option<Vec<f64>>,
    /// Use the default grid for every axis not given.
    #[arg(long)]
    default_grid: bool,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// Conjecture number (moe only): 1 or 2.
    #[arg(long)]
    conjecture: Option<u8>,
    /// Input ensemble.
    #[arg(long)]
    ensemble: Option<String>,
    /// Per-mode truncation of sampled inputs.
    #[arg(long)]
    dim: Option<usize>,
    /// Modes per input (each pair meets at its own beam splitter).
    #[arg(long)]
    n_modes: Option<usize>,
    /// Number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Transmissivities cycled over trials, comma separated.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    /// Thermal mean photon number K.
    #[arg(long)]
    k: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EpiArgs {
    /// Mixture specification file (TOML with `x` and `y` component lists).
    spec: Option<PathBuf>,
    /// Transmissivity (random per pair when omitted in random mode).
    #[arg(long)]
    eta: Option<f64>,
    /// Run this many random mixture pairs instead of a spec file.
    #[arg(long)]
    random: Option<usize>,
    /// Largest component count of a random mixture.
    #[arg(long)]
    max_components: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// moe1, moe2 or epni-slack.
    objective: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Objective evaluations per restart.
    #[arg(long)]
    max_evaluations: Option<usize>,
    /// Input family for epni-slack: thermal or pure-pure.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    /// State container file.
    path: Option<PathBuf>,
    /// Validity tolerance for trace, hermiticity and positivity.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
