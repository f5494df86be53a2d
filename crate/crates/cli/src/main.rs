//! `socpos`: certify, approximate, synthesize, reduce and simulate LTI models.
//!
//! Exit codes: 0 success or certified, 2 not certified (or the design step
//! failed), 3 refuted, 1 usage or IO error.

mod commands;
mod error;
mod model;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "socpos", version, about = "External positivity certificates for LTI systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify external positivity, or refute it by sampling.
    Certify(CertifyArgs),
    /// Find a nearby certified system.
    Approx(ApproxArgs),
    /// Design a state-feedback gain with a certified closed loop.
    Synth(SynthArgs),
    /// Certificate-preserving balanced truncation.
    Reduce(ReduceArgs),
    /// Sampled impulse or step response as CSV.
    Simulate(SimulateArgs),
    /// Write a seeded random corpus of model files.
    Corpus(CorpusArgs),
}

#[derive(Debug, Args)]
struct CertifyArgs {
    model: PathBuf,
    /// Verification tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Horizon cap of the sampling falsifier.
    #[arg(long)]
    max_horizon: Option<f64>,
    /// Search the invariance rate when the pinned rate fails.
    #[arg(long)]
    rate_search: bool,
    #[arg(long)]
    json_out: Option<PathBuf>,
    /// Impulse samples (t, h_11, h_12, …).
    #[arg(long)]
    csv_impulse: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ApproxMode {
    Output,
    Input,
    Alternating,
}

#[derive(Debug, Args)]
struct ApproxArgs {
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = ApproxMode::Output)]
    mode: ApproxMode,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 25)]
    max_rounds: usize,
    /// Entrywise bound on the gain.
    #[arg(long)]
    effort_bound: Option<f64>,
    #[arg(long, env = "SOCPOS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    model: PathBuf,
    /// Reduced order, counting the dominant state.
    #[arg(long)]
    order: usize,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    model: PathBuf,
    #[arg(long, conflicts_with = "step")]
    impulse: bool,
    #[arg(long)]
    step: bool,
    /// Time horizon (continuous) or number of steps (discrete); adaptive by default.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    /// Defaults to standard output.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Inclusive order range `a..b`.
    #[arg(long, default_value = "2..8")]
    order_range: String,
    #[arg(long, env = "SOCPOS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated classes, assigned round-robin.
    #[arg(long, default_value = "metzler,stable-generic,oscillatory,padded-nonminimal")]
    classes: String,
    /// Share of discrete-time models.
    #[arg(long, default_value_t = 0.3)]
    discrete_fraction: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Certify(a) => commands::certify(&a),
        Command::Approx(a) => commands::approx(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Reduce(a) => commands::reduce(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Corpus(a) => commands::corpus(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
