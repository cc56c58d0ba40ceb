//! `modeweight`: estimate relative mode weights from clustered samples.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 numerical failure.

mod bench;
mod config;
mod error;
mod io;
mod oracle;
mod reweight;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "modeweight", version, about = "Relative mode weights by reverse-KL reweighting")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MODEWEIGHT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit cluster densities and descend to the mode weights.
    Reweight(reweight::ReweightArgs),
    /// Run one of the benchmark experiments.
    Bench(bench::BenchArgs),
    /// Quadrature ground truth on small analytic problems.
    Oracle(oracle::OracleArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Reweight(a) => reweight::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Oracle(a) => oracle::run(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
