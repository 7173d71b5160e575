//! `coevo`: describe, synthesize, simulate and estimate network–behavior
//! co-evolution panels.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use error::{CliError, Outcome};

#[derive(Parser)]
#[command(name = "coevo", version, about = "Co-evolution of friendship networks and behavior")]
struct Cli {
    /// Cap on worker threads used for replications.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BaselineKind {
    Ols,
    Poisson,
}

#[derive(Subcommand)]
enum Command {
    /// Network and behavior descriptive tables.
    Describe {
        /// Dataset directory (edges.csv, behavior.csv, covariates.csv, data.toml).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic panel from known parameters.
    Synthesize {
        /// Generator config (n_actors, n_waves, n_levels, density, [effects], [params]).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate every period forward from the observed waves.
    Simulate {
        #[arg(long)]
        data: PathBuf,
        /// Model file with an [effects] table.
        #[arg(long)]
        model: PathBuf,
        /// Parameter file (rho_net, rho_beh, beta_net, beta_beh).
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        replications: u64,
        /// Event trace of the first replication, one `t,actor,domain,choice` per line.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Method-of-moments estimation by stochastic approximation.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        /// Model file with [effects] and an optional [estimation] table.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convergence t-ratios of given parameters against the observed targets.
    Check {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n_check: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixed-effects regressions of posts on lagged network exposure.
    Baseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        estimator: BaselineKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulator against exact transition probabilities on a tiny random instance.
    #[command(hide = true)]
    CheckOracle {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        replications: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    match cli.command {
        Command::Describe { data, out } => commands::describe(&data, out.as_deref()),
        Command::Synthesize { config, seed, out } => commands::synthesize(&config, seed, &out),
        Command::Simulate {
            data,
            model,
            params,
            seed,
            replications,
            trace,
            out,
        } => commands::simulate(&data, &model, &params, seed, replications, trace.as_deref(), &out),
        Command::Estimate { data, model, seed, out } => commands::estimate(&data, &model, seed, &out),
        Command::Check {
            data,
            model,
            params,
            seed,
            n_check,
            tau,
            out,
        } => commands::check(&data, &model, &params, seed, n_check, tau, out.as_deref()),
        Command::Baseline { data, estimator, out } => commands::baseline(&data, estimator, out.as_deref()),
        Command::CheckOracle { seed, replications, out } => commands::check_oracle(seed, replications, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
