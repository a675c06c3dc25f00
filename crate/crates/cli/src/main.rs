//! `gumbel-exit`: compute normalising constants, run last-exit studies and
//! numerically verify the asymptotic statements behind them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gumbel_exit::Execution;

use commands::{LemmaKind, Setup, VerifySelection};
use config::{ExperimentConfig, Format, Overrides};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gumbel-exit", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Drift ladder (comma separated, strictly decreasing).
    #[arg(long, global = true, value_delimiter = ',', conflicts_with = "ln_eps")]
    eps: Option<Vec<f64>>,
    /// Drift ladder given as ln ε (for drifts below the f64 range).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    ln_eps: Option<Vec<f64>>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replicates per drift.
    #[arg(long, global = true)]
    replicates: Option<u64>,
    /// Output directory; artifacts go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Run batches on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalising constants γ, τ₀, A, B, c for each drift.
    Constants,
    /// Simulate last-exit times and compare them with the Gumbel law.
    Study,
    /// Run numerical verifiers (all of them when no flag is given).
    Verify {
        /// Lemma verifiers to run.
        #[arg(long, value_enum, value_delimiter = ',')]
        lemma: Vec<LemmaKind>,
        #[arg(long)]
        gamma_ladder: bool,
        #[arg(long)]
        pp_tail: bool,
        #[arg(long)]
        slepian: bool,
    },
    /// Certify the covariance model and boundary regularity.
    Certify,
    /// KS distance and quantile table for an existing study CSV.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
    /// Lattice-sum ratio curve as CSV.
    VerifyLemmaProp,
    /// Expansion residual curve as CSV.
    CheckLemmaR,
    /// Exact vs asymptotic γ as CSV.
    GammaLadder,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    let overrides = Overrides {
        eps: g.eps,
        ln_eps: g.ln_eps,
        seed: g.seed,
        n_replicates: g.replicates,
        out: g.out,
        format: g.format,
    };
    let cfg = ExperimentConfig::load(g.config.as_deref(), overrides)?;
    let exec = if g.sequential { Execution::Sequential } else { Execution::Parallel };
    if let Command::Stats { input } = &cli.command {
        return commands::stats_cmd(&cfg, input);
    }
    let setup = Setup::new(cfg, exec)?;
    match cli.command {
        Command::Constants => commands::constants_cmd(&setup),
        Command::Study => commands::study_cmd(&setup),
        Command::Verify { lemma, gamma_ladder, pp_tail, slepian } => {
            commands::verify_cmd(&setup, &VerifySelection { lemma, gamma_ladder, pp_tail, slepian })
        }
        Command::Certify => commands::certify_cmd(&setup),
        Command::VerifyLemmaProp => commands::curve_cmd(
            &setup,
            commands::lemma_prop_report(&setup)?,
            "lemma_prop",
            &["ln_eps", "gamma", "a", "theta", "terms", "ln_brute_sum", "ln_closed_form", "ratio"],
        ),
        Command::CheckLemmaR => commands::curve_cmd(
            &setup,
            commands::lemma_r_report(&setup)?,
            "lemma_r",
            &["ln_eps", "gamma", "r", "residual"],
        ),
        Command::GammaLadder => commands::curve_cmd(
            &setup,
            commands::gamma_ladder_report(&setup)?,
            "gamma_ladder",
            &["ln_eps", "gamma_exact", "gamma_asymptotic", "refined", "abs_gap"],
        ),
        Command::Stats { .. } => unreachable!("handled above"),
    }
}

#[cfg(feature = "parallel")]
fn configure_threads() {
    let Ok(var) = std::env::var("GUMBEL_EXIT_THREADS") else { return };
    match var.parse::<usize>() {
        Ok(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not configure thread pool: {e}");
            }
        }
        Err(_) => log::warn!("ignoring GUMBEL_EXIT_THREADS={var}: not a number"),
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
