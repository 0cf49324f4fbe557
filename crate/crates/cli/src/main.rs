//! phonon-sim: accumulation simulator, asymptotics, nonclassicality metrics,
//! and sideband tomography for a single trapped-ion oscillator.
//!
//! Exit codes: 0 on success, 2 for configuration or input problems, 3 for
//! numerical failures discovered mid-computation.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use config::{resolved_config, OutputFormat, Overrides};
use phonon_sim::SimError;

#[derive(Parser)]
#[command(
    name = "phonon-sim",
    version,
    about = "Phonon accumulation simulator and analysis toolkit for a trapped-ion oscillator"
)]
struct Cli {
    /// Experiment configuration file (TOML); built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides PHONON_SIM_OUT and the configuration).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Random seed (overrides PHONON_SIM_SEED and the configuration).
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Output format for tables and reports.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured accumulation steps; writes per-step distributions
    /// and a per-step metric summary.
    Simulate,
    /// Report the pulse's fixed points and the k -> infinity distribution.
    Asymptote,
    /// Synthesize or invert blue-sideband Rabi traces.
    #[command(subcommand)]
    Tomo(TomoCommand),
    /// Witness report for a stored distribution (.csv or .json).
    Metrics { input: PathBuf },
    /// Write the built-in reference tables.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(Subcommand)]
enum TomoCommand {
    /// Forward-synthesize a Rabi trace for the configured initial state.
    Synth,
    /// Reconstruct a phonon distribution from a measured trace.
    Fit { input: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Figure {
    /// Single ideal pi pulse on thermal states over a log grid of n_bar.
    Fig2,
    /// Twenty lossy steps at three pulse areas from n_bar = 1.19.
    Fig3,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn run(cli: Cli) -> phonon_sim::Result<()> {
    let cfg = resolved_config(&Overrides {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        format: cli.format,
    })?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Asymptote => commands::asymptote(&cfg),
        Command::Tomo(TomoCommand::Synth) => commands::tomo_synth(&cfg),
        Command::Tomo(TomoCommand::Fit { input }) => commands::tomo_fit(&cfg, &input),
        Command::Metrics { input } => commands::metrics(&cfg, &input),
        Command::Reproduce {
            figure: Figure::Fig2,
        } => commands::reproduce_fig2(&cfg),
        Command::Reproduce {
            figure: Figure::Fig3,
        } => commands::reproduce_fig3(&cfg),
    }
}

/// 2 for caller-side problems (bad configuration, unreadable inputs), 3 for
/// numerical failures.
fn exit_code(e: &SimError) -> i32 {
    if e.is_domain() {
        2
    } else {
        3
    }
}
