use clap::{Parser, Subcommand};
use fbvp::cli::{self, Options};
use std::path::PathBuf;
use std::process::ExitCode;

/// Continuation solver for the free boundary value problem
/// Δu + g(x,u) = p(x), u|∂D = b, ∮∂u/∂n ds = 0.
#[derive(Parser)]
#[command(name = "fbvp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the solvability hypotheses (c0, lambda2, M, resonance window)
    Check {
        config: PathBuf,
        /// Exit with code 2 when the hypotheses are violated
        #[arg(long)]
        strict: bool,
        /// Output directory override
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace the solution curve mu(xi1) over the configured range
    Sweep {
        config: PathBuf,
        #[arg(long)]
        strict: bool,
        /// Extend a persisted curve instead of recomputing it
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate all solutions with forcing mean mu0
    Trace {
        config: PathBuf,
        /// Override the forcing mean
        #[arg(long)]
        mu0: Option<f64>,
        #[arg(long)]
        strict: bool,
        /// Extend a persisted curve instead of recomputing it
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single homotopy run to k = 1 at a fixed solution average
    Solve {
        config: PathBuf,
        /// Solution average xi1 to hold fixed
        #[arg(long)]
        xi1: f64,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = match args.command {
        Command::Check { config, strict, out } => {
            let opts = Options {
                strict,
                out,
                ..Default::default()
            };
            cli::load_config(&config).and_then(|cfg| cli::run_check(&cfg, &opts).map(|_| ()))
        }
        Command::Sweep {
            config,
            strict,
            resume,
            out,
        } => {
            let opts = Options {
                strict,
                resume,
                out,
                ..Default::default()
            };
            cli::load_config(&config).and_then(|cfg| cli::run_sweep(&cfg, &opts).map(|_| ()))
        }
        Command::Trace {
            config,
            mu0,
            strict,
            resume,
            out,
        } => {
            let opts = Options {
                strict,
                mu0,
                resume,
                out,
                ..Default::default()
            };
            cli::load_config(&config).and_then(|cfg| cli::run_trace(&cfg, &opts).map(|_| ()))
        }
        Command::Solve {
            config,
            xi1,
            strict,
            out,
        } => {
            let opts = Options {
                strict,
                xi1: Some(xi1),
                out,
                ..Default::default()
            };
            cli::load_config(&config).and_then(|cfg| cli::run_solve(&cfg, &opts))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
