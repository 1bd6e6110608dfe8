//! `frs`: batch front end for the fractional Rayleigh–Stokes solvers.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::KernelArgs;
use failure::Failure;

#[derive(Parser)]
#[command(name = "frs", version, about = "Fractional Rayleigh–Stokes solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a forward, non-local or backward problem described by a JSON config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the trace and diagnostics files (default: current directory).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print A, B and their time derivatives as CSV.
    Kernel {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0)]
        t_start: f64,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Number of equally spaced times, endpoints included.
        #[arg(long, default_value_t = 11)]
        t_steps: usize,
    },
    /// Run the property suites and print a JSON report.
    Verify {
        /// Suite to run; repeat for several. All suites run when omitted.
        #[arg(long = "suite")]
        suites: Vec<String>,
        /// Multiplies every tolerance; 0 makes any nonzero error fail.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
        /// Finest step of the finite-difference oracle.
        #[arg(long, default_value_t = 1e-5)]
        oracle_step: f64,
        /// Write the report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Oracle-against-quadrature refinement study described by a JSON config.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the constants manifest on the reference grid.
    Constants {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { config, out_dir } => {
            for path in commands::solve_cmd(&config, out_dir.as_deref())? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Kernel {
            rho,
            gamma,
            lambda,
            t_start,
            t_end,
            t_steps,
        } => commands::kernel_cmd(&KernelArgs {
            rho,
            gamma,
            lambda,
            t_start,
            t_end,
            t_steps,
        }),
        Command::Verify {
            suites,
            tolerance_scale,
            oracle_step,
            report,
        } => commands::verify_cmd(&suites, tolerance_scale, oracle_step, report.as_deref()),
        Command::Convergence { config, out } => commands::convergence_cmd(&config, out.as_deref()),
        Command::Constants { out } => commands::constants_cmd(out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", Failure::config(e.render().to_string().trim_end()).to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
