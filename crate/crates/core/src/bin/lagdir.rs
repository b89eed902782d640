use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lagdir::runner::{self, RunConfig};

#[derive(Parser)]
#[command(name = "lagdir", version, about = "Dirichlet solver for the special Lagrangian phase equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and write the field, boundary and report.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve at several grid spacings and fit the convergence order.
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Strictly decreasing grid spacings, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
    },
    /// Re-check a stored field against the configured problem.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Radial Hölder-phase stress test on the punctured unit disk.
    StressRadial {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1.0 / 64.0)]
        h: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn with_config(path: &PathBuf, f: impl FnOnce(&RunConfig) -> i32) -> i32 {
    match RunConfig::load(path) {
        Ok(cfg) => f(&cfg),
        Err(e) => {
            runner::print_error(&e);
            runner::exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Solve { config } => with_config(&config, runner::run_solve),
        Command::Study { config, levels } => with_config(&config, |c| runner::run_study_command(c, &levels)),
        Command::Verify { config } => with_config(&config, runner::run_verify_command),
        Command::StressRadial { alpha, rho, h, output } => runner::run_stress_command(alpha, rho, h, output.as_deref()),
    };
    ExitCode::from(code as u8)
}
