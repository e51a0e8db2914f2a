//! `maml-lqr`: task generation, MAML runs, grid oracle, bounds audit and
//! per-task Riccati baselines.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Bad arguments or input files; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "maml-lqr", version, about = "Gradient-based MAML for families of LQR tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct TaskSource {
    /// Task file written by `gen-tasks`.
    #[arg(long, value_name = "FILE", conflicts_with = "paper_family")]
    pub tasks: Option<PathBuf>,
    /// Use the built-in two-state example family.
    #[arg(long)]
    pub paper_family: bool,
    /// Seed for the built-in family.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded task family and write it as JSON.
    GenTasks {
        /// Use the built-in two-state example family.
        #[arg(long)]
        paper_family: bool,
        /// Family specification JSON (A, B, bases, range, count, seed).
        #[arg(long, value_name = "PATH", conflicts_with = "paper_family")]
        config: Option<PathBuf>,
        /// Override a family field, e.g. `coeff_range=[1,2]`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value = "tasks.json")]
        out: PathBuf,
    },
    /// Run the outer MAML iteration from every configured initial policy.
    Run(commands::RunArgs),
    /// Grid search for the MAML optimum at one or more inner step sizes.
    Oracle {
        #[command(flatten)]
        source: TaskSource,
        /// Comma-separated inner step sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        eta: Vec<f64>,
        #[arg(long, default_value_t = maml_lqr::oracle::DEFAULT_RESOLUTION)]
        resolution: f64,
        /// Per-coordinate bounds of vec(W), `lo1:hi1,lo2:hi2,...`.
        #[arg(long = "box", value_name = "LO:HI,...")]
        bounds: Option<String>,
        #[arg(long, default_value = "oracle.json")]
        out: PathBuf,
    },
    /// Evaluate every bound at W and check the step-size condition.
    CheckBounds {
        #[command(flatten)]
        source: TaskSource,
        /// Policy rows separated by `;`, entries by `,`.
        #[arg(long, allow_hyphen_values = true)]
        w: String,
        #[arg(long)]
        eta: f64,
        /// Outer step size, or `auto` for the middle of the certified window.
        #[arg(long, default_value = "auto")]
        beta: String,
        #[arg(long, default_value = "bounds.json")]
        out: PathBuf,
    },
    /// Per-task Riccati optima, optionally next to a MAML result.
    Baseline {
        #[command(flatten)]
        source: TaskSource,
        /// Run summary JSON whose `w_final` is compared against the optima.
        #[arg(long, value_name = "FILE")]
        maml_result: Option<PathBuf>,
        #[arg(long, default_value = "baseline.json")]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::GenTasks {
            paper_family,
            config,
            set,
            seed,
            count,
            out,
        } => commands::gen_tasks(paper_family, config, &set, seed, count, &out),
        Command::Run(args) => commands::run(&args),
        Command::Oracle {
            source,
            eta,
            resolution,
            bounds,
            out,
        } => commands::oracle(&source, &eta, resolution, bounds.as_deref(), &out),
        Command::CheckBounds {
            source,
            w,
            eta,
            beta,
            out,
        } => commands::check_bounds(&source, &w, eta, &beta, &out),
        Command::Baseline {
            source,
            maml_result,
            out,
        } => commands::baseline(&source, maml_result.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
