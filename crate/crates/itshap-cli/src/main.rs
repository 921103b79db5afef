//! Interaction-index explanations over discrete feature domains.
//!
//! Subcommands: `explain` an instance, `verify` backend agreement and
//! axioms, `decompose` a dense tensor into train form, `bench` the
//! backends. The `ITSHAP_MAX_DENSE` environment variable overrides the
//! default cap of 2^24 on dense materializations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use itshap::engine::Backend;
use itshap::DEFAULT_DENSE_LIMIT;
use itshap_cli::commands;
use itshap_cli::CliError;

#[derive(Parser)]
#[command(name = "itshap", version, about = "Shapley and interaction-index explanations with exact and tensor-train backends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum BackendArg {
    Dense,
    Tt,
    Both,
}

impl From<BackendArg> for Backend {
    fn from(arg: BackendArg) -> Backend {
        match arg {
            BackendArg::Dense => Backend::Dense,
            BackendArg::Tt => Backend::Tt,
            BackendArg::Both => Backend::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute interaction components for one instance.
    Explain {
        /// Problem file (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Comma-separated 1-based feature values, e.g. "1,2,1".
        #[arg(long)]
        instance: String,
        /// Interaction order k (>= 1).
        #[arg(long)]
        order: usize,
        /// Contraction backend.
        #[arg(long, value_enum, default_value_t = BackendArg::Both)]
        backend: BackendArg,
        /// Cross-check tolerance recorded by the `both` backend.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Output result file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run randomized oracle-equivalence batteries.
    Verify {
        /// Problem file (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Number of randomized trials per battery.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Seed for the counter-based generator.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Test hook: force a named battery to fail.
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Decompose a dense tensor file into train form.
    Decompose {
        /// Dense tensor file, or a problem file with a dense model.
        #[arg(long)]
        problem: PathBuf,
        /// Relative Frobenius truncation tolerance.
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        /// Output train container (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the backends on configured problem sizes.
    Bench {
        /// Benchmark configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output table (CSV).
        #[arg(long)]
        out: PathBuf,
    },
}

fn dense_limit_from_env() -> Result<usize, CliError> {
    match std::env::var("ITSHAP_MAX_DENSE") {
        Ok(text) => text.parse::<usize>().map_err(|e| {
            CliError::Parse(format!("ITSHAP_MAX_DENSE value {text:?}: {e}"))
        }),
        Err(_) => Ok(DEFAULT_DENSE_LIMIT),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let dense_limit = dense_limit_from_env()?;
    match cli.command {
        Command::Explain {
            problem,
            instance,
            order,
            backend,
            tol,
            out,
        } => commands::cmd_explain(
            &problem,
            &instance,
            order,
            backend.into(),
            tol,
            &out,
            dense_limit,
        ),
        Command::Verify {
            problem,
            trials,
            seed,
            inject_fault,
        } => commands::cmd_verify(&problem, trials, seed, inject_fault.as_deref()),
        Command::Decompose { problem, tol, out } => commands::cmd_decompose(&problem, tol, &out),
        Command::Bench { config, out } => commands::cmd_bench(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
