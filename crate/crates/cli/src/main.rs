//! `wavetrace`: scenario-driven analyses of rotating shallow-water wave
//! modes. See the repository README for the scenario schema.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::Meta;
use scenario::Scenario;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or precondition (exit code 2).
    Validation(String),
    /// Numerical failure during computation (exit code 3).
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "wavetrace",
    version,
    about = "Rossby/Poincare mode analysis: eigenframes, ray tracing, grid operator checks"
)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the sampler seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the semiclassical parameter list with a single value.
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise eigenvalues and eigenvectors of the principal matrix.
    Eig,
    /// Scalar Hamiltonians with the generic/closed-form cross check.
    Hamiltonians,
    /// Integrate explicit initial points; per-ray CSV plus a JSON summary.
    Trace,
    /// Integrate a sampled ensemble; per-ray CSV plus a JSON summary.
    Ensemble,
    /// Grid-operator residual, microlocalization and stability checks.
    QuantizeCheck,
    /// Commutator positivity bound on a sampled compact set.
    Mourre,
}

fn init_threads() {
    if let Ok(v) = std::env::var("WAVETRACE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let config = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("--config PATH is required".into()))?;
    let mut scenario = Scenario::load(config)?;
    scenario.apply_overrides(cli.seed, cli.eps);
    let profile = scenario.profile()?;
    let eps_desc = scenario.grid.as_ref().map(|g| {
        g.eps_list
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(";")
    });
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        scenario_hash: scenario.hash(),
        seed: scenario.initial.seed,
        eps: eps_desc,
        profile_id: profile.id().to_string(),
    };
    match cli.command {
        Command::Eig => commands::cmd_eig(&scenario, &cli.out, &meta),
        Command::Hamiltonians => commands::cmd_hamiltonians(&scenario, &cli.out, &meta),
        Command::Trace => commands::cmd_trace_or_ensemble(&scenario, &cli.out, &meta, false),
        Command::Ensemble => commands::cmd_trace_or_ensemble(&scenario, &cli.out, &meta, true),
        Command::QuantizeCheck => commands::cmd_quantize_check(&scenario, &cli.out, &meta),
        Command::Mourre => commands::cmd_mourre(&scenario, &cli.out, &meta),
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
