use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nmqsd::config::{EnsembleConfig, GridConfig};
use nmqsd::{Error, RunConfig, Task};

/// Non-Markovian quantum state diffusion laboratory.
#[derive(Debug, Parser)]
#[command(name = "nmqsd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample noise paths.
    Noise(Common),
    /// Integrate and export single trajectories.
    Trajectory(Common),
    /// Estimate the reduced state from a trajectory ensemble.
    Unravel(Common),
    /// Squared-norm statistics and the conditional martingale test.
    Norms(Common),
    /// Conditional compatibility audit.
    Compat(Common),
    /// Master-equation or exact few-mode reference dynamics.
    Oracle(Common),
    /// Jaynes-Cummings kernel residual on a panel of earlier times.
    JcResidual(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `[output] dir`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-max")]
    t_max: Option<f64>,
}

impl Command {
    fn split(self) -> (Task, Common) {
        match self {
            Command::Noise(c) => (Task::Noise, c),
            Command::Trajectory(c) => (Task::Trajectory, c),
            Command::Unravel(c) => (Task::Unravel, c),
            Command::Norms(c) => (Task::Norms, c),
            Command::Compat(c) => (Task::Compat, c),
            Command::Oracle(c) => (Task::Oracle, c),
            Command::JcResidual(c) => (Task::JcResidual, c),
        }
    }
}

fn load(task: Task, args: &Common) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let mut config = RunConfig::from_toml(&text).map_err(|e| e.to_string())?;
    config.task = Some(task);
    if let Some(seed) = args.seed {
        match config.ensemble.as_mut() {
            Some(e) => e.seed = seed,
            None => config.ensemble = Some(EnsembleConfig { n_traj: 0, seed, mode: None }),
        }
    }
    if args.dt.is_some() || args.t_max.is_some() {
        let grid = match (config.grid, args.dt, args.t_max) {
            (Some(g), dt, t_max) => GridConfig { dt: dt.unwrap_or(g.dt), t_max: t_max.unwrap_or(g.t_max) },
            (None, Some(dt), Some(t_max)) => GridConfig { dt, t_max },
            (None, ..) => return Err("grid: section required (or pass both --dt and --t-max)".into()),
        };
        config.grid = Some(grid);
    }
    Ok(config)
}

fn main() -> ExitCode {
    let (task, args) = Cli::parse().command.split();
    let config = match load(task, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = args
        .out
        .clone()
        .or_else(|| config.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    match nmqsd::run(&config, &out, args.workers) {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
