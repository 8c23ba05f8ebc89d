mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

pub const THREADS_ENV: &str = "DECEPTION_GAME_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("no equilibrium found: {0}")]
    NoEquilibrium(String),
    #[error("verification failed\n{0}")]
    VerificationFailed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(source: &str, line: usize, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{source}:{line}: {msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::NoEquilibrium(_) => 2,
            CliError::VerificationFailed(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "deception-game", version, about = "Solve, verify and simulate a signaling game with costly deception")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the equilibrium and write its report.
    Solve(Common),
    /// Tabulate the cutoff state over a log-spaced k/b grid.
    SweepCutoff(Common),
    /// Tabulate the sender's equilibrium report against the state.
    StrategyProfile(Common),
    /// Play the game by sampling, with and without evidence.
    Simulate(Common),
    /// Search for profitable deviations; exit 3 if any exist.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in parameter set: fig3b, fig4, fig5, gps-spoofing-demo, mitm-demo.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory (default: `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Simulation seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Verification grid size.
    #[arg(long, value_name = "N", default_value_t = commands::DEFAULT_GRID)]
    grid: usize,
    /// Number of rows for sweep-cutoff and strategy-profile.
    #[arg(long, value_name = "N")]
    points: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let text = match &self.config {
            Some(path) => Some(
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            ),
            None => None,
        };
        let source = self.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        RunConfig::load(
            text.as_deref().map(|t| (source.as_str(), t)),
            &Overrides {
                preset: self.preset.clone(),
                output_dir: self.out.clone(),
                seed: self.seed,
            },
        )
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, found `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}")))
}

fn run(cli: Cli) -> Result<String, CliError> {
    init_threads()?;
    match cli.command {
        Command::Solve(c) => commands::solve(&c.load()?, c.grid),
        Command::SweepCutoff(c) => commands::sweep_cutoff(&c.load()?, c.points.unwrap_or(commands::DEFAULT_SWEEP_POINTS)),
        Command::StrategyProfile(c) => {
            commands::strategy_profile(&c.load()?, c.points.unwrap_or(commands::DEFAULT_PROFILE_POINTS))
        }
        Command::Simulate(c) => commands::simulate_cmd(&c.load()?),
        Command::Verify(c) => commands::verify(&c.load()?, c.grid),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
