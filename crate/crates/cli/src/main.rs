//! `kactree` scenario runner.
//!
//! Exit status: 0 success, 2 configuration error, 3 hypothesis not satisfied,
//! 4 numerical failure, 1 anything else (I/O).

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use commands::Verdict;
use output::Outputs;
use scenario::Scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Hypothesis(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<kactree::Error> for CliError {
    fn from(e: kactree::Error) -> Self {
        use kactree::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidSpec(_) | E::Domain(_) | E::Unsupported(_) | E::Degenerate(_) => CliError::Config(msg),
            E::Classification(_) => CliError::Hypothesis(msg),
            E::State(_) | E::InsufficientData(_) | E::Budget(_) | E::Numeric(_) => CliError::Numeric(msg),
            _ => CliError::Io(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "kactree",
    version,
    about = "Monte Carlo and series experiments for smoothing-transform kinetic models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(global = true, short, long, default_value = "scenario.toml")]
    config: PathBuf,
    /// Overrides `seed`.
    #[arg(global = true, long)]
    seed: Option<u64>,
    /// Overrides `count` (draws per time point).
    #[arg(global = true, long)]
    count: Option<usize>,
    /// Overrides `output_dir`.
    #[arg(global = true, short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check the kernel's admissibility conditions.
    Validate,
    /// Tabulate S and mu, locate the conjugate exponent.
    Spectral,
    /// Sample rescaled solutions at every configured time.
    Simulate,
    /// Solve for the mixing law and compare V_t with V_inf.
    Selfsimilar,
    /// Track the shrinkage of the rescaled solution.
    Degenerate,
    /// Compare the Wild series with Monte Carlo characteristic functions.
    WildCompare,
    /// Fit the decay rate of the Wasserstein distance to V_inf.
    Rate,
    /// Shape law, weight norms and subtree fractions of recursive trees.
    TreeStats,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Spectral => "spectral",
            Command::Simulate => "simulate",
            Command::Selfsimilar => "selfsimilar",
            Command::Degenerate => "degenerate",
            Command::WildCompare => "wild-compare",
            Command::Rate => "rate",
            Command::TreeStats => "tree-stats",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut s = Scenario::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(count) = cli.count {
        s.count = count;
    }
    if let Some(dir) = &cli.output_dir {
        s.output_dir = dir.clone();
    }
    s.check()?;
    let mut out = Outputs::create(&s.output_dir)?;
    let verdict = match cli.command {
        Command::Validate => commands::validate(&s, &mut out),
        Command::Spectral => commands::spectral_cmd(&s, &mut out),
        Command::Simulate => commands::simulate(&s, &mut out),
        Command::Selfsimilar => commands::selfsimilar(&s, &mut out),
        Command::Degenerate => commands::degenerate(&s, &mut out),
        Command::WildCompare => commands::wild_compare(&s, &mut out),
        Command::Rate => commands::rate(&s, &mut out),
        Command::TreeStats => commands::tree_stats(&s, &mut out),
    }?;
    match verdict {
        Verdict::Ok => out.finish(cli.command.name(), &s, "ok"),
        Verdict::Hypothesis(msg) => {
            out.finish(cli.command.name(), &s, "hypothesis_failed")?;
            Err(CliError::Hypothesis(msg))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kactree {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
