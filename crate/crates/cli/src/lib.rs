//! Experiment runner: parameter sweeps to CSV, verification suites, the
//! lower-bound report and sequence generation.
//!
//! Exit codes: `0` everything passed, `1` an invariant failed, `2` the
//! invocation or its inputs were invalid.

// `!(x > 0.0)` is the NaN-rejecting form of `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod gen;
pub mod grid;
pub mod sweep;
pub mod verify;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SMART_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "smart",
    version,
    about = "Instance-optimal online learning experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regret of each policy over a grid of sequences, as CSV.
    Sweep(sweep::SweepArgs),
    /// Run an invariant suite and print a JSON report.
    Verify(verify::VerifyArgs),
    /// Print the lower-bound constant and finite-horizon ratios as JSON.
    Lowerbound(verify::LowerboundArgs),
    /// Write a generated sequence or loss matrix to a file.
    Gen(gen::GenArgs),
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat key=value file; flags override its entries.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

/// An invalid invocation, config file or input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

impl From<smart_core::Error> for UsageError {
    fn from(e: smart_core::Error) -> Self {
        Self(e.to_string())
    }
}

/// Whether every checked invariant held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Self::Pass => 0,
            Self::Fail => 1,
        }
    }
}

/// Run a parsed command. Any error is a usage error.
pub fn run(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::Sweep(args) => sweep::run(args),
        Command::Verify(args) => verify::run(args),
        Command::Lowerbound(args) => verify::run_lowerbound(args),
        Command::Gen(args) => gen::run(args),
    }
}

/// Size the worker pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<(), UsageError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        UsageError::new(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| UsageError::new(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

/// Write `text` to `path`, or to stdout when `path` is `None`.
pub(crate) fn emit(path: Option<&std::path::Path>, text: &str) -> Result<(), UsageError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| UsageError::new(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| UsageError::new(e.to_string()))
        }
    }
}
