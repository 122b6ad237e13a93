//! `kenv`: batch runner for the envelope, integral and g^M verification
//! campaigns. Exit codes: 0 pass, 1 verification failure, 2 usage or config
//! error.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "KENV_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] kenv_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use kenv_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Core(
                E::InvalidShape(_)
                | E::ShapeMismatch { .. }
                | E::InvalidSpec(_)
                | E::AlphaOutOfRange(_)
                | E::QuadratureRefused(_)
                | E::InvalidArgument(_)
                | E::InvalidCount,
            ) => EXIT_USAGE,
            CliError::Core(_) => EXIT_FAIL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kenv",
    version,
    about = "Verification campaigns for G_{n,k}-invariant Kähler potentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct IoArgs {
    /// JSON run configuration (see docs/config.md).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check φ ≥ ψ and chain monotonicity for calibrated test functions.
    EnvelopeVerify(IoArgs),
    /// Integrals of exp(−αψ) against the closed form, and domination.
    Tian {
        #[command(flatten)]
        io: IoArgs,
        /// Run the truncated-integral sweep at α ≥ 1 instead.
        #[arg(long)]
        divergence: bool,
    },
    /// Determinant formula and ψ_M Hessian identity for g^M.
    GmCheck(IoArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!("{THREADS_ENV}={raw} is not a positive integer"))
    })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn prepare(io: &IoArgs) -> Result<(RunConfig, PathBuf), CliError> {
    let cfg = RunConfig::load(&io.config)?;
    let out = io
        .out
        .clone()
        .or_else(|| cfg.output_path.clone())
        .ok_or_else(|| {
            CliError::Config("no output directory: pass --out or set output_path".into())
        })?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    Ok((cfg, out))
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    match cli.command {
        Command::EnvelopeVerify(io) => {
            let (cfg, out) = prepare(&io)?;
            commands::envelope_verify(&cfg, &out)
        }
        Command::Tian { io, divergence } => {
            let (cfg, out) = prepare(&io)?;
            if divergence {
                commands::tian_divergence(&cfg, &out)
            } else {
                commands::tian(&cfg, &out)
            }
        }
        Command::GmCheck(io) => {
            let (cfg, out) = prepare(&io)?;
            commands::gm_check(&cfg, &out)
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            eprintln!("verification failed");
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("kenv: {e}");
            e.exit_code()
        }
    }
}
