//! Command-line parsing and process-level behavior.

use std::ffi::OsString;
use std::io::Read;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{parse_config, Kind, Overrides};
use crate::error::CliError;
use crate::run::run;
use crate::table::Format;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "DELAYKIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "delaykit",
    version,
    about = "Solve and verify linear delay equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the fundamental solution S(t) on a time grid.
    Fundsol(Args),
    /// Solve an initial value problem with history phi.
    Ivp(Args),
    /// Solve the delayed heat equation on [0, pi].
    Heat(Args),
    /// Run the invariant suite.
    Verify(Args),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct Args {
    /// JSON problem file, or '-' for stdin. Read from stdin when omitted,
    /// except for `verify`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
}

fn read_config(path: Option<&PathBuf>) -> Result<String, CliError> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p)
            .map_err(|e| CliError::Usage(format!("cannot read '{}': {e}", p.display()))),
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Usage(format!("cannot read stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(v) = std::env::var_os(THREADS_ENV) {
        let n = v
            .to_str()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (kind, args) = match cli.command {
        Command::Fundsol(a) => (Kind::Fundsol, a),
        Command::Ivp(a) => (Kind::Ivp, a),
        Command::Heat(a) => (Kind::Heat, a),
        Command::Verify(a) => (Kind::Verify, a),
    };
    let ov = Overrides {
        tol: args.tol,
        modes: args.modes,
        step: args.step,
    };
    let cfg = if kind == Kind::Verify && args.config.is_none() {
        parse_config("{}", Some(kind), &ov)?
    } else {
        parse_config(&read_config(args.config.as_ref())?, Some(kind), &ov)?
    };
    let pool = thread_pool()?;
    let output = pool.install(|| run(&cfg))?;
    let format = match args.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    output.table.emit(format, args.out.as_deref())?;
    if output.failures > 0 {
        return Err(CliError::Verification {
            failed: output.failures,
            total: output.table.rows.len(),
        });
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("delaykit: {e}");
            e.exit_code()
        }
    }
}
