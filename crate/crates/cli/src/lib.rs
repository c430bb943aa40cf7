//! Scenario runner: loads a TOML scenario, validates it, runs one command
//! and writes plot-ready outputs plus a manifest.

pub mod commands;
pub mod manifest;
pub mod scenario;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use scenario::{Command, Overrides, Scenario};

/// Exit code for schema or physics validation failures.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit code for failures while executing a valid scenario.
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, kind: "validation".into(), message: message.into() }
    }

    /// Error from the physics library during validation.
    pub fn invalid(e: chemduff::Error) -> Self {
        Self { code: EXIT_VALIDATION, kind: e.kind().into(), message: e.to_string() }
    }

    /// Error while executing. Argument errors still count as validation
    /// failures.
    pub fn runtime(e: chemduff::Error) -> Self {
        let code = match e {
            chemduff::Error::Argument(_) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        Self { code, kind: e.kind().into(), message: e.to_string() }
    }

    /// The single diagnostic line.
    pub fn line(&self) -> String {
        format!("error code={} kind={} message={:?}", self.code, self.kind, scenario::one_line(&self.message))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "chemduff", version, about = "Chemically tuned Duffing resonator scenarios")]
struct Cli {
    #[command(subcommand)]
    action: Action,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Action {
    /// Execute a scenario.
    Run { file: PathBuf },
    /// Check a scenario without executing it.
    Validate { file: PathBuf },
}

/// Report of a successful validation.
#[derive(Debug, Clone)]
pub struct Validation {
    pub resolved: String,
    pub warnings: Vec<String>,
}

pub fn validate(path: &Path, overrides: &Overrides) -> Result<Validation, CliError> {
    let mut s = Scenario::load(path)?;
    s.apply(overrides);
    let prepared = commands::prepare(s)?;
    Ok(Validation { resolved: prepared.echo(), warnings: prepared.warnings.clone() })
}

/// Runs a scenario and returns the paths written, manifest last.
pub fn run(path: &Path, overrides: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let mut s = Scenario::load(path)?;
    s.apply(overrides);
    let prepared = commands::prepare(s)?;
    for w in &prepared.warnings {
        eprintln!("warning: {w}");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(prepared.scenario.workers())
        .build()
        .map_err(|e| CliError::validation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| commands::execute(&prepared))
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let overrides = Overrides { out: cli.out, seed: cli.seed, workers: cli.workers };
    let result = match cli.action {
        Action::Validate { file } => validate(&file, &overrides).map(|v| {
            for w in &v.warnings {
                eprintln!("warning: {w}");
            }
            println!("ok");
            print!("{}", v.resolved);
        }),
        Action::Run { file } => run(&file, &overrides).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.code
        }
    }
}
