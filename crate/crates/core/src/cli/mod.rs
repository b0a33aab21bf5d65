//! Command-line front end: `ou-harvest <command> --config <path> ...`.
//!
//! Exit codes: 0 success, 1 output write failure, 2 configuration error (including
//! an unreadable config file), 3 numerical non-convergence, 4 validation failure.

mod commands;
pub mod config;
pub mod table;
pub mod validate;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::json;

pub use commands::{
    cmd_evaluate, cmd_sign, cmd_simulate, cmd_sweep, cmd_validate, SweepParameter, SweepSpec,
    SWEEP_COLUMNS,
};
pub use config::{parse_config, OutputFormat, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Model(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Model(_) => EXIT_CONFIG,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_CONFIG => "config",
            EXIT_NUMERICAL => "numerical",
            EXIT_VALIDATION => "validation",
            _ => "io",
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        })
        .to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Evaluate,
    Simulate,
    Sign,
    Sweep,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum PsiVariant {
    #[default]
    Density,
    Cdf,
}

#[derive(Debug, Parser)]
#[command(
    name = "ou-harvest",
    version,
    about = "Two-boundary harvesting policies on an Ornstein-Uhlenbeck resource"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (default: config `output_path`, else stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Overrides the config seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub sweep_param: Option<SweepParameter>,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    pub workers: Option<usize>,
    /// First-passage paths used by `validate`
    #[arg(long, default_value_t = validate::DEFAULT_PATHS)]
    pub paths: usize,
    #[arg(long, value_enum, default_value_t, hide = true)]
    pub psi_denominator: PsiVariant,
}

/// Text produced by a command, plus an error to report after it is written.
#[derive(Debug)]
pub struct CommandOutput {
    pub text: String,
    pub deferred: Option<CliError>,
}

impl CommandOutput {
    fn done(text: String) -> Self {
        CommandOutput {
            text,
            deferred: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct Report<'a, R: Serialize, D: Serialize> {
    version: &'static str,
    config: &'a RunConfig,
    results: R,
    diagnostics: D,
}

pub(crate) fn json_report<R: Serialize, D: Serialize>(
    config: &RunConfig,
    results: R,
    diagnostics: D,
) -> String {
    let report = Report {
        version: env!("CARGO_PKG_VERSION"),
        config,
        results,
        diagnostics,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    text
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Loads the configuration, applies flag overrides and runs the command.
pub fn execute(cli: &Cli) -> Result<(CommandOutput, Option<PathBuf>), CliError> {
    let source = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut config = parse_config(&source)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(format) = cli.format {
        config.output_format = Some(format);
    }
    if let Some(out) = &cli.out {
        config.output_path = Some(out.clone());
    }
    let workers = cli.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Config("--workers must be >= 1".into()));
    }
    let sweep_flags =
        cli.sweep_param.is_some() || cli.lo.is_some() || cli.hi.is_some() || cli.steps.is_some();
    if sweep_flags && cli.command != Command::Sweep {
        return Err(CliError::Config(
            "--sweep-param, --lo, --hi and --steps apply to `sweep` only".into(),
        ));
    }
    let output = match cli.command {
        Command::Evaluate => cmd_evaluate(&config)?,
        Command::Simulate => cmd_simulate(&config, workers)?,
        Command::Sign => cmd_sign(&config)?,
        Command::Sweep => {
            let spec = SweepSpec::new(
                cli.sweep_param
                    .ok_or_else(|| CliError::Config("sweep needs --sweep-param".into()))?,
                cli.lo
                    .ok_or_else(|| CliError::Config("sweep needs --lo".into()))?,
                cli.hi
                    .ok_or_else(|| CliError::Config("sweep needs --hi".into()))?,
                cli.steps
                    .ok_or_else(|| CliError::Config("sweep needs --steps".into()))?,
            )?;
            cmd_sweep(&config, &spec, workers)?
        }
        Command::Validate => cmd_validate(&config, cli.paths, cli.psi_denominator, workers)?,
    };
    Ok((output, config.output_path.clone()))
}

/// Entry point for the binary; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let fail = |e: CliError| {
        eprintln!("{}", e.record());
        e.exit_code()
    };
    let (output, path) = match execute(cli) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let written = match &path {
        Some(p) => std::fs::write(p, &output.text).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(output.text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    };
    if let Err(e) = written {
        return fail(e);
    }
    match output.deferred {
        Some(e) => fail(e),
        None => EXIT_OK,
    }
}
