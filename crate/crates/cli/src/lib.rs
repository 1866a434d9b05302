//! Batch front-end for gabmod: JSON experiment configs in, JSON/CSV reports
//! and SVG heatmaps out.
//!
//! Exit codes: 0 when every experiment passes, 1 when any report fails or an
//! experiment cannot be evaluated numerically, 2 on configuration errors.

#![forbid(unsafe_code)]

pub mod acceptance;
pub mod config;
pub mod heatmap;
pub mod output;
pub mod runner;
pub mod schema;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::ExperimentConfig;
use output::{ExperimentRecord, RunManifest, Status};
use runner::ExecError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown experiment kind `{0}` (expected one of {kinds})", kinds = config::KINDS.join(", "))]
    UnknownKind(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// What a call to [`run`] did.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// Written unless the config itself was rejected.
    pub manifest: Option<RunManifest>,
    pub messages: Vec<String>,
}

impl RunOutcome {
    fn config_error(e: impl std::fmt::Display) -> Self {
        RunOutcome {
            exit_code: EXIT_CONFIG,
            manifest: None,
            messages: vec![format!("error: {e}")],
        }
    }
}

fn load(config_bytes: &[u8]) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let text = std::str::from_utf8(config_bytes).map_err(|e| ConfigError::Invalid(format!("not UTF-8: {e}")))?;
    let configs = config::parse_configs(text)?
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.validate(i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = BTreeSet::new();
    for (i, c) in configs.iter().enumerate() {
        let prefix = c.prefix(i);
        if prefix == MANIFEST_NAME.trim_end_matches(".json") || !seen.insert(prefix.clone()) {
            return Err(ConfigError::Invalid(format!("experiment {i}: output prefix `{prefix}` is already taken")));
        }
    }
    Ok(configs)
}

fn write_outputs(
    cfg: &ExperimentConfig,
    prefix: &str,
    out_dir: &Path,
    outcome: &runner::Outcome,
) -> std::io::Result<Vec<String>> {
    let mut files = Vec::new();
    if cfg.format.json() {
        let name = format!("{prefix}.json");
        let bytes = output::json_bytes(&outcome.json).map_err(std::io::Error::other)?;
        output::write_atomic(&out_dir.join(&name), &bytes)?;
        files.push(name);
    }
    if cfg.format.csv() {
        let name = format!("{prefix}.csv");
        output::write_atomic(&out_dir.join(&name), outcome.csv.as_bytes())?;
        files.push(name);
    }
    if cfg.plot {
        if let Some(v) = &outcome.plot {
            let name = format!("{prefix}.svg");
            heatmap::emit_heatmap(v, &out_dir.join(&name)).map_err(|e| match e {
                heatmap::HeatmapError::Io(e) => e,
                other => std::io::Error::other(other.to_string()),
            })?;
            files.push(name);
        }
    }
    Ok(files)
}

fn run_one(index: usize, cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> (ExperimentRecord, bool) {
    let prefix = cfg.prefix(index);
    let mut record = ExperimentRecord {
        index,
        kind: cfg.task.kind().to_string(),
        prefix: prefix.clone(),
        seed,
        status: Status::Error,
        message: None,
        files: vec![],
    };
    let mut config_error = false;
    match runner::execute(cfg, seed) {
        Ok(outcome) => match write_outputs(cfg, &prefix, out_dir, &outcome) {
            Ok(files) => {
                record.files = files;
                record.status = if outcome.passed { Status::Passed } else { Status::Failed };
            }
            Err(e) => record.message = Some(format!("writing outputs: {e}")),
        },
        Err(e) => {
            config_error = matches!(e, ExecError::Config(_));
            record.message = Some(e.to_string());
        }
    }
    (record, config_error)
}

/// Runs every experiment in `config_bytes`, writing results and
/// `manifest.json` into `out_dir`.
///
/// `seed_override` replaces all experiment seeds. `jobs` caps the number of
/// experiments evaluated at once (default: all cores).
pub fn run(config_bytes: &[u8], out_dir: &Path, jobs: Option<usize>, seed_override: Option<u64>) -> RunOutcome {
    let configs = match load(config_bytes) {
        Ok(c) => c,
        Err(e) => return RunOutcome::config_error(e),
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        return RunOutcome::config_error(format!("cannot create {}: {e}", out_dir.display()));
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return RunOutcome::config_error(format!("thread pool: {e}")),
    };
    let results: Vec<(ExperimentRecord, bool)> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, cfg)| run_one(i, cfg, cfg.effective_seed(seed_override), out_dir))
            .collect()
    });
    let any_config = results.iter().any(|(_, c)| *c);
    let records: Vec<ExperimentRecord> = results.into_iter().map(|(r, _)| r).collect();
    let messages = records
        .iter()
        .map(|r| {
            let status = match r.status {
                Status::Passed => "PASS",
                Status::Failed => "FAIL",
                Status::Error => "ERROR",
            };
            match &r.message {
                Some(m) => format!("[{status}] {} ({}): {m}", r.prefix, r.kind),
                None => format!("[{status}] {} ({})", r.prefix, r.kind),
            }
        })
        .collect();
    let exit_code = if any_config {
        EXIT_CONFIG
    } else if records.iter().all(|r| r.status == Status::Passed) {
        EXIT_OK
    } else {
        EXIT_FAILED
    };
    let manifest = RunManifest::new(config_bytes, seed_override, records);
    let mut outcome = RunOutcome {
        exit_code,
        manifest: None,
        messages,
    };
    match output::json_bytes(&manifest)
        .map_err(std::io::Error::other)
        .and_then(|b| output::write_atomic(&out_dir.join(MANIFEST_NAME), &b))
    {
        Ok(()) => outcome.manifest = Some(manifest),
        Err(e) => {
            outcome.messages.push(format!("error: writing manifest: {e}"));
            outcome.exit_code = outcome.exit_code.max(EXIT_FAILED);
        }
    }
    outcome
}

/// [`run`] on a file, with the seed override read from the environment.
pub fn run_path(config_path: &Path, out_dir: &Path, jobs: Option<usize>) -> RunOutcome {
    let bytes = match std::fs::read(config_path) {
        Ok(b) => b,
        Err(e) => return RunOutcome::config_error(format!("cannot read {}: {e}", config_path.display())),
    };
    match config::env_seed() {
        Ok(seed) => run(&bytes, out_dir, jobs, seed),
        Err(e) => RunOutcome::config_error(e),
    }
}

#[derive(Debug, Parser)]
#[command(name = "gabmod", version, about = "Modulation-space and Gabor frame experiments on finite grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiments in a JSON config file.
    Run {
        config: PathBuf,
        /// Maximum number of experiments evaluated at once.
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: Option<u16>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the JSON schema of config files.
    Schema,
    /// Run the acceptance suite.
    Verify {
        /// Use the suite shipped with the tool (currently the only one).
        #[arg(long)]
        builtin: bool,
        /// Restrict to these criterion numbers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run { config, jobs, out } => {
            let outcome = run_path(&config, &out, jobs.map(usize::from));
            for m in &outcome.messages {
                eprintln!("{m}");
            }
            outcome.exit_code
        }
        Command::Schema => match serde_json::to_string_pretty(&schema::config_schema()) {
            Ok(s) => {
                println!("{s}");
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAILED
            }
        },
        Command::Verify { builtin, only } => {
            if !builtin {
                eprintln!("error: only the built-in suite is available; pass --builtin");
                return EXIT_CONFIG;
            }
            let results = acceptance::run_selected(&only);
            for r in &results {
                println!("{}", r.line());
            }
            if results.iter().all(|r| r.passed) {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
    }
}
