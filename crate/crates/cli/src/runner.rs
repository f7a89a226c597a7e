//! Executes a configuration on a dedicated thread pool and writes its files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use tci_lab::SeededRng;

use crate::config::{ExperimentConfig, Params};
use crate::error::RunError;
use crate::experiments;
use crate::report::Outcome;

pub const VERSION: &str = env!("LAB_VERSION");

#[derive(Debug)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub report_path: PathBuf,
    pub meta_path: PathBuf,
    pub wall_seconds: f64,
}

impl RunSummary {
    pub fn holds(&self) -> bool {
        self.outcome.holds()
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Runs the experiment without touching the file system.
pub fn execute(config: &ExperimentConfig) -> Result<Outcome, RunError> {
    let experiment = experiments::find(&config.experiment)?;
    let threads = config.resolved_threads()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Config(format!("cannot build thread pool: {e}")))?;
    let params = Params::new(&config.params);
    let rng = SeededRng::new(config.seed, 0);
    pool.install(|| (experiment.run)(&params, rng))
}

/// Runs the experiment and writes `<prefix>.report.csv`, any auxiliary
/// tables and `<prefix>.meta.json`. Nothing is written on error.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    let outcome = execute(config)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let prefix = config.output_prefix();
    let report_path = with_suffix(&prefix, ".report.csv");
    let meta_path = with_suffix(&prefix, ".meta.json");
    let mut files = vec![(report_path.clone(), outcome.report.to_csv_string()?)];
    for (suffix, table) in &outcome.extra {
        files.push((with_suffix(&prefix, &format!(".{suffix}.csv")), table.to_csv_string()?));
    }
    let meta = json!({
        "config": config,
        "version": VERSION,
        "wall_time_seconds": wall_seconds,
        "threads": config.resolved_threads()?,
        "status": if outcome.holds() { "pass" } else { "property_failure" },
        "properties": outcome.properties,
        "measurements": outcome.measurements,
    });
    files.push((meta_path.clone(), serde_json::to_string_pretty(&meta)? + "\n"));
    for (path, body) in &files {
        fs::write(path, body).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(RunSummary {
        outcome,
        report_path,
        meta_path,
        wall_seconds,
    })
}
