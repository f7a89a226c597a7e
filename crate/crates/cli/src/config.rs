//! Experiment configuration and typed access to its parameter map.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::RunError;

/// Environment variable that overrides the configured thread count.
pub const THREADS_ENV: &str = "LAB_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub seed: u64,
    /// Output path prefix; defaults to the experiment name in the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(format!("malformed config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn output_prefix(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from(&self.experiment))
    }

    /// Thread count after applying [`THREADS_ENV`]; `0` means all cores.
    pub fn resolved_threads(&self) -> Result<usize, RunError> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| RunError::Config(format!("{THREADS_ENV}={v} is not a thread count"))),
            Err(_) => Ok(self.threads.unwrap_or(0)),
        }
    }
}

/// Read-once view of the `params` map; [`Params::finish`] rejects keys no
/// accessor asked for.
pub struct Params<'a> {
    map: &'a Map<String, Value>,
    used: Mutex<BTreeSet<String>>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> RunError {
    RunError::Config(format!("parameter `{key}`: {msg}"))
}

impl<'a> Params<'a> {
    pub fn new(map: &'a Map<String, Value>) -> Self {
        Self {
            map,
            used: Mutex::new(BTreeSet::new()),
        }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.used.lock().unwrap_or_else(|e| e.into_inner()).insert(key.to_string());
        self.map.get(key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn value<T: DeserializeOwned>(&self, key: &str, default: T) -> Result<T, RunError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| bad(key, e)),
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, RunError> {
        let v: f64 = self.value(key, default)?;
        if v.is_nan() {
            return Err(bad(key, "must be a number"));
        }
        Ok(v)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, RunError> {
        self.value(key, default)
    }

    pub fn string(&self, key: &str, default: &str) -> Result<String, RunError> {
        self.value(key, default.to_string())
    }

    /// Number in `[lo, hi]`.
    pub fn f64_in(&self, key: &str, default: f64, lo: f64, hi: f64) -> Result<f64, RunError> {
        let v = self.f64(key, default)?;
        if !(lo..=hi).contains(&v) {
            return Err(bad(key, format!("{v} not in [{lo}, {hi}]")));
        }
        Ok(v)
    }

    /// Integer in `[lo, hi]`.
    pub fn usize_in(&self, key: &str, default: usize, lo: usize, hi: usize) -> Result<usize, RunError> {
        let v = self.usize(key, default)?;
        if !(lo..=hi).contains(&v) {
            return Err(bad(key, format!("{v} not in [{lo}, {hi}]")));
        }
        Ok(v)
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, RunError> {
        let v: Vec<f64> = self.value(key, default.to_vec())?;
        if v.is_empty() {
            return Err(bad(key, "list must not be empty"));
        }
        Ok(v)
    }

    pub fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, RunError> {
        let v: Vec<usize> = self.value(key, default.to_vec())?;
        if v.is_empty() {
            return Err(bad(key, "list must not be empty"));
        }
        Ok(v)
    }

    /// One of `choices`.
    pub fn choice(&self, key: &str, default: &str, choices: &[&str]) -> Result<String, RunError> {
        let v = self.string(key, default)?;
        if !choices.contains(&v.as_str()) {
            return Err(bad(key, format!("`{v}` is not one of {choices:?}")));
        }
        Ok(v)
    }

    /// Piecewise-linear path as `[[t, v1, .., vd], ..]` breakpoints.
    pub fn breakpoints(&self, key: &str) -> Result<Option<Vec<(f64, Vec<f64>)>>, RunError> {
        let Some(rows) = self.value::<Option<Vec<Vec<f64>>>>(key, None)? else {
            return Ok(None);
        };
        let dim = rows.first().map_or(0, |r| r.len().saturating_sub(1));
        if dim == 0 || rows.iter().any(|r| r.len() != dim + 1) {
            return Err(bad(key, "breakpoints must be rows [t, v1, .., vd] of equal length"));
        }
        Ok(Some(rows.into_iter().map(|r| (r[0], r[1..].to_vec())).collect()))
    }

    pub fn finish(&self) -> Result<(), RunError> {
        let used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        let unknown: Vec<&String> = self.map.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(RunError::Config(format!("unknown parameters {unknown:?}")))
        }
    }
}
