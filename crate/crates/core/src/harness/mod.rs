//! Ensemble orchestration: configuration, deterministic parallel execution,
//! aggregation and persistence.
//!
//! Path `i` is always driven by `derive_stream(seed, i)`. Paths run on a
//! bounded rayon pool and their results are collected in index order before
//! any reduction, so a summary does not depend on the number of workers.

mod config;
mod experiments;
mod persist;

pub use config::{ExperimentConfig, ExperimentKind, InitialCondition, Overrides, Scheme};
pub use persist::{load, persist, CONFIG_FILE, RUNTIME_FILE, SERIES_FILE, SUMMARY_FILE};

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config as config_error, Result};
use crate::martingale_checks::CheckReport;
use crate::stats::{Float, FunctionalStats};

/// Relative tolerance of the realized against the accumulated quadratic
/// variation of the total mass, in ensemble mean.
pub const QV_AGREEMENT_TOLERANCE: f64 = 0.05;

/// Significance level of the Kolmogorov–Smirnov checks.
pub const KS_LEVEL: f64 = 0.01;

/// Execution options that do not change results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl RunOptions {
    pub fn workers(workers: usize) -> Self {
        Self { workers }
    }
}

/// A small table of derived numbers (trend tables, histograms, ladders).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Float>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row.iter().map(|&v| Float(v)).collect());
    }

    /// Values of one column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j].0).collect())
    }
}

/// One sampled value of one functional of one path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesRow {
    pub path_index: usize,
    /// Index into [`EnsembleSummary::series_functionals`].
    pub functional: usize,
    pub time: f64,
    pub value: f64,
}

/// Facts about the run that are not part of the reproducible result.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    pub workers: usize,
    pub elapsed_seconds: f64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub paths: usize,
    /// No non-informational check failed.
    pub passed: bool,
    pub statistics: BTreeMap<String, FunctionalStats>,
    pub checks: Vec<CheckReport>,
    pub tables: Vec<Table>,
    /// Paths that produced a non-finite value.
    pub explosions: usize,
    /// Paths absorbed at zero.
    pub absorbed: usize,
    pub series_functionals: Vec<String>,
    pub series_rows: usize,
    /// SHA-256 of the per-path series.
    pub series_digest: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    /// SHA-256 of this summary's JSON with this field empty.
    pub content_hash: String,
    #[serde(skip)]
    pub series: Vec<SeriesRow>,
    #[serde(skip)]
    pub runtime: RuntimeInfo,
}

impl EnsembleSummary {
    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summaries are plain data")
    }

    pub fn compute_content_hash(&self) -> String {
        let mut blank = self.clone();
        blank.content_hash.clear();
        hex::encode(Sha256::digest(blank.to_json().as_bytes()))
    }

    /// Rows of one functional, in path order.
    pub fn series_of(&self, functional: &str) -> Vec<SeriesRow> {
        match self.series_functionals.iter().position(|f| f == functional) {
            Some(id) => self.series.iter().filter(|r| r.functional == id).copied().collect(),
            None => Vec::new(),
        }
    }
}

pub(crate) fn series_digest(rows: &[SeriesRow]) -> String {
    let mut h = Sha256::new();
    for r in rows {
        h.update((r.path_index as u64).to_le_bytes());
        h.update((r.functional as u64).to_le_bytes());
        h.update(r.time.to_bits().to_le_bytes());
        h.update(r.value.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Bounded worker pool mapping path indices to results in index order.
pub(crate) struct Pool(rayon::ThreadPool);

impl Pool {
    fn new(workers: usize) -> Result<Self> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map(Pool)
            .map_err(|e| config_error(format!("cannot start {workers} workers: {e}")))
    }

    pub(crate) fn map<R, F>(&self, n: usize, f: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(usize) -> Result<R> + Sync + Send,
    {
        self.0.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Runs every path of `config` and aggregates the results.
pub fn run_ensemble(config: &ExperimentConfig, options: &RunOptions) -> Result<EnsembleSummary> {
    config.validate()?;
    if options.workers == 0 {
        return Err(config_error("workers must be at least 1"));
    }
    let start = Instant::now();
    let pool = Pool::new(options.workers)?;
    let out = experiments::run(config, &pool)?;
    let passed = !out.checks.iter().any(CheckReport::is_failure);
    let mut summary = EnsembleSummary {
        kind: config.kind,
        seed: config.seed,
        paths: config.paths,
        passed,
        statistics: out.statistics,
        checks: out.checks,
        tables: out.tables,
        explosions: out.explosions,
        absorbed: out.absorbed,
        series_rows: out.series.rows.len(),
        series_digest: series_digest(&out.series.rows),
        series_functionals: out.series.names,
        config: config.clone(),
        config_hash: config.hash(),
        content_hash: String::new(),
        series: out.series.rows,
        runtime: RuntimeInfo {
            workers: options.workers,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    summary.content_hash = summary.compute_content_hash();
    Ok(summary)
}
