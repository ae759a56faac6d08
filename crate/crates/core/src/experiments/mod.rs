//! Monte-Carlo sweeps over dimensions, rate fitting and persisted reports.
//!
//! Every sweep is deterministic: replica `r` at dimension index `i` is
//! seeded with `base_seed ^ (i << 32) ^ r`, workers collect in replica
//! order, and outputs are written through a temporary file and renamed into
//! place.

mod config;
mod inequality;
mod sweeps;

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::ensemble::EnsembleError;
use crate::entry_laws::LawError;
use crate::resolvent_lab::{IdentityReport, ResolventError};
use crate::spectral::SpectralError;
use crate::stieltjes::StieltjesError;

pub use config::{
    canonical_key, default_threads, parse_grid, parse_list, parse_scalar, parse_settings, ConfigError, ExperimentConfig,
    Settings, KEYS,
};
pub use inequality::{run_inequality_sweep, InequalityRow};
pub use sweeps::{
    bootstrap_stderr, run_delta_sweep, run_stieltjes_sweep, DeltaRow, DeltaSweep, StieltjesRow, StieltjesSweep,
    BOOTSTRAP_RESAMPLES,
};

/// Version tag written into every JSON summary.
pub const SUMMARY_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("delta at n = {n} is {delta}; log-log fit needs positive values")]
    NonpositiveDelta { n: usize, delta: f64 },
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Stieltjes(#[from] StieltjesError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ExperimentError::ThreadPool(e.to_string()))
}

/// Ordinary least squares of `log delta` on `log n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

impl RateFit {
    pub fn contains_slope(&self, lo: f64, hi: f64) -> bool {
        (lo..=hi).contains(&self.slope)
    }
}

pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateFit, ExperimentError> {
    if points.len() < 3 {
        return Err(ExperimentError::TooFewPoints(points.len()));
    }
    if let Some(&(n, delta)) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(ExperimentError::NonpositiveDelta { n, delta });
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, d)| ((n as f64).ln(), d.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_stderr = (sse / (k - 2.0) / sxx).sqrt();
    Ok(RateFit { points: logs, slope, intercept, slope_stderr })
}

/// Writes `bytes` to `path` atomically: a temporary file in the same
/// directory is filled, flushed and then renamed over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Serializes rows (header from field names) and writes them atomically.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Debug, Serialize)]
struct DeltaSummary<'a> {
    schema: u32,
    kind: &'static str,
    config: &'a ExperimentConfig,
    bootstrap_resamples: usize,
    rows: &'a [DeltaRow],
    fit: Option<&'a RateFit>,
    fit_error: Option<String>,
    insufficient_replicas: Vec<usize>,
    note: &'static str,
}

const RATE_NOTE: &str = "No lower bound on the Kolmogorov distance is known; a slope near -1 is \
empirical evidence that the rate is attained for this law, not a proof of sharpness.";

/// Writes `delta_scan.csv` and `summary.json` under `cfg.output_dir`.
pub fn write_delta_outputs(cfg: &ExperimentConfig, sweep: &DeltaSweep) -> Result<(), ExperimentError> {
    let dir = &cfg.output_dir;
    write_csv(&dir.join("delta_scan.csv"), &sweep.rows)?;
    let summary = DeltaSummary {
        schema: SUMMARY_SCHEMA,
        kind: "delta_sweep",
        config: cfg,
        bootstrap_resamples: BOOTSTRAP_RESAMPLES,
        rows: &sweep.rows,
        fit: sweep.fit.as_ref().ok(),
        fit_error: sweep.fit.as_ref().err().map(|e| e.to_string()),
        insufficient_replicas: sweep.insufficient_replicas(),
        note: RATE_NOTE,
    };
    write_json(&dir.join("summary.json"), &summary)
}

#[derive(Debug, Serialize)]
struct StieltjesSummary<'a> {
    schema: u32,
    kind: &'static str,
    config: &'a ExperimentConfig,
    c_hat: &'a [(usize, f64)],
    c_hat_ratios: Vec<f64>,
}

/// Writes `stieltjes_scan.csv` and `stieltjes_summary.json`.
pub fn write_stieltjes_outputs(cfg: &ExperimentConfig, sweep: &StieltjesSweep) -> Result<(), ExperimentError> {
    let dir = &cfg.output_dir;
    write_csv(&dir.join("stieltjes_scan.csv"), &sweep.rows)?;
    let summary = StieltjesSummary {
        schema: SUMMARY_SCHEMA,
        kind: "stieltjes_sweep",
        config: cfg,
        c_hat: &sweep.c_hat,
        c_hat_ratios: sweep.c_hat_ratios(),
    };
    write_json(&dir.join("stieltjes_summary.json"), &summary)
}

/// One line of `identity_report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub n: usize,
    pub seed: u64,
    pub u: f64,
    pub v: f64,
    pub max_residual_schur: f64,
    pub max_residual_rjj1: f64,
    pub max_eps4_ratio: f64,
    pub residual_73: f64,
    pub residual_lambda: f64,
}

impl IdentityRow {
    pub fn from_report(seed: u64, report: &IdentityReport) -> Self {
        Self {
            n: report.n,
            seed,
            u: report.z.re,
            v: report.z.im,
            max_residual_schur: report.max_residual_schur,
            max_residual_rjj1: report.max_residual_rjj1,
            max_eps4_ratio: report.max_eps4_ratio,
            residual_73: report.residual_73,
            residual_lambda: report.residual_lambda,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(usize, f64)> = [100, 200, 400].iter().map(|&n| (n, 1.0 / n as f64)).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() <= 1e-9);
        assert!(fit.slope_stderr <= 1e-9);
    }

    #[test]
    fn constant_delta_has_zero_slope() {
        let fit = fit_rate(&[(100, 0.3), (200, 0.3), (400, 0.3)]).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn mixture_slope_between() {
        let pts: Vec<(usize, f64)> =
            [100, 200, 400].iter().map(|&n| (n, 1.0 / n as f64 + 0.3 / (n as f64).sqrt())).collect();
        let slope = fit_rate(&pts).unwrap().slope;
        // independent two-point slopes bracket the fit
        let f = |n: f64| (1.0 / n + 0.3 / n.sqrt()).ln();
        let s1 = (f(200.0) - f(100.0)) / 2f64.ln();
        let s2 = (f(400.0) - f(200.0)) / 2f64.ln();
        assert!(slope > -1.0 && slope < -0.5);
        assert!(slope >= s1.min(s2) && slope <= s1.max(s2));
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_rate(&[(100, 0.1)]), Err(ExperimentError::TooFewPoints(1))));
        assert!(matches!(
            fit_rate(&[(1, 0.1), (2, 0.0), (3, 0.1)]),
            Err(ExperimentError::NonpositiveDelta { n: 2, .. })
        ));
    }

    #[test]
    fn atomic_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("x.csv");
        write_atomic(&path, b"a\n").unwrap();
        write_atomic(&path, b"b\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"b\n");
        let names: Vec<_> = std::fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }
}
