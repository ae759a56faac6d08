//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! law = pareto:4.5
//! truncate = D=1,kappa=0.5
//! n_values = 100, 200, 400
//! replicas_per_n = 2000
//! base_seed = 7
//! grid = 21x8
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::entry_laws::{EntryLaw, TruncationSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
}

/// Canonical key names; aliases map onto these.
pub const KEYS: &[&str] = &[
    "law",
    "truncate",
    "d_const",
    "kappa",
    "n_values",
    "replicas_per_n",
    "base_seed",
    "grid",
    "a0",
    "a",
    "output_dir",
    "threads",
    "z",
    "q",
    "matrices",
];

pub fn canonical_key(raw: &str) -> Option<&'static str> {
    let k = raw.trim().to_ascii_lowercase().replace('-', "_");
    let k = match k.as_str() {
        "n" => "n_values",
        "replicas" => "replicas_per_n",
        "seed" => "base_seed",
        "out" => "output_dir",
        "trunc" | "truncation" => "truncate",
        "a_param" => "a",
        "d" => "d_const",
        other => other,
    };
    KEYS.iter().copied().find(|&c| c == k)
}

/// Ordered raw settings; later inserts override earlier ones.
pub type Settings = BTreeMap<&'static str, String>;

pub fn parse_settings(text: &str) -> Result<Settings, ConfigError> {
    let mut out = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let key = canonical_key(k).ok_or_else(|| ConfigError::UnknownKey(k.trim().to_string()))?;
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn bad(key: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), reason: reason.to_string() }
}

pub fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| bad(key, e))
}

pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_scalar(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, "empty list"));
    }
    Ok(items)
}

pub fn parse_grid(value: &str) -> Result<(usize, usize), ConfigError> {
    let (u, v) = value.trim().split_once(['x', 'X']).ok_or_else(|| bad("grid", "expected <n_u>x<n_v>"))?;
    Ok((parse_scalar("grid", u)?, parse_scalar("grid", v)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(serialize_with = "as_display")]
    pub law: EntryLaw,
    #[serde(serialize_with = "opt_as_display")]
    pub trunc: Option<TruncationSpec>,
    pub n_values: Vec<usize>,
    pub replicas_per_n: Vec<usize>,
    pub base_seed: u64,
    pub grid: (usize, usize),
    pub a0: f64,
    pub a: f64,
    pub output_dir: PathBuf,
    pub threads: usize,
}

fn as_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn opt_as_display<T: std::fmt::Display, S: serde::Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl ExperimentConfig {
    pub fn new(law: EntryLaw) -> Self {
        Self {
            law,
            trunc: None,
            n_values: vec![100, 200, 400],
            replicas_per_n: vec![1000; 3],
            base_seed: 0,
            grid: (21, 8),
            a0: 2.0,
            a: 1.0,
            output_dir: PathBuf::from("."),
            threads: default_threads(),
        }
    }

    /// Builds a config from settings. `default_law` is used when `law` is
    /// absent; without either the result is [`ConfigError::Missing`].
    pub fn from_settings(settings: &Settings, default_law: Option<EntryLaw>) -> Result<Self, ConfigError> {
        let law = match settings.get("law") {
            Some(v) => v.parse().map_err(|e| bad("law", e))?,
            None => default_law.ok_or(ConfigError::Missing("law"))?,
        };
        let mut cfg = Self::new(law);
        cfg.trunc = truncation_from(settings)?;
        if let Some(v) = settings.get("n_values") {
            cfg.n_values = parse_list("n_values", v)?;
        }
        cfg.replicas_per_n = match settings.get("replicas_per_n") {
            Some(v) => parse_list("replicas_per_n", v)?,
            None => vec![1000],
        };
        if cfg.replicas_per_n.len() == 1 {
            cfg.replicas_per_n = vec![cfg.replicas_per_n[0]; cfg.n_values.len()];
        }
        if let Some(v) = settings.get("base_seed") {
            cfg.base_seed = parse_scalar("base_seed", v)?;
        }
        if let Some(v) = settings.get("grid") {
            cfg.grid = parse_grid(v)?;
        }
        if let Some(v) = settings.get("a0") {
            cfg.a0 = parse_scalar("a0", v)?;
        }
        if let Some(v) = settings.get("a") {
            cfg.a = parse_scalar("a", v)?;
        }
        if let Some(v) = settings.get("output_dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some(v) = settings.get("threads") {
            cfg.threads = parse_scalar("threads", v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_values.is_empty() || self.n_values[0] == 0 {
            return Err(bad("n_values", "dimensions must be positive"));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("n_values", "must be strictly increasing"));
        }
        if self.replicas_per_n.len() != self.n_values.len() {
            return Err(bad("replicas_per_n", "length must match n_values (or be a single value)"));
        }
        if self.replicas_per_n.contains(&0) {
            return Err(bad("replicas_per_n", "must be positive"));
        }
        if self.grid.0 < 2 || self.grid.1 < 2 {
            return Err(bad("grid", "both sizes must be at least 2"));
        }
        if !(self.a0 > 0.0 && self.a > 0.0) {
            return Err(bad("a0", "domain constants must be positive"));
        }
        if self.threads == 0 {
            return Err(bad("threads", "must be at least 1"));
        }
        Ok(())
    }

    /// Seed of replica `replica` at position `n_index` in `n_values`.
    pub fn replica_seed(&self, n_index: usize, replica: usize) -> u64 {
        self.base_seed ^ ((n_index as u64) << 32) ^ replica as u64
    }
}

/// `truncate` gives the full spec; `d_const` / `kappa` override its parts
/// (and alone enable truncation with the other part at its default).
fn truncation_from(settings: &Settings) -> Result<Option<TruncationSpec>, ConfigError> {
    let base = match settings.get("truncate").map(|s| s.trim()) {
        None | Some("none") | Some("off") => None,
        Some(v) => Some(v.parse::<TruncationSpec>().map_err(|e| bad("truncate", e))?),
    };
    let d = settings.get("d_const").map(|v| parse_scalar::<f64>("d_const", v)).transpose()?;
    let k = settings.get("kappa").map(|v| parse_scalar::<f64>("kappa", v)).transpose()?;
    if base.is_none() && d.is_none() && k.is_none() {
        return Ok(None);
    }
    let base = base.unwrap_or_default();
    TruncationSpec::new(d.unwrap_or(base.d_const()), k.unwrap_or(base.kappa()))
        .map(Some)
        .map_err(|e| bad("truncate", e))
}
