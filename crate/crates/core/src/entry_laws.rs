//! Entry distributions for Wigner matrices and the truncation operator.
//!
//! Every law here is symmetric about zero with unit variance. Sampling is
//! driven by a caller-owned generator so that each replica stream stays
//! independent.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};
use statrs::function::erf::erf;
use thiserror::Error;

/// Smallest standard deviation a truncated law may have before it is
/// rejected as degenerate.
pub const MIN_TRUNCATED_SD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("pareto tail exponent must exceed 4, got {0}")]
    TailTooHeavy(f64),
    #[error("unknown law specification `{0}` (expected rademacher, gaussian or pareto:<beta>)")]
    UnknownLaw(String),
    #[error("invalid truncation specification `{0}` (expected D=<d>,kappa=<k>)")]
    BadTruncation(String),
    #[error("truncation constant D must be positive, got {0}")]
    NonpositiveD(f64),
    #[error("kappa must lie in (0, 4], got {0}")]
    KappaOutOfRange(f64),
    #[error(
        "degenerate truncation: threshold {threshold} leaves standard deviation {sd:e} (< {MIN_TRUNCATED_SD:e})"
    )]
    DegenerateTruncation { threshold: f64, sd: f64 },
}

/// The family an [`EntryLaw`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawKind {
    Rademacher,
    Gaussian,
    /// `S * Y` with `S` a fair sign and `Y` Pareto with scale `y0` and shape
    /// `beta`; `y0` is fixed by the unit-variance constraint.
    SymmetrizedPareto { beta: f64, y0: f64 },
}

/// A zero-mean, unit-variance scalar law. Immutable once constructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryLaw {
    kind: LawKind,
}

impl EntryLaw {
    pub fn rademacher() -> Self {
        Self { kind: LawKind::Rademacher }
    }

    pub fn gaussian() -> Self {
        Self { kind: LawKind::Gaussian }
    }

    /// Symmetrized Pareto with tail exponent `beta > 4`.
    pub fn pareto(beta: f64) -> Result<Self, LawError> {
        if !(beta.is_finite() && beta > 4.0) {
            return Err(LawError::TailTooHeavy(beta));
        }
        let y0 = ((beta - 2.0) / beta).sqrt();
        Ok(Self { kind: LawKind::SymmetrizedPareto { beta, y0 } })
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            LawKind::SymmetrizedPareto { beta, .. } => Some(beta),
            _ => None,
        }
    }

    /// Lower support bound of `|X|` for the Pareto law, `None` otherwise.
    pub fn y0(&self) -> Option<f64> {
        match self.kind {
            LawKind::SymmetrizedPareto { y0, .. } => Some(y0),
            _ => None,
        }
    }

    /// Largest moment excess `kappa` (capped at 4) for which `E|X|^(4+kappa)`
    /// is finite, backed off by a margin for the Pareto law.
    pub fn admissible_kappa(&self) -> f64 {
        match self.kind {
            LawKind::Rademacher | LawKind::Gaussian => 4.0,
            LawKind::SymmetrizedPareto { beta, .. } => {
                let slack = beta - 4.0;
                let margin = (slack / 2.0).min(0.1);
                (slack - margin).min(4.0)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            LawKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            LawKind::Gaussian => StandardNormal.sample(rng),
            LawKind::SymmetrizedPareto { beta, y0 } => {
                // scale and shape are validated at construction
                let magnitude: f64 = Pareto::new(y0, beta).expect("valid pareto").sample(rng);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }

    /// `E|X|^q`, or `f64::INFINITY` when the moment diverges.
    pub fn analytic_moment(&self, q: f64) -> f64 {
        assert!(q >= 0.0, "moment order must be nonnegative");
        match self.kind {
            LawKind::Rademacher => 1.0,
            // E|Z|^q = 2^(q/2) Gamma((q+1)/2) / sqrt(pi)
            LawKind::Gaussian => {
                let ln = 0.5 * q * std::f64::consts::LN_2 + statrs::function::gamma::ln_gamma((q + 1.0) / 2.0)
                    - 0.5 * std::f64::consts::PI.ln();
                ln.exp()
            }
            LawKind::SymmetrizedPareto { beta, y0 } => {
                if q >= beta {
                    f64::INFINITY
                } else {
                    beta * y0.powf(q) / (beta - q)
                }
            }
        }
    }

    /// `E[X^2 ; |X| <= t]`, in closed form for every supported law.
    pub fn truncated_second_moment(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.kind {
            LawKind::Rademacher => {
                if t >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LawKind::Gaussian => {
                if !t.is_finite() {
                    return 1.0;
                }
                let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
                (erf(t / std::f64::consts::SQRT_2) - 2.0 * t * phi).max(0.0)
            }
            LawKind::SymmetrizedPareto { beta, y0 } => {
                if t < y0 {
                    0.0
                } else {
                    1.0 - (y0 / t).powf(beta - 2.0)
                }
            }
        }
    }
}

impl fmt::Display for EntryLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LawKind::Rademacher => f.write_str("rademacher"),
            LawKind::Gaussian => f.write_str("gaussian"),
            LawKind::SymmetrizedPareto { beta, .. } => write!(f, "pareto:{beta}"),
        }
    }
}

impl FromStr for EntryLaw {
    type Err = LawError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "rademacher" => Ok(Self::rademacher()),
            "gaussian" => Ok(Self::gaussian()),
            _ => {
                let beta = t
                    .strip_prefix("pareto:")
                    .and_then(|b| b.trim().parse::<f64>().ok())
                    .ok_or_else(|| LawError::UnknownLaw(s.to_string()))?;
                Self::pareto(beta)
            }
        }
    }
}

/// Truncation at `D * n^alpha` with `alpha = 2 / (4 + kappa)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    d_const: f64,
    kappa: f64,
    alpha: f64,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self::new(1.0, 0.5).expect("default constants are valid")
    }
}

impl TruncationSpec {
    pub fn new(d_const: f64, kappa: f64) -> Result<Self, LawError> {
        if !(d_const.is_finite() && d_const > 0.0) {
            return Err(LawError::NonpositiveD(d_const));
        }
        if !(kappa > 0.0 && kappa <= 4.0) {
            return Err(LawError::KappaOutOfRange(kappa));
        }
        Ok(Self { d_const, kappa, alpha: 2.0 / (4.0 + kappa) })
    }

    pub fn d_const(&self) -> f64 {
        self.d_const
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn threshold(&self, n: usize) -> f64 {
        self.d_const * (n as f64).powf(self.alpha)
    }
}

impl fmt::Display for TruncationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D={},kappa={}", self.d_const, self.kappa)
    }
}

impl FromStr for TruncationSpec {
    type Err = LawError;

    /// Parses `D=<d>,kappa=<k>`; either key may be omitted to take its default.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LawError::BadTruncation(s.to_string());
        let defaults = Self::default();
        let (mut d, mut kappa) = (defaults.d_const, defaults.kappa);
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            let value: f64 = value.trim().parse().map_err(|_| bad())?;
            match key.trim().to_ascii_lowercase().as_str() {
                "d" => d = value,
                "kappa" | "k" => kappa = value,
                _ => return Err(bad()),
            }
        }
        Self::new(d, kappa)
    }
}

/// The law of `X 1{|X| <= D n^alpha}`, rescaled to unit variance.
///
/// All supported laws are symmetric, so the truncated variable is already
/// centred and only the scale needs correcting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedLaw {
    law: EntryLaw,
    threshold: f64,
    sd: f64,
}

impl TruncatedLaw {
    pub fn new(law: EntryLaw, spec: &TruncationSpec, n: usize) -> Result<Self, LawError> {
        assert!(n >= 1, "dimension must be positive");
        let threshold = spec.threshold(n);
        let sd = law.truncated_second_moment(threshold).sqrt();
        if !(sd >= MIN_TRUNCATED_SD) {
            return Err(LawError::DegenerateTruncation { threshold, sd });
        }
        Ok(Self { law, threshold, sd })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Standard deviation of the truncated (not yet rescaled) variable.
    pub fn raw_sd(&self) -> f64 {
        self.sd
    }

    /// Hard upper bound on the magnitude of every sample.
    pub fn magnitude_bound(&self) -> f64 {
        self.threshold / self.sd
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.law.sample(rng);
        let kept = if x.abs() <= self.threshold { x } else { 0.0 };
        let out = kept / self.sd;
        assert!(out.abs() <= self.magnitude_bound(), "truncated sample exceeds its bound");
        out
    }
}

/// One draw from the truncated, re-standardized law at dimension `n`.
///
/// Builds the truncated law on every call; use [`TruncatedLaw`] directly
/// inside loops.
pub fn truncate_standardize<R: Rng + ?Sized>(
    law: &EntryLaw,
    spec: &TruncationSpec,
    n: usize,
    rng: &mut R,
) -> Result<f64, LawError> {
    Ok(TruncatedLaw::new(*law, spec, n)?.sample(rng))
}

/// Either a plain law or its truncated version; what the ensemble samples from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntrySampler {
    Plain(EntryLaw),
    Truncated(TruncatedLaw),
}

impl EntrySampler {
    pub fn new(law: EntryLaw, trunc: Option<&TruncationSpec>, n: usize) -> Result<Self, LawError> {
        match trunc {
            None => Ok(Self::Plain(law)),
            Some(spec) => Ok(Self::Truncated(TruncatedLaw::new(law, spec, n)?)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Plain(law) => law.sample(rng),
            Self::Truncated(t) => t.sample(rng),
        }
    }
}
