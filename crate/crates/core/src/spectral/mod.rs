//! Spectra, empirical spectral distributions and the semicircle law.

pub mod eigen;

use std::f64::consts::PI;

use thiserror::Error;

use crate::ensemble::WignerMatrix;
use crate::entry_laws::EntryLaw;

pub use eigen::{symmetric_eigenvalues, Tridiagonal};

/// Above this many pooled eigenvalues [`pool`] switches to a histogram.
pub const POOL_EXACT_LIMIT: usize = 10_000_000;
/// Bins of the fallback histogram on `[-HIST_RANGE, HIST_RANGE]`.
pub const HIST_BINS: usize = 100_000;
pub const HIST_RANGE: f64 = 3.0;
/// Worst-case increase of the Kolmogorov distance from binning: one bin
/// width, which dominates `bin width * max g`.
pub const HIST_DELTA_PENALTY: f64 = 2.0 * HIST_RANGE / HIST_BINS as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("QL iteration did not converge for eigenvalue {index} within {sweeps} sweeps")]
    NoConvergence { index: usize, sweeps: usize },
    #[error("cannot pool spectra of different dimensions ({0} vs {1})")]
    MixedDimensions(usize, usize),
    #[error("nothing to pool")]
    Empty,
    #[error("invalid step cdf: {0}")]
    InvalidCdf(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSource {
    pub n: usize,
    pub seed: u64,
    pub law: EntryLaw,
}

/// Eigenvalues of one matrix, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    source: Option<SpectrumSource>,
}

impl Spectrum {
    /// Wraps precomputed eigenvalues; they are sorted here.
    pub fn from_values(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self { eigenvalues, source: None }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn source(&self) -> Option<&SpectrumSource> {
        self.source.as_ref()
    }

    /// Largest relative violation of the trace and Frobenius sum rules
    /// against the matrix the spectrum came from.
    pub fn sum_rule_residual(&self, w: &WignerMatrix) -> f64 {
        let tr: f64 = self.eigenvalues.iter().sum();
        let fro: f64 = self.eigenvalues.iter().map(|x| x * x).sum();
        let fro_w = w.frobenius_sq();
        let scale = fro_w.sqrt().max(1.0);
        let r1 = (tr - w.trace()).abs() / (scale * w.n() as f64);
        let r2 = (fro - fro_w).abs() / fro_w.max(f64::MIN_POSITIVE);
        r1.max(r2)
    }
}

/// All eigenvalues of `w` (Householder tridiagonalization, then implicit QL).
pub fn eigenvalues(w: &WignerMatrix) -> Result<Spectrum, SpectralError> {
    let values = symmetric_eigenvalues(w.n(), w.as_slice())?;
    let source = w.provenance().map(|p| SpectrumSource { n: w.n(), seed: p.seed, law: p.law });
    Ok(Spectrum { eigenvalues: values, source })
}

/// Semicircle density `sqrt(4 - x^2) / (2 pi)` on `[-2, 2]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

/// Semicircle distribution function.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        let g = 0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI;
        g.clamp(0.0, 1.0)
    }
}

/// Right-continuous step distribution function with finitely many jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    jumps: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepCdf {
    /// From strictly increasing jump points and strictly increasing
    /// cumulative weights ending at 1.
    pub fn new(jumps: Vec<f64>, cumulative: Vec<f64>) -> Result<Self, SpectralError> {
        if jumps.is_empty() {
            return Err(SpectralError::Empty);
        }
        if jumps.len() != cumulative.len() {
            return Err(SpectralError::InvalidCdf("length mismatch"));
        }
        if jumps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SpectralError::InvalidCdf("jump points not strictly increasing"));
        }
        if cumulative.windows(2).any(|w| !(w[0] < w[1])) || !(cumulative[0] > 0.0) {
            return Err(SpectralError::InvalidCdf("weights not strictly increasing"));
        }
        if (cumulative[cumulative.len() - 1] - 1.0).abs() > 1e-9 {
            return Err(SpectralError::InvalidCdf("total mass is not 1"));
        }
        Ok(Self { jumps, cumulative })
    }

    /// From unsorted atoms with nonnegative masses summing to 1; equal
    /// atoms are merged.
    pub fn from_weighted(mut atoms: Vec<(f64, f64)>) -> Result<Self, SpectralError> {
        if atoms.is_empty() {
            return Err(SpectralError::Empty);
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mut jumps = Vec::with_capacity(atoms.len());
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for (x, w) in atoms {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            if jumps.last() == Some(&x) {
                *cumulative.last_mut().unwrap() = acc / total;
            } else {
                jumps.push(x);
                cumulative.push(acc / total);
            }
        }
        *cumulative.last_mut().ok_or(SpectralError::Empty)? = 1.0;
        Self::new(jumps, cumulative)
    }

    /// Equal mass at every value, duplicates merged. `values` must be sorted.
    fn from_sorted_uniform(values: &[f64]) -> Self {
        let total = values.len() as f64;
        let mut jumps = Vec::with_capacity(values.len());
        let mut cumulative = Vec::with_capacity(values.len());
        for (i, &x) in values.iter().enumerate() {
            let c = (i + 1) as f64 / total;
            if jumps.last() == Some(&x) {
                *cumulative.last_mut().unwrap() = c;
            } else {
                jumps.push(x);
                cumulative.push(c);
            }
        }
        Self { jumps, cumulative }
    }

    /// The empirical spectral distribution of one spectrum.
    pub fn from_spectrum(spec: &Spectrum) -> Self {
        Self::from_sorted_uniform(spec.eigenvalues())
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.jumps.partition_point(|&t| t <= x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }
}

/// `sup_x |F(x) - G(x)|`, exact: evaluated on both sides of every jump.
pub fn kolmogorov_distance(f: &StepCdf) -> f64 {
    let mut before = 0.0;
    let mut sup = 0.0f64;
    for (&t, &after) in f.jumps.iter().zip(&f.cumulative) {
        let g = semicircle_cdf(t);
        sup = sup.max((before - g).abs()).max((after - g).abs());
        before = after;
    }
    sup
}

/// Pools spectra into the estimator of the expected ESD (mass `1/(nR)` per
/// eigenvalue). Above [`POOL_EXACT_LIMIT`] values a [`HIST_BINS`]-bin
/// histogram on `[-3, 3]` is used instead; its jumps sit on right bin
/// edges, which can shift the Kolmogorov distance by at most
/// [`HIST_DELTA_PENALTY`].
pub fn pool(spectra: &[Spectrum]) -> Result<StepCdf, SpectralError> {
    let first = spectra.first().ok_or(SpectralError::Empty)?;
    let n = first.n();
    if n == 0 {
        return Err(SpectralError::Empty);
    }
    if let Some(bad) = spectra.iter().find(|s| s.n() != n) {
        return Err(SpectralError::MixedDimensions(n, bad.n()));
    }
    let total = n * spectra.len();
    if total > POOL_EXACT_LIMIT {
        return Ok(pool_histogram(spectra, total));
    }
    let mut all: Vec<f64> = Vec::with_capacity(total);
    for s in spectra {
        all.extend_from_slice(s.eigenvalues());
    }
    all.sort_unstable_by(f64::total_cmp);
    Ok(StepCdf::from_sorted_uniform(&all))
}

fn pool_histogram(spectra: &[Spectrum], total: usize) -> StepCdf {
    let width = 2.0 * HIST_RANGE / HIST_BINS as f64;
    let mut counts = vec![0u64; HIST_BINS];
    let mut above = 0u64;
    for x in spectra.iter().flat_map(|s| s.eigenvalues()) {
        if *x > HIST_RANGE {
            above += 1;
            continue;
        }
        let b = (((x + HIST_RANGE) / width).ceil() as isize - 1).clamp(0, HIST_BINS as isize - 1);
        counts[b as usize] += 1;
    }
    let mut jumps = Vec::new();
    let mut cumulative = Vec::new();
    let mut acc = 0u64;
    for (b, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        acc += c;
        jumps.push(-HIST_RANGE + (b + 1) as f64 * width);
        cumulative.push(acc as f64 / total as f64);
    }
    if above > 0 {
        let top = spectra.iter().flat_map(|s| s.eigenvalues()).fold(f64::MIN, |m, &x| m.max(x));
        jumps.push(top);
        cumulative.push(1.0);
    }
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    StepCdf { jumps, cumulative }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_distance(f: &StepCdf, points: usize) -> f64 {
        (0..points)
            .map(|i| {
                let x = -3.0 + 6.0 * i as f64 / (points - 1) as f64;
                (f.eval(x) - semicircle_cdf(x)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn semicircle_cdf_values() {
        assert_eq!(semicircle_cdf(0.0), 0.5);
        assert_eq!(semicircle_cdf(2.0), 1.0);
        assert_eq!(semicircle_cdf(-2.0), 0.0);
        assert!((semicircle_cdf(1.0) - 0.804499).abs() < 1e-6);
        // adaptive-free check: Simpson quadrature of the density
        let m = 200_000;
        let h = 3.0 / m as f64;
        let mut acc = semicircle_density(-2.0) + semicircle_density(1.0);
        for i in 1..m {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * semicircle_density(-2.0 + i as f64 * h);
        }
        assert!((acc * h / 3.0 - semicircle_cdf(1.0)).abs() < 1e-6);
    }

    #[test]
    fn cdf_derivative_is_density() {
        let h = 1e-6;
        for i in 1..=101 {
            let x = -2.0 + 4.0 * i as f64 / 102.0;
            let fd = (semicircle_cdf(x + h) - semicircle_cdf(x - h)) / (2.0 * h);
            assert!((fd - semicircle_density(x)).abs() < 1e-4, "x={x}");
        }
    }

    #[test]
    fn point_masses() {
        let unit = StepCdf::new(vec![0.0], vec![1.0]).unwrap();
        assert!((kolmogorov_distance(&unit) - 0.5).abs() < 1e-15);
        let two = StepCdf::new(vec![-1.0, 1.0], vec![0.5, 1.0]).unwrap();
        assert!((kolmogorov_distance(&two) - 0.304499).abs() < 1e-6);
    }

    #[test]
    fn exact_sup_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let k = rng.random_range(1..30);
            let atoms: Vec<(f64, f64)> =
                (0..k).map(|_| (rng.random_range(-2.5..2.5), rng.random_range(0.1..1.0))).collect();
            let f = StepCdf::from_weighted(atoms).unwrap();
            let exact = kolmogorov_distance(&f);
            let grid = grid_distance(&f, 1_000_000);
            assert!(exact >= grid - 1e-12);
            assert!((exact - grid).abs() < 1e-4, "{exact} vs {grid}");
        }
    }

    #[test]
    fn quantile_discretization_bound() {
        for n in [1usize, 2, 7, 50, 400] {
            // mass 1/n at the (k - 1/2)/n quantiles of G
            let vals: Vec<f64> = (1..=n)
                .map(|k| {
                    let target = (k as f64 - 0.5) / n as f64;
                    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if semicircle_cdf(mid) < target {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    0.5 * (lo + hi)
                })
                .collect();
            let f = StepCdf::from_spectrum(&Spectrum::from_values(vals));
            assert!(kolmogorov_distance(&f) <= 1.0 / n as f64 + 1e-12);
        }
    }

    #[test]
    fn pooling() {
        let s = Spectrum::from_values(vec![0.3, -0.2, 0.3]);
        let one = pool(std::slice::from_ref(&s)).unwrap();
        assert_eq!(one, StepCdf::from_spectrum(&s));
        assert_eq!(one.jumps(), &[-0.2, 0.3]);
        let two = pool(&[s.clone(), s.clone()]).unwrap();
        assert_eq!(two, one);
        let a = Spectrum::from_values(vec![0.0]);
        let b = Spectrum::from_values(vec![1.0]);
        let p = pool(&[a, b]).unwrap();
        assert_eq!(p.jumps(), &[0.0, 1.0]);
        assert_eq!(p.cumulative(), &[0.5, 1.0]);
        assert_eq!(pool(&[]), Err(SpectralError::Empty));
        assert_eq!(pool(&[s, Spectrum::from_values(vec![1.0])]), Err(SpectralError::MixedDimensions(3, 1)));
    }

    #[test]
    fn histogram_fallback_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spectra: Vec<Spectrum> = (0..40)
            .map(|_| Spectrum::from_values((0..500).map(|_| rng.random_range(-2.2..2.2)).collect()))
            .collect();
        let exact = kolmogorov_distance(&pool(&spectra).unwrap());
        let hist = kolmogorov_distance(&pool_histogram(&spectra, 40 * 500));
        assert!((exact - hist).abs() <= HIST_DELTA_PENALTY, "{exact} vs {hist}");
    }

    #[test]
    fn invalid_cdfs_rejected() {
        assert!(StepCdf::new(vec![1.0, 0.0], vec![0.5, 1.0]).is_err());
        assert!(StepCdf::new(vec![0.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(StepCdf::new(vec![0.0], vec![0.9]).is_err());
    }
}
