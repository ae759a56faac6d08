use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{fit_rate, ExperimentConfig, ExperimentError, RateFit};
use crate::ensemble::WignerMatrix;
use crate::spectral::{eigenvalues, kolmogorov_distance, pool, semicircle_cdf, Spectrum};
use crate::stieltjes::{semicircle_stieltjes, stieltjes_bound, stieltjes_of_values, DomainG};

/// Bootstrap resamples per dimension.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_STREAM_TAG: u64 = 0xb007_57a9_0000_0001;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub n: usize,
    pub replicas: usize,
    pub delta_hat: f64,
    pub mc_stderr: f64,
    /// seed of replica 0; replica `r` uses `seed ^ r`
    pub seed: u64,
}

impl DeltaRow {
    /// The advisory `stderr <= delta_hat / 5`.
    pub fn stderr_ok(&self) -> bool {
        self.mc_stderr <= self.delta_hat / 5.0
    }
}

#[derive(Debug)]
pub struct DeltaSweep {
    pub rows: Vec<DeltaRow>,
    pub fit: Result<RateFit, ExperimentError>,
}

impl DeltaSweep {
    /// Dimensions whose bootstrap error exceeds a fifth of the estimate.
    pub fn insufficient_replicas(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| !r.stderr_ok()).map(|r| r.n).collect()
    }
}

pub(super) fn spectra_for(cfg: &ExperimentConfig, n_index: usize) -> Result<Vec<Spectrum>, ExperimentError> {
    let n = cfg.n_values[n_index];
    (0..cfg.replicas_per_n[n_index])
        .into_par_iter()
        .map(|r| {
            let w = WignerMatrix::build(n, cfg.law, cfg.replica_seed(n_index, r), cfg.trunc)?;
            Ok(eigenvalues(&w)?)
        })
        .collect()
}

/// Estimates `Delta_n` for every configured `n`, with bootstrap errors, and
/// fits the log-log slope. Runs on a pool of `cfg.threads` workers.
pub fn run_delta_sweep(cfg: &ExperimentConfig) -> Result<DeltaSweep, ExperimentError> {
    cfg.validate()?;
    let workers = super::thread_pool(cfg.threads)?;
    let rows = workers.install(|| {
        (0..cfg.n_values.len())
            .map(|i| {
                let spectra = spectra_for(cfg, i)?;
                let delta_hat = kolmogorov_distance(&pool(&spectra)?);
                let seed = cfg.replica_seed(i, 0);
                let mc_stderr = bootstrap_stderr(&spectra, seed ^ BOOTSTRAP_STREAM_TAG, BOOTSTRAP_RESAMPLES);
                Ok(DeltaRow { n: cfg.n_values[i], replicas: spectra.len(), delta_hat, mc_stderr, seed })
            })
            .collect::<Result<Vec<_>, ExperimentError>>()
    })?;
    let points: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.delta_hat)).collect();
    Ok(DeltaSweep { fit: fit_rate(&points), rows })
}

/// Standard deviation of the Kolmogorov distance over bootstrap resamples of
/// whole replicas (drawn with replacement).
pub fn bootstrap_stderr(spectra: &[Spectrum], seed: u64, resamples: usize) -> f64 {
    let reps = spectra.len();
    if reps < 2 || resamples < 2 {
        return 0.0;
    }
    let n = spectra[0].n();
    let mut tagged: Vec<(f64, u32)> = Vec::with_capacity(reps * n);
    for (r, s) in spectra.iter().enumerate() {
        tagged.extend(s.eigenvalues().iter().map(|&x| (x, r as u32)));
    }
    tagged.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // group boundaries of equal values and G at each group
    let mut group_end = Vec::new();
    let mut group_g = Vec::new();
    for i in 0..tagged.len() {
        if i + 1 == tagged.len() || tagged[i + 1].0 != tagged[i].0 {
            group_end.push(i + 1);
            group_g.push(semicircle_cdf(tagged[i].0));
        }
    }
    let labels: Vec<u32> = tagged.iter().map(|t| t.1).collect();
    drop(tagged);
    let mass = 1.0 / (n * reps) as f64;

    let stats: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut weight = vec![0.0f64; reps];
            for _ in 0..reps {
                weight[rng.random_range(0..reps)] += mass;
            }
            let (mut start, mut before, mut sup) = (0usize, 0.0f64, 0.0f64);
            for (&end, &g) in group_end.iter().zip(&group_g) {
                let after = before + labels[start..end].iter().map(|&l| weight[l as usize]).sum::<f64>();
                sup = sup.max((before - g).abs()).max((after - g).abs());
                before = after;
                start = end;
            }
            sup
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / resamples as f64;
    (stats.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StieltjesRow {
    pub n: usize,
    pub u: f64,
    pub v: f64,
    pub re_m: f64,
    pub im_m: f64,
    pub re_s: f64,
    pub im_s: f64,
    pub abs_diff: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesSweep {
    /// ordered by `(n, u, v)`
    pub rows: Vec<StieltjesRow>,
    /// `(n, max ratio over the grid)`
    pub c_hat: Vec<(usize, f64)>,
}

impl StieltjesSweep {
    /// `C(n_{i+1}) / C(n_i)` for consecutive dimensions.
    pub fn c_hat_ratios(&self) -> Vec<f64> {
        self.c_hat.windows(2).map(|w| w[1].1 / w[0].1).collect()
    }
}

/// Replica-averaged `m_n(z)` against `s(z)` over the domain grid of each `n`.
pub fn run_stieltjes_sweep(cfg: &ExperimentConfig) -> Result<StieltjesSweep, ExperimentError> {
    cfg.validate()?;
    let workers = super::thread_pool(cfg.threads)?;
    let mut rows = Vec::new();
    let mut c_hat = Vec::new();
    for (i, &n) in cfg.n_values.iter().enumerate() {
        let dom = DomainG::new(cfg.a0, cfg.a, n)?;
        let grid = dom.grid(cfg.grid.0, cfg.grid.1)?;
        let reps = cfg.replicas_per_n[i];
        let per_replica: Vec<Vec<Complex64>> = workers.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|r| {
                    let w = WignerMatrix::build(n, cfg.law, cfg.replica_seed(i, r), cfg.trunc)?;
                    let spec = eigenvalues(&w)?;
                    Ok(grid.iter().map(|&z| stieltjes_of_values(spec.eigenvalues(), z)).collect())
                })
                .collect::<Result<_, ExperimentError>>()
        })?;
        let mut worst = 0.0f64;
        for (k, &z) in grid.iter().enumerate() {
            let m = per_replica.iter().map(|v| v[k]).sum::<Complex64>() / reps as f64;
            let s = semicircle_stieltjes(z)?;
            let bound = stieltjes_bound(&dom, z)?;
            let abs_diff = (m - s).norm();
            let ratio = abs_diff / bound;
            worst = worst.max(ratio);
            rows.push(StieltjesRow { n, u: z.re, v: z.im, re_m: m.re, im_m: m.im, re_s: s.re, im_s: s.im, abs_diff, bound, ratio });
        }
        c_hat.push((n, worst));
    }
    Ok(StieltjesSweep { rows, c_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entry_laws::EntryLaw;

    fn small(law: EntryLaw) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(law);
        cfg.n_values = vec![10, 20, 40];
        cfg.replicas_per_n = vec![40; 3];
        cfg.base_seed = 11;
        cfg.threads = 2;
        cfg
    }

    #[test]
    fn delta_rows_in_range() {
        let sweep = run_delta_sweep(&small(EntryLaw::rademacher())).unwrap();
        assert_eq!(sweep.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![10, 20, 40]);
        for r in &sweep.rows {
            assert!(r.delta_hat > 0.0 && r.delta_hat <= 1.0);
            assert!(r.mc_stderr > 0.0);
        }
        assert!(sweep.fit.is_ok());
    }

    #[test]
    fn single_n_fit_is_an_error() {
        let mut cfg = small(EntryLaw::gaussian());
        cfg.n_values = vec![100];
        cfg.replicas_per_n = vec![5];
        let sweep = run_delta_sweep(&cfg).unwrap();
        assert!(matches!(sweep.fit, Err(ExperimentError::TooFewPoints(1))));
    }

    #[test]
    fn bootstrap_of_identical_replicas_is_zero() {
        let s = Spectrum::from_values(vec![-1.0, 0.5]);
        assert!(bootstrap_stderr(&[s.clone(), s.clone(), s], 1, 50) < 1e-12);
    }

    #[test]
    fn bootstrap_shrinks_with_replicas() {
        let mut cfg = small(EntryLaw::gaussian());
        cfg.n_values = vec![20];
        let mut errs = Vec::new();
        for reps in [100, 400, 1600] {
            cfg.replicas_per_n = vec![reps];
            errs.push(bootstrap_stderr(&spectra_for(&cfg, 0).unwrap(), 5, 200));
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((2.0 / 3.0..=6.0).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn stieltjes_sweep_shape_and_symmetry() {
        let mut cfg = small(EntryLaw::gaussian());
        cfg.n_values = vec![100];
        cfg.replicas_per_n = vec![300];
        cfg.grid = (5, 3);
        let sweep = run_stieltjes_sweep(&cfg).unwrap();
        assert_eq!(sweep.rows.len(), 15);
        for row in &sweep.rows {
            if row.v == 1.0 {
                assert!(row.abs_diff <= 0.05, "{row:?}");
            }
            assert!(row.im_m > 0.0 && row.im_s > 0.0);
        }
        // first and last u columns hold the points (-u, v) and (u, v)
        for k in 0..3 {
            let (a, b) = (&sweep.rows[k], &sweep.rows[12 + k]);
            assert_eq!(a.u, -b.u);
            assert!((a.abs_diff - b.abs_diff).abs() <= 0.5 * a.abs_diff.max(b.abs_diff) + 0.01);
        }
        assert_eq!(sweep.c_hat.len(), 1);
    }
}
