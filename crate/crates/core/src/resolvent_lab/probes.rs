//! Monte-Carlo probes of the moment bounds on resolvent quantities.
//!
//! Replica `r` of a probe seeded with `seed` uses the matrix built from
//! `seed ^ r`. Replicas run in parallel and are reduced in replica order,
//! so results do not depend on the thread count.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::ResolventError;
use crate::ensemble::WignerMatrix;
use crate::entry_laws::{EntryLaw, LawKind, TruncationSpec};
use crate::spectral::{eigenvalues, Tridiagonal};
use crate::stieltjes::{empirical_stieltjes, semicircle_stieltjes};

/// Largest dimension for exact sign enumeration.
pub const ENUMERATION_CAP: usize = 14;

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub replicas: usize,
}

impl MomentEstimate {
    fn from_samples(values: &[f64]) -> Self {
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        Self { value: mean, stderr: (var / r).sqrt(), replicas: values.len() }
    }

    /// `E^(1/p)` with a delta-method standard error.
    fn root(self, p: f64) -> Self {
        let value = self.value.powf(1.0 / p);
        let stderr = if self.value > 0.0 { self.stderr * value / (p * self.value) } else { 0.0 };
        Self { value, stderr, replicas: self.replicas }
    }
}

fn replica_matrix(
    law: EntryLaw,
    trunc: Option<TruncationSpec>,
    n: usize,
    seed: u64,
    r: usize,
) -> Result<WignerMatrix, ResolventError> {
    Ok(WignerMatrix::build(n, law, seed ^ r as u64, trunc)?)
}

/// `(E|R_jj|^p)^(1/p)` averaged over replicas and all `j`.
pub fn rjj_moment_probe(
    law: EntryLaw,
    n: usize,
    z: Complex64,
    p: u32,
    replicas: usize,
    seed: u64,
) -> Result<MomentEstimate, ResolventError> {
    Ok(rjj_moment_probe_multi(law, None, n, &[z], p, replicas, seed)?[0])
}

/// As [`rjj_moment_probe`] at several points, sharing one reduction per matrix.
pub fn rjj_moment_probe_multi(
    law: EntryLaw,
    trunc: Option<TruncationSpec>,
    n: usize,
    zs: &[Complex64],
    p: u32,
    replicas: usize,
    seed: u64,
) -> Result<Vec<MomentEstimate>, ResolventError> {
    rjj_moments_of(|r| replica_matrix(law, trunc, n, seed, r), zs, p, replicas)
}

/// Moment probe over arbitrary matrices: `make(r)` yields replica `r`.
pub fn rjj_moments_of<F>(make: F, zs: &[Complex64], p: u32, replicas: usize) -> Result<Vec<MomentEstimate>, ResolventError>
where
    F: Fn(usize) -> Result<WignerMatrix, ResolventError> + Sync,
{
    for &z in zs {
        if !(z.im > 0.0) {
            return Err(ResolventError::LowerHalfPlane(z));
        }
    }
    let per_replica: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let w = make(r)?;
            let tri = Tridiagonal::reduce(w.n(), w.as_slice(), true);
            Ok(zs
                .iter()
                .map(|&z| {
                    let diag = tri.resolvent_diagonal(z);
                    diag.iter().map(|d| d.norm().powi(p as i32)).sum::<f64>() / diag.len() as f64
                })
                .collect())
        })
        .collect::<Result<_, ResolventError>>()?;
    Ok((0..zs.len())
        .map(|k| {
            let col: Vec<f64> = per_replica.iter().map(|v| v[k]).collect();
            MomentEstimate::from_samples(&col).root(p as f64)
        })
        .collect())
}

/// Dimensionless constants that should stay bounded in `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaProbe {
    pub n: usize,
    pub z: Complex64,
    /// moment excess used for the `eps2` / `eps3` normalizations
    pub kappa: f64,
    /// `E|Lambda_n|^2 n^2 v^2`
    pub lambda_scaled: MomentEstimate,
    /// `(E[(|eps2| sqrt(nv) / Im^(1/2) m_n^(j))^(4+kappa)])^(1/(4+kappa))` at `j = 0`
    pub eps2_constant: Option<MomentEstimate>,
    /// `(E[(|eps3| sqrt(nv) / Im^(1/2) m_n^(j))^((4+kappa)/2)])^(2/(4+kappa))` at `j = 0`
    pub eps3_constant: Option<MomentEstimate>,
}

pub fn lambda_probe(
    law: EntryLaw,
    trunc: Option<TruncationSpec>,
    n: usize,
    z: Complex64,
    replicas: usize,
    seed: u64,
) -> Result<LambdaProbe, ResolventError> {
    if !(z.im > 0.0) {
        return Err(ResolventError::LowerHalfPlane(z));
    }
    let s = semicircle_stieltjes(z)?;
    let kappa = trunc.map(|t| t.kappa()).unwrap_or_else(|| law.admissible_kappa());
    let order = 4.0 + kappa;
    let nf = n as f64;
    let v = z.im;
    let with_minor = n >= 2;

    let samples: Vec<(f64, f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let w = replica_matrix(law, trunc, n, seed, r)?;
            let m = empirical_stieltjes(&eigenvalues(&w)?, z);
            let lam = (m - s).norm_sqr() * nf * nf * v * v;
            if !with_minor {
                return Ok((lam, 0.0, 0.0));
            }
            let (e2, e3) = minor_eps_ratios(&w, z);
            Ok((lam, e2.powf(order), e3.powf(order / 2.0)))
        })
        .collect::<Result<_, ResolventError>>()?;

    let lam: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let (eps2_constant, eps3_constant) = if with_minor {
        let e2: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let e3: Vec<f64> = samples.iter().map(|s| s.2).collect();
        (
            Some(MomentEstimate::from_samples(&e2).root(order)),
            Some(MomentEstimate::from_samples(&e3).root(order / 2.0)),
        )
    } else {
        (None, None)
    };
    Ok(LambdaProbe { n, z, kappa, lambda_scaled: MomentEstimate::from_samples(&lam), eps2_constant, eps3_constant })
}

/// `|eps2| sqrt(nv) / sqrt(Im m^(0))` and the same for `eps3`, at `j = 0`.
fn minor_eps_ratios(w: &WignerMatrix, z: Complex64) -> (f64, f64) {
    let n = w.n();
    let nf = n as f64;
    let view = w.minor(&[0]).expect("index 0 exists");
    let minor = view.to_matrix().expect("n >= 2");
    let tri = Tridiagonal::reduce(minor.n(), minor.as_slice(), true);
    let x: Vec<f64> = w.row(0)[1..].iter().map(|v| v * nf.sqrt()).collect();
    let diag = tri.resolvent_diagonal(z);
    let applied = tri.resolvent_apply(z, &x);
    let quad: Complex64 = applied.iter().zip(&x).map(|(a, &b)| a * b).sum();
    let diag_weighted: Complex64 = diag.iter().zip(&x).map(|(d, &b)| d * (b * b)).sum();
    let eps2 = -(quad - diag_weighted) / nf;
    let eps3 = -diag.iter().zip(&x).map(|(d, &b)| d * (b * b - 1.0)).sum::<Complex64>() / nf;
    let im_minor = diag.iter().map(|d| d.im).sum::<f64>() / nf;
    let scale = (nf * z.im).sqrt() / im_minor.sqrt();
    (eps2.norm() * scale, eps3.norm() * scale)
}

/// Moment inequality probe for `Q = sum_{l != k} a_lk xi_l xi_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFormProbe {
    dim: usize,
    coefficients: Vec<f64>,
    law: EntryLaw,
    q: u32,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    /// right-hand side with `K = 1` and `sigma = 1`
    pub rhs_value: f64,
    pub exact_value: Option<f64>,
}

impl QuadraticFormProbe {
    /// `coefficients` is row-major `dim x dim`, symmetric with zero diagonal;
    /// `q` even and at least 4.
    pub fn new(dim: usize, coefficients: Vec<f64>, law: EntryLaw, q: u32) -> Result<Self, ResolventError> {
        if coefficients.len() != dim * dim {
            return Err(ResolventError::BadCoefficients);
        }
        for l in 0..dim {
            if coefficients[l * dim + l] != 0.0 {
                return Err(ResolventError::BadCoefficients);
            }
            for k in l + 1..dim {
                if coefficients[l * dim + k] != coefficients[k * dim + l] {
                    return Err(ResolventError::BadCoefficients);
                }
            }
        }
        if q < 4 || q % 2 != 0 {
            return Err(ResolventError::BadOrder(q));
        }
        let mu_q = law.analytic_moment(q as f64);
        let rhs_value = gine_rhs(dim, &coefficients, q, mu_q, 1.0);
        let exact_value = (matches!(law.kind(), LawKind::Rademacher) && dim <= ENUMERATION_CAP)
            .then(|| quadratic_form_enumerate(dim, &coefficients, q).expect("within cap"));
        Ok(Self { dim, coefficients, law, q, mc_estimate: None, mc_stderr: None, rhs_value, exact_value })
    }

    /// Symmetric coefficients uniform on `[-1, 1]`, zero diagonal.
    pub fn random_coefficients<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
        let mut a = vec![0.0; dim * dim];
        for l in 0..dim {
            for k in l + 1..dim {
                let v = rng.random_range(-1.0..1.0);
                a[l * dim + k] = v;
                a[k * dim + l] = v;
            }
        }
        a
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn law(&self) -> EntryLaw {
        self.law
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `Q` at one realization of `xi`.
    pub fn form(&self, xi: &[f64]) -> f64 {
        quadratic_form(self.dim, &self.coefficients, xi)
    }

    /// Exact `E|Q|^q` by sign enumeration; errors above the cap.
    pub fn enumerate_exact(&self) -> Result<f64, ResolventError> {
        quadratic_form_enumerate(self.dim, &self.coefficients, self.q)
    }

    /// Fills the Monte-Carlo estimate of `E|Q|^q` from `samples` draws.
    pub fn run<R: Rng + ?Sized>(&mut self, samples: usize, rng: &mut R) {
        let mut xi = vec![0.0; self.dim];
        let mut values = Vec::with_capacity(samples);
        for _ in 0..samples {
            for x in xi.iter_mut() {
                *x = self.law.sample(rng);
            }
            values.push(self.form(&xi).abs().powi(self.q as i32));
        }
        let est = MomentEstimate::from_samples(&values);
        self.mc_estimate = Some(est.value);
        self.mc_stderr = Some(est.stderr);
    }

    /// Implied constant `(E|Q|^q / rhs)^(1/q)`.
    pub fn k_hat(&self) -> Option<f64> {
        let mc = self.mc_estimate?;
        if self.rhs_value == 0.0 {
            return None;
        }
        Some((mc / self.rhs_value).powf(1.0 / self.q as f64))
    }
}

fn quadratic_form(dim: usize, a: &[f64], xi: &[f64]) -> f64 {
    let mut acc = 0.0;
    for l in 0..dim {
        for k in l + 1..dim {
            acc += a[l * dim + k] * xi[l] * xi[k];
        }
    }
    2.0 * acc
}

/// `E|Q|^q` for Rademacher `xi`, averaging over all `2^dim` sign vectors.
pub fn quadratic_form_enumerate(dim: usize, a: &[f64], q: u32) -> Result<f64, ResolventError> {
    if dim > ENUMERATION_CAP {
        return Err(ResolventError::EnumerationCap { dim, cap: ENUMERATION_CAP });
    }
    let mut xi = vec![0.0; dim];
    let count = 1usize << dim;
    let mut acc = 0.0;
    for mask in 0..count {
        for (i, x) in xi.iter_mut().enumerate() {
            *x = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
        }
        acc += quadratic_form(dim, a, &xi).abs().powi(q as i32);
    }
    Ok(acc / count as f64)
}

/// Right-hand side of the quadratic-form moment inequality with `K = 1`:
/// `q^q sigma^q (sum a^2)^(q/2) + mu_q q^(3q/2) sum_l (sum_k a_kl^2)^(q/2)
///  + q^(2q) mu_q^2 sum |a|^q`.
pub fn gine_rhs(dim: usize, a: &[f64], q: u32, mu_q: f64, sigma: f64) -> f64 {
    let qf = q as f64;
    let frob: f64 = a.iter().map(|x| x * x).sum();
    let columns: f64 = (0..dim)
        .map(|l| (0..dim).map(|k| a[k * dim + l].powi(2)).sum::<f64>().powf(qf / 2.0))
        .sum();
    let entries: f64 = a.iter().map(|x| x.abs().powf(qf)).sum();
    qf.powf(qf) * sigma.powf(qf) * frob.powf(qf / 2.0)
        + mu_q * qf.powf(1.5 * qf) * columns
        + qf.powf(2.0 * qf) * mu_q * mu_q * entries
}
