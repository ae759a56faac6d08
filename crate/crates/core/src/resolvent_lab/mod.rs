//! Resolvents `R = (W - z)^-1`, the four-term Schur decomposition of the
//! diagonal entries, exact identity checks and Monte-Carlo moment probes.

mod decomposition;
mod probes;

use num_complex::Complex64;
use thiserror::Error;

use crate::ensemble::{EnsembleError, WignerMatrix};
use crate::spectral::SpectralError;
use crate::stieltjes::StieltjesError;

pub use decomposition::{
    decompose, decompose_with, identity_suite, identity_suite_with, IdentityReport, MinorRoute,
    ResolventDecomposition,
};
pub use probes::{
    gine_rhs, lambda_probe, quadratic_form_enumerate, rjj_moment_probe, rjj_moment_probe_multi, rjj_moments_of,
    LambdaProbe, MomentEstimate, QuadraticFormProbe, ENUMERATION_CAP,
};

/// Largest dimension for a dense resolvent.
pub const RESOLVENT_DIM_CAP: usize = 1024;
/// Largest dimension for the full identity suite.
pub const IDENTITY_DIM_CAP: usize = 512;

#[derive(Debug, Error)]
pub enum ResolventError {
    #[error("dimension {n} exceeds the cap of {cap}")]
    DimensionCap { n: usize, cap: usize },
    #[error("z = {0} must have nonzero imaginary part")]
    RealSpectralParameter(Complex64),
    #[error("z = {0} must lie in the upper half plane")]
    LowerHalfPlane(Complex64),
    #[error("singular pivot at column {0} (should be impossible for Im z != 0)")]
    SolveFailure(usize),
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("quadratic form coefficients must be symmetric with zero diagonal")]
    BadCoefficients,
    #[error("moment order q must be even and at least 4, got {0}")]
    BadOrder(u32),
    #[error("exact enumeration limited to dimension {cap}, got {dim}")]
    EnumerationCap { dim: usize, cap: usize },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Stieltjes(#[from] StieltjesError),
}

/// Dense `(W - z)^-1`, row-major.
#[derive(Debug, Clone)]
pub struct Resolvent {
    z: Complex64,
    n: usize,
    entries: Vec<Complex64>,
}

impl Resolvent {
    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.entries[j * self.n + k]
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        &self.entries[j * self.n..(j + 1) * self.n]
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.n).map(|j| self.get(j, j)).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|j| self.get(j, j)).sum()
    }

    /// `(1/n) Tr R`.
    pub fn stieltjes(&self) -> Complex64 {
        self.trace() / self.n as f64
    }

    /// `Tr R^2 = sum_jk R_jk R_kj`.
    pub fn trace_of_square(&self) -> Complex64 {
        let n = self.n;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                acc += self.get(j, k) * self.get(k, j);
            }
        }
        acc
    }

    /// `R x` for a real vector.
    pub fn apply_real(&self, x: &[f64]) -> Vec<Complex64> {
        (0..self.n).map(|j| self.row(j).iter().zip(x).map(|(r, &xi)| r * xi).sum()).collect()
    }

    /// `max_jk |((W - z) R - I)_jk|`.
    pub fn inverse_residual(&self, w: &WignerMatrix) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for j in 0..n {
            let wr = w.row(j);
            for k in 0..n {
                let mut acc = -self.z * self.get(j, k);
                for (l, &wl) in wr.iter().enumerate() {
                    acc += self.get(l, k) * wl;
                }
                if j == k {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// `max_jk |R_jk - R_kj|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in j + 1..n {
                worst = worst.max((self.get(j, k) - self.get(k, j)).norm());
            }
        }
        worst
    }
}

/// Full inverse of `W - z` by complex LU with partial pivoting.
pub fn resolvent(w: &WignerMatrix, z: Complex64) -> Result<Resolvent, ResolventError> {
    let n = w.n();
    if n > RESOLVENT_DIM_CAP {
        return Err(ResolventError::DimensionCap { n, cap: RESOLVENT_DIM_CAP });
    }
    if z.im == 0.0 {
        return Err(ResolventError::RealSpectralParameter(z));
    }
    let mut lu: Vec<Complex64> = w.as_slice().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    for j in 0..n {
        lu[j * n + j] -= z;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let pivot_row = (k..n)
            .max_by(|&a, &b| lu[a * n + k].norm_sqr().total_cmp(&lu[b * n + k].norm_sqr()))
            .expect("nonempty range");
        if lu[pivot_row * n + k].norm_sqr() == 0.0 {
            return Err(ResolventError::SolveFailure(k));
        }
        if pivot_row != k {
            for c in 0..n {
                lu.swap(k * n + c, pivot_row * n + c);
            }
            perm.swap(k, pivot_row);
        }
        let inv_piv = 1.0 / lu[k * n + k];
        let (head, tail) = lu.split_at_mut((k + 1) * n);
        let pivot = &head[k * n + k + 1..(k + 1) * n];
        for row in tail.chunks_exact_mut(n) {
            let f = row[k] * inv_piv;
            row[k] = f;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (r, &p) in row[k + 1..].iter_mut().zip(pivot) {
                *r -= f * p;
            }
        }
    }
    // solve L U X = P
    let mut x = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, &p) in perm.iter().enumerate() {
        x[i * n + p] = Complex64::new(1.0, 0.0);
    }
    for i in 1..n {
        let (done, rest) = x.split_at_mut(i * n);
        let target = &mut rest[..n];
        for k in 0..i {
            let f = lu[i * n + k];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (t, &s) in target.iter_mut().zip(&done[k * n..(k + 1) * n]) {
                *t -= f * s;
            }
        }
    }
    for i in (0..n).rev() {
        let (head, rest) = x.split_at_mut((i + 1) * n);
        let target = &mut head[i * n..];
        for k in i + 1..n {
            let f = lu[i * n + k];
            for (t, &s) in target.iter_mut().zip(&rest[(k - i - 1) * n..(k - i) * n]) {
                *t -= f * s;
            }
        }
        let inv = 1.0 / lu[i * n + i];
        target.iter_mut().for_each(|t| *t *= inv);
    }
    Ok(Resolvent { z, n, entries: x })
}
