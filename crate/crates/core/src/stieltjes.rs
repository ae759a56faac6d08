//! Stieltjes transforms: the semicircle transform `s(z)`, the empirical
//! transform `m_n(z)`, the spectral domain and the bound shape for
//! `|E m_n(z) - s(z)|`.

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::Spectrum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StieltjesError {
    #[error("semicircle transform undefined on the real segment [-2, 2] (z = {0})")]
    BranchUndefined(Complex64),
    #[error("domain is empty: eps = {eps} >= 2 (n too small for A0, a)")]
    EmptyDomain { eps: f64 },
    #[error("point {0} lies outside the domain")]
    OutsideDomain(Complex64),
    #[error("grid needs at least 2 points per axis")]
    GridTooSmall,
    #[error("constants must be positive")]
    BadConstants,
}

/// Root of `s^2 + z s + 1 = 0` with `Im s > 0` (equivalently `|s| < 1`).
///
/// Real `z` with `|z| > 2` returns the boundary value with `|s| <= 1`.
pub fn semicircle_stieltjes(z: Complex64) -> Result<Complex64, StieltjesError> {
    if z.im == 0.0 && z.re.abs() <= 2.0 {
        return Err(StieltjesError::BranchUndefined(z));
    }
    let disc = (z * z - 4.0).sqrt();
    // the larger root avoids cancellation; roots multiply to 1
    let big = if (z.conj() * disc).re >= 0.0 { (-z - disc) / 2.0 } else { (-z + disc) / 2.0 };
    Ok(1.0 / big)
}

/// Branch of `sqrt(z^2 - 4)` that behaves like `z` at infinity:
/// `z + 2 s(z)`. With it `s'(z) = -s(z) / sqrt(z^2 - 4)` and
/// `1 - s(z)^2 = -s(z) sqrt(z^2 - 4)`.
pub fn semicircle_sqrt(z: Complex64) -> Result<Complex64, StieltjesError> {
    Ok(z + 2.0 * semicircle_stieltjes(z)?)
}

/// `s'(z) = -s / (z + 2 s)`.
pub fn semicircle_stieltjes_derivative(z: Complex64) -> Result<Complex64, StieltjesError> {
    let s = semicircle_stieltjes(z)?;
    Ok(-s / (z + 2.0 * s))
}

/// `(1/n) sum_j 1/(lambda_j - z)`.
pub fn empirical_stieltjes(spec: &Spectrum, z: Complex64) -> Complex64 {
    stieltjes_of_values(spec.eigenvalues(), z)
}

pub fn stieltjes_of_values(values: &[f64], z: Complex64) -> Complex64 {
    let sum: Complex64 = values.iter().map(|&l| 1.0 / (Complex64::new(l, 0.0) - z)).sum();
    sum / values.len() as f64
}

/// `m_n'(z) = (1/n) sum_j 1/(lambda_j - z)^2`.
pub fn empirical_stieltjes_derivative(spec: &Spectrum, z: Complex64) -> Complex64 {
    let vals = spec.eigenvalues();
    let sum: Complex64 = vals
        .iter()
        .map(|&l| {
            let r = 1.0 / (Complex64::new(l, 0.0) - z);
            r * r
        })
        .sum();
    sum / vals.len() as f64
}

/// The region `|u| <= 2 - eps`, `v sqrt(gamma) >= v0` with `gamma = |2 - |u||`,
/// `v0 = A0 / n` and `eps^(3/2) = 2 v0 a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainG {
    a0: f64,
    a_param: f64,
    n: usize,
    v0: f64,
    eps: f64,
}

pub const DOMAIN_EDGE_SLACK: f64 = 1e-12;

/// Highest `v` emitted by [`DomainG::grid`].
pub const GRID_V_MAX: f64 = 1.0;

impl DomainG {
    pub fn new(a0: f64, a_param: f64, n: usize) -> Result<Self, StieltjesError> {
        if !(a0 > 0.0 && a_param > 0.0 && n >= 1) {
            return Err(StieltjesError::BadConstants);
        }
        let v0 = a0 / n as f64;
        let eps = (2.0 * v0 * a_param).powf(2.0 / 3.0);
        Ok(Self { a0, a_param, n, v0, eps })
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn a_param(&self) -> f64 {
        self.a_param
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `eps = c0 v0^(2/3)` with `c0 = (2a)^(2/3)`.
    pub fn c0(&self) -> f64 {
        (2.0 * self.a_param).powf(2.0 / 3.0)
    }

    pub fn u_max(&self) -> f64 {
        2.0 - self.eps
    }

    pub fn gamma(u: f64) -> f64 {
        (2.0 - u.abs()).abs()
    }

    /// Smallest admissible `v` at real part `u`.
    pub fn v_min(&self, u: f64) -> f64 {
        self.v0 / Self::gamma(u).sqrt()
    }

    /// Membership test; the `v sqrt(gamma) >= v0` edge is allowed a
    /// relative rounding slack of [`DOMAIN_EDGE_SLACK`].
    pub fn contains(&self, z: Complex64) -> bool {
        let (u, v) = (z.re, z.im);
        u.abs() <= self.u_max() && v > 0.0 && v * Self::gamma(u).sqrt() >= self.v0 * (1.0 - DOMAIN_EDGE_SLACK)
    }

    /// `n_u` equispaced `u` in `[-(2 - eps), 2 - eps]`; per `u`, `n_v`
    /// geometrically spaced `v` from `v_min(u)` to 1. Ordered by `u`, then `v`.
    pub fn grid(&self, n_u: usize, n_v: usize) -> Result<Vec<Complex64>, StieltjesError> {
        if n_u < 2 || n_v < 2 {
            return Err(StieltjesError::GridTooSmall);
        }
        if self.eps >= 2.0 {
            return Err(StieltjesError::EmptyDomain { eps: self.eps });
        }
        let um = self.u_max();
        let mut out = Vec::with_capacity(n_u * n_v);
        for i in 0..n_u {
            let u = if i + 1 == n_u { um } else { -um + 2.0 * um * i as f64 / (n_u - 1) as f64 };
            let lo = self.v_min(u).min(GRID_V_MAX);
            let ratio = (GRID_V_MAX / lo).ln();
            for k in 0..n_v {
                let v = if k == 0 {
                    lo
                } else if k + 1 == n_v {
                    GRID_V_MAX
                } else {
                    lo * (ratio * k as f64 / (n_v - 1) as f64).exp()
                };
                out.push(Complex64::new(u, v));
            }
        }
        Ok(out)
    }
}

/// `1/(n v^(3/4)) + 1/(n^(3/2) v^(3/2) |z^2 - 4|^(1/4))`, the bound shape
/// with unit constant.
pub fn stieltjes_bound(dom: &DomainG, z: Complex64) -> Result<f64, StieltjesError> {
    if !dom.contains(z) {
        return Err(StieltjesError::OutsideDomain(z));
    }
    Ok(bound_shape(z, dom.n()))
}

/// The bound shape without a domain check.
pub fn bound_shape(z: Complex64, n: usize) -> f64 {
    let n = n as f64;
    let v = z.im;
    1.0 / (n * v.powf(0.75)) + 1.0 / (n.powf(1.5) * v.powf(1.5) * (z * z - 4.0).norm().powf(0.25))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn known_values() {
        let s = semicircle_stieltjes(c(0.0, 1.0)).unwrap();
        assert!((s - c(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-15);
        let s = semicircle_stieltjes(c(3.0, 0.0)).unwrap();
        assert!((s.re - (-3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15 && s.im == 0.0);
        let s = semicircle_stieltjes(c(-3.0, 0.0)).unwrap();
        assert!((s.re - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!(matches!(semicircle_stieltjes(c(1.5, 0.0)), Err(StieltjesError::BranchUndefined(_))));
        assert!(semicircle_stieltjes(c(2.0, 0.0)).is_err());
    }

    #[test]
    fn quadratic_root_and_branch_identities() {
        let dom = DomainG::new(2.0, 1.0, 100).unwrap();
        for z in dom.grid(15, 6).unwrap() {
            let s = semicircle_stieltjes(z).unwrap();
            assert!(s.im > 0.0 && s.norm() <= 1.0);
            assert!((s * s + z * s + 1.0).norm() < 1e-14);
            let root = semicircle_sqrt(z).unwrap();
            assert!((root * root - (z * z - 4.0)).norm() < 1e-12);
            // 1 - s^2 = s w with w = -(z + 2s), the opposite branch
            let w = -root;
            assert!((1.0 - s * s - s * w).norm() <= 1e-12);
            let h = 1e-6;
            let fd = (semicircle_stieltjes(z + h).unwrap() - semicircle_stieltjes(z - h).unwrap()) / (2.0 * h);
            let d = semicircle_stieltjes_derivative(z).unwrap();
            assert!((fd - d).norm() < 1e-6 * (1.0 + d.norm()), "{z}: {fd} vs {d}");
            assert!((d + s / root).norm() < 1e-12);
        }
    }

    #[test]
    fn large_z_asymptotics() {
        for y in [10.0, 100.0] {
            let z = c(0.0, y);
            let s = semicircle_stieltjes(z).unwrap();
            assert!((s * z + 1.0).norm() <= 2.0 / (y * y));
        }
    }

    #[test]
    fn empirical_small_cases() {
        let m = empirical_stieltjes(&Spectrum::from_values(vec![0.0]), c(0.0, 1.0));
        assert!((m - c(0.0, 1.0)).norm() < 1e-15);
        let m = empirical_stieltjes(&Spectrum::from_values(vec![-1.0, 1.0]), c(0.0, 1.0));
        assert!((m - c(0.0, 0.5)).norm() < 1e-15);
        let spec = Spectrum::from_values(vec![-1.3, 0.2, 0.7]);
        let z = c(0.4, 0.25);
        let a = empirical_stieltjes(&spec, z);
        let b = empirical_stieltjes(&spec, z.conj());
        assert!((a.conj() - b).norm() < 1e-15);
        assert!(a.im > 0.0);
    }

    #[test]
    fn domain_constants() {
        let dom = DomainG::new(2.0, 1.0, 1000).unwrap();
        assert!((dom.v0() - 0.002).abs() < 1e-18);
        assert!((dom.eps() - 0.025198).abs() < 1e-6);
        assert!((dom.eps().powf(1.5) - 2.0 * dom.v0() * dom.a_param()).abs() <= 1e-12 * dom.eps().powf(1.5));
        assert!((dom.eps() - dom.c0() * dom.v0().powf(2.0 / 3.0)).abs() < 1e-15);
        assert!((dom.v_min(1.0) - 0.002).abs() < 1e-18);
        assert!((dom.v_min(1.9) - 0.006325).abs() < 1e-6);
        assert!(dom.contains(c(1.0, 0.002)));
        assert!(!dom.contains(c(1.0, 0.0019)));
        assert!(!dom.contains(c(1.99, 0.5)));
    }

    #[test]
    fn grid_points_in_domain() {
        let dom = DomainG::new(2.0, 1.0, 200).unwrap();
        let grid = dom.grid(21, 8).unwrap();
        assert_eq!(grid.len(), 168);
        for (i, z) in grid.iter().enumerate() {
            let lo = dom.v_min(z.re);
            assert!(z.im * DomainG::gamma(z.re).sqrt() >= dom.v0() * (1.0 - 1e-12));
            assert!(z.re.abs() <= dom.u_max());
            if i % 8 == 0 {
                assert_eq!(z.im, lo);
            }
            assert!(dom.contains(*z));
            assert!(stieltjes_bound(&dom, *z).is_ok());
        }
        assert_eq!(DomainG::new(2.0, 1.0, 1).unwrap().grid(3, 3), Err(StieltjesError::EmptyDomain { eps: 4f64.powf(2.0 / 3.0) }));
        assert_eq!(dom.grid(1, 3), Err(StieltjesError::GridTooSmall));
    }

    #[test]
    fn bound_shape_values() {
        let dom = DomainG::new(2.0, 1.0, 100).unwrap();
        let b = stieltjes_bound(&dom, c(0.0, 0.1)).unwrap();
        // |z^2 - 4| = 4.01 at z = 0.1i
        let expected = 1.0 / (100.0 * 0.1f64.powf(0.75)) + 1.0 / (1000.0 * 0.1f64.powf(1.5) * 4.01f64.powf(0.25));
        assert!((b - expected).abs() < 1e-15);
        assert!((b - 0.078580).abs() < 1e-6);
        let z = c(0.3, 0.2);
        let (b1, b2) = (bound_shape(z, 100), bound_shape(z, 200));
        let t1 = 1.0 / (100.0 * 0.2f64.powf(0.75));
        assert!(((b1 - t1) / ((b2 - t1 / 2.0)) - 2f64.powf(1.5)).abs() < 1e-12);
        assert!(bound_shape(c(0.3, 0.5), 100) < bound_shape(c(0.3, 0.2), 100));
        assert!(matches!(stieltjes_bound(&dom, c(0.0, 0.001)), Err(StieltjesError::OutsideDomain(_))));
    }
}
