//! Schur decomposition of `R_jj` and the exact identities built on it.
//!
//! With `X = sqrt(n) W`, `x_l = X_jl` and `R^(j)` the resolvent of the
//! j-minor,
//!
//! ```text
//! eps1 = X_jj / sqrt(n)
//! eps2 = -(1/n) sum_{l != k} x_l x_k R^(j)_lk
//! eps3 = -(1/n) sum_l (x_l^2 - 1) R^(j)_ll
//! eps4 = (1/n) (Tr R - Tr R^(j))
//! ```
//!
//! and the Schur complement gives `R_jj = -1 / (z + m_n - eps)` with
//! `eps = eps1 + eps2 + eps3 + eps4` and `m_n = (1/n) Tr R`. Minor traces
//! are normalized by the parent `n`.

use num_complex::Complex64;

use super::{resolvent, Resolvent, ResolventError, IDENTITY_DIM_CAP};
use crate::ensemble::WignerMatrix;
use crate::spectral::eigenvalues;
use crate::stieltjes::{empirical_stieltjes, empirical_stieltjes_derivative, semicircle_stieltjes};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How the j-minor resolvent is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinorRoute {
    /// Separate LU inverse of the deleted matrix.
    Direct,
    /// Rank-one Schur downdate of the full resolvent,
    /// `R^(j)_lk = R_lk - R_lj R_jk / R_jj`.
    Downdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventDecomposition {
    pub n: usize,
    pub j: usize,
    pub z: Complex64,
    pub eps1: Complex64,
    pub eps2: Complex64,
    pub eps3: Complex64,
    pub eps4: Complex64,
    pub eps_total: Complex64,
    pub m_n: Complex64,
    pub m_n_minor: Complex64,
    pub s: Complex64,
    pub lambda_n: Complex64,
    pub r_jj: Complex64,
    /// `|R_jj + 1/(z + m_n - eps)|`
    pub residual_schur: f64,
    /// `|R_jj - s - s (Lambda_n - eps) R_jj|`
    pub residual_rjj1: f64,
    /// `|Tr R - Tr R^(j) - (1 + (1/n) x^T (R^(j))^2 x) R_jj|`
    pub residual_shur: f64,
}

impl ResolventDecomposition {
    /// `|eps4| n v`; at most 1 by interlacing.
    pub fn eps4_ratio(&self) -> f64 {
        self.eps4.norm() * self.z.im * self.n as f64
    }
}

/// Quantities of the j-minor resolvent that the decomposition needs.
struct MinorData {
    /// `R^(j)_ll` for `l != j`, in parent order
    diag: Vec<Complex64>,
    /// `R^(j) x`, in parent order with the `j` slot unused
    applied: Vec<Complex64>,
}

impl MinorData {
    fn empty(n: usize) -> Self {
        Self { diag: vec![ZERO; n], applied: vec![ZERO; n] }
    }
}

fn check_index(w: &WignerMatrix, j: usize) -> Result<(), ResolventError> {
    if j >= w.n() {
        return Err(ResolventError::IndexOutOfRange { index: j, n: w.n() });
    }
    Ok(())
}

fn row_entries(w: &WignerMatrix, j: usize) -> Vec<f64> {
    let sqrt_n = (w.n() as f64).sqrt();
    w.row(j).iter().map(|x| x * sqrt_n).collect()
}

fn minor_direct(w: &WignerMatrix, j: usize, z: Complex64, x: &[f64]) -> Result<MinorData, ResolventError> {
    let n = w.n();
    let mut data = MinorData::empty(n);
    let view = w.minor(&[j])?;
    let Some(m) = view.to_matrix() else {
        return Ok(data);
    };
    let rm = resolvent(&m, z)?;
    let xs: Vec<f64> = view.kept().iter().map(|&l| x[l]).collect();
    let applied = rm.apply_real(&xs);
    for (i, &l) in view.kept().iter().enumerate() {
        data.diag[l] = rm.get(i, i);
        data.applied[l] = applied[i];
    }
    Ok(data)
}

fn minor_downdate(r: &Resolvent, j: usize, x: &[f64]) -> MinorData {
    let n = r.n();
    let mut data = MinorData::empty(n);
    let rjj = r.get(j, j);
    // t = R x~ with x~_j = 0
    let t: Vec<Complex64> = (0..n)
        .map(|l| r.row(l).iter().zip(x).enumerate().filter(|(k, _)| *k != j).map(|(_, (a, &b))| a * b).sum())
        .collect();
    let tj_over = t[j] / rjj;
    for l in (0..n).filter(|&l| l != j) {
        let rlj = r.get(l, j);
        data.diag[l] = r.get(l, l) - rlj * rlj / rjj;
        data.applied[l] = t[l] - rlj * tj_over;
    }
    data
}

fn assemble(
    w: &WignerMatrix,
    j: usize,
    z: Complex64,
    r: &Resolvent,
    minor: &MinorData,
    x: &[f64],
    s: Complex64,
) -> ResolventDecomposition {
    let n = w.n();
    let nf = n as f64;
    let trace = r.trace();
    let m_n = trace / nf;
    let mut quad = ZERO;
    let mut diag_weighted = ZERO;
    let mut eps3_sum = ZERO;
    let mut minor_trace = ZERO;
    let mut square_quad = ZERO;
    for l in (0..n).filter(|&l| l != j) {
        let xl = x[l];
        quad += minor.applied[l] * xl;
        diag_weighted += minor.diag[l] * (xl * xl);
        eps3_sum += minor.diag[l] * (xl * xl - 1.0);
        minor_trace += minor.diag[l];
        square_quad += minor.applied[l] * minor.applied[l];
    }
    let eps1 = Complex64::new(w.get(j, j), 0.0);
    let eps2 = -(quad - diag_weighted) / nf;
    let eps3 = -eps3_sum / nf;
    let eps4 = (trace - minor_trace) / nf;
    let eps_total = eps1 + eps2 + eps3 + eps4;
    let r_jj = r.get(j, j);
    let lambda_n = m_n - s;
    let residual_schur = (r_jj + 1.0 / (z + m_n - eps_total)).norm();
    let residual_rjj1 = (r_jj - s - s * (lambda_n - eps_total) * r_jj).norm();
    let residual_shur = (trace - minor_trace - (1.0 + square_quad / nf) * r_jj).norm();
    ResolventDecomposition {
        j,
        z,
        eps1,
        eps2,
        eps3,
        eps4,
        eps_total,
        m_n,
        m_n_minor: minor_trace / nf,
        s,
        lambda_n,
        r_jj,
        residual_schur,
        residual_rjj1,
        residual_shur,
        n,
    }
}

fn validate_z(z: Complex64) -> Result<Complex64, ResolventError> {
    if !(z.im > 0.0) {
        return Err(ResolventError::LowerHalfPlane(z));
    }
    Ok(semicircle_stieltjes(z)?)
}

/// Decomposition of `R_jj` at `z` (`Im z > 0`), minor resolvent by direct
/// inversion. `j` is 0-based.
pub fn decompose(w: &WignerMatrix, j: usize, z: Complex64) -> Result<ResolventDecomposition, ResolventError> {
    decompose_with(w, j, z, MinorRoute::Direct)
}

pub fn decompose_with(
    w: &WignerMatrix,
    j: usize,
    z: Complex64,
    route: MinorRoute,
) -> Result<ResolventDecomposition, ResolventError> {
    check_index(w, j)?;
    let s = validate_z(z)?;
    let r = resolvent(w, z)?;
    let x = row_entries(w, j);
    let minor = match route {
        MinorRoute::Direct => minor_direct(w, j, z, &x)?,
        MinorRoute::Downdate => minor_downdate(&r, j, &x),
    };
    Ok(assemble(w, j, z, &r, &minor, &x, s))
}

/// Worst residuals of every exact identity over all `j` for one `(W, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub n: usize,
    pub z: Complex64,
    pub route: MinorRoute,
    pub max_residual_schur: f64,
    pub max_residual_rjj1: f64,
    pub max_residual_shur: f64,
    /// `max_j |eps4| n v`
    pub max_eps4_ratio: f64,
    /// number of `j` with `|eps4| > 1/(n v)`
    pub eps4_violations: usize,
    /// `|sum_j eps4_j R_jj - m_n'(z)|`, `m_n'` from eigenvalues
    pub residual_73: f64,
    /// `|(1/n) Tr R^2 - m_n'(z)|`, matrix route vs eigenvalue route
    pub residual_trace_square: f64,
    /// `|Lambda_n (z + s + m_n) - T_n|`
    pub residual_lambda: f64,
    /// `|m_n from eigenvalues - (1/n) Tr R|`
    pub stieltjes_cross: f64,
    /// `max |(W - z) R - I|`
    pub inverse_residual: f64,
    pub decompositions: Vec<ResolventDecomposition>,
}

impl IdentityReport {
    /// Largest of the algebraic residuals (everything except the
    /// eigenvalue cross-check and the interlacing ratio).
    pub fn max_residual(&self) -> f64 {
        [
            self.max_residual_schur,
            self.max_residual_rjj1,
            self.max_residual_shur,
            self.residual_73,
            self.residual_trace_square,
            self.residual_lambda,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// All identities within `tol` and no interlacing violation.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol && self.eps4_violations == 0
    }
}

/// Runs every identity at `z` using the downdate route for the minors.
pub fn identity_suite(w: &WignerMatrix, z: Complex64) -> Result<IdentityReport, ResolventError> {
    identity_suite_with(w, z, MinorRoute::Downdate)
}

pub fn identity_suite_with(w: &WignerMatrix, z: Complex64, route: MinorRoute) -> Result<IdentityReport, ResolventError> {
    let n = w.n();
    if n > IDENTITY_DIM_CAP {
        return Err(ResolventError::DimensionCap { n, cap: IDENTITY_DIM_CAP });
    }
    let s = validate_z(z)?;
    let r = resolvent(w, z)?;
    let spectrum = eigenvalues(w)?;
    let nf = n as f64;
    let v = z.im;

    let mut decompositions = Vec::with_capacity(n);
    for j in 0..n {
        let x = row_entries(w, j);
        let minor = match route {
            MinorRoute::Direct => minor_direct(w, j, z, &x)?,
            MinorRoute::Downdate => minor_downdate(&r, j, &x),
        };
        decompositions.push(assemble(w, j, z, &r, &minor, &x, s));
    }

    let max_of = |f: fn(&ResolventDecomposition) -> f64| decompositions.iter().map(f).fold(0.0, f64::max);
    let eps4_bound = 1.0 / (nf * v);
    let eps4_violations = decompositions.iter().filter(|d| d.eps4.norm() > eps4_bound).count();

    let m_eig = empirical_stieltjes(&spectrum, z);
    let m_prime = empirical_stieltjes_derivative(&spectrum, z);
    let m_n = r.stieltjes();
    let eps4_weighted: Complex64 = decompositions.iter().map(|d| d.eps4 * d.r_jj).sum();
    let t_n: Complex64 = decompositions.iter().map(|d| d.eps_total * d.r_jj).sum::<Complex64>() / nf;
    let lambda_n = m_n - s;

    Ok(IdentityReport {
        n,
        z,
        route,
        max_residual_schur: max_of(|d| d.residual_schur),
        max_residual_rjj1: max_of(|d| d.residual_rjj1),
        max_residual_shur: max_of(|d| d.residual_shur),
        max_eps4_ratio: max_of(ResolventDecomposition::eps4_ratio),
        eps4_violations,
        residual_73: (eps4_weighted - m_prime).norm(),
        residual_trace_square: (r.trace_of_square() / nf - m_prime).norm(),
        residual_lambda: (lambda_n * (z + s + m_n) - t_n).norm(),
        stieltjes_cross: (m_eig - m_n).norm(),
        inverse_residual: r.inverse_residual(w),
        decompositions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entry_laws::EntryLaw;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn one_by_one() {
        let w = WignerMatrix::diagonal(&[0.4]).unwrap();
        let z = c(0.1, 1.0);
        let d = decompose(&w, 0, z).unwrap();
        assert_eq!(d.eps2, ZERO);
        assert_eq!(d.eps3, ZERO);
        assert_eq!(d.eps1, c(0.4, 0.0));
        assert!((d.eps4 - d.r_jj).norm() < 1e-16);
        assert!(d.residual_schur < 1e-15);
        assert!(d.residual_rjj1 < 1e-15);
        // m_1 = R_11, so Lambda_1 = R_11 - s
        assert!((d.lambda_n - (d.r_jj - semicircle_stieltjes(z).unwrap())).norm() < 1e-16);
    }

    #[test]
    fn seven_three_single_pole() {
        let w = WignerMatrix::diagonal(&[0.0]).unwrap();
        let rep = identity_suite(&w, c(0.0, 1.0)).unwrap();
        let d = &rep.decompositions[0];
        assert!((d.eps4 * d.r_jj - c(-1.0, 0.0)).norm() < 1e-15);
        assert!(rep.residual_73 < 1e-15);
    }

    #[test]
    fn two_by_two_symbolic() {
        // W = [[a, b], [b, c]]: R_11 = (c - z) / ((a - z)(c - z) - b^2),
        // R^(1) = 1 / (c - z)
        let h = 1.0 / 2f64.sqrt();
        for (a, b, cc) in [(h, h, -h), (-h, h, h), (h, -h, h)] {
            let w = WignerMatrix::from_symmetric(2, vec![a, b, b, cc]).unwrap();
            let z = c(0.0, 2.0);
            let d = decompose(&w, 0, z).unwrap();
            let det = (c(a, 0.0) - z) * (c(cc, 0.0) - z) - b * b;
            let r11 = (c(cc, 0.0) - z) / det;
            assert!((d.r_jj - r11).norm() < 1e-15);
            let minor = 1.0 / (c(cc, 0.0) - z);
            assert!((d.m_n_minor - minor / 2.0).norm() < 1e-15);
            // eps3 = -(1/2)(x^2 - 1) R^(1), x = sqrt(2) b = +-1
            assert!(d.eps3.norm() < 1e-15);
            assert_eq!(d.eps2, ZERO);
            assert!(d.residual_schur <= 1e-12);
            assert!(d.residual_rjj1 <= 1e-12);
        }
    }

    #[test]
    fn diagonal_matrix_shur_reduces() {
        let w = WignerMatrix::diagonal(&[0.2, -0.5, 1.1]).unwrap();
        let rep = identity_suite(&w, c(0.3, 0.4)).unwrap();
        for d in &rep.decompositions {
            assert!(d.residual_shur < 1e-15);
            assert!((d.eps4 * 3.0 - d.r_jj).norm() < 1e-15);
        }
    }

    #[test]
    fn gaussian_64_all_identities() {
        let w = WignerMatrix::build(64, EntryLaw::gaussian(), 7, None).unwrap();
        let z = c(1.0, 0.05);
        for route in [MinorRoute::Direct, MinorRoute::Downdate] {
            let rep = identity_suite_with(&w, z, route).unwrap();
            assert!(rep.max_residual() <= 1e-9, "{route:?}: {rep:?}");
            assert_eq!(rep.eps4_violations, 0);
            assert!(rep.max_eps4_ratio <= 1.0);
            assert!(rep.stieltjes_cross <= 1e-9);
        }
    }

    #[test]
    fn routes_agree_and_minor_stieltjes_matches() {
        let w = WignerMatrix::build(30, EntryLaw::pareto(4.5).unwrap(), 11, None).unwrap();
        let z = c(-0.7, 0.08);
        for j in [0, 13, 29] {
            let a = decompose_with(&w, j, z, MinorRoute::Direct).unwrap();
            let b = decompose_with(&w, j, z, MinorRoute::Downdate).unwrap();
            assert!((a.eps_total - b.eps_total).norm() < 1e-10);
            assert!((a.m_n_minor - b.m_n_minor).norm() < 1e-12);
            // m_n of the minor matrix itself, renormalized to the parent n
            let minor = w.minor(&[j]).unwrap().to_matrix().unwrap();
            let rm = resolvent(&minor, z).unwrap();
            assert!((rm.trace() / 30.0 - a.m_n_minor).norm() < 1e-12);
        }
    }

    #[test]
    fn eps4_interlacing_at_n100() {
        let w = WignerMatrix::build(100, EntryLaw::rademacher(), 5, None).unwrap();
        let rep = identity_suite(&w, c(0.2, 0.1)).unwrap();
        for d in &rep.decompositions {
            assert!(d.eps4.norm() <= 0.1);
        }
        assert_eq!(rep.eps4_violations, 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let w = WignerMatrix::diagonal(&[0.0, 1.0]).unwrap();
        assert!(matches!(decompose(&w, 2, c(0.0, 1.0)), Err(ResolventError::IndexOutOfRange { .. })));
        assert!(matches!(decompose(&w, 0, c(0.0, -1.0)), Err(ResolventError::LowerHalfPlane(_))));
        let big = WignerMatrix::diagonal(&vec![0.0; IDENTITY_DIM_CAP + 1]).unwrap();
        assert!(matches!(identity_suite(&big, c(0.0, 1.0)), Err(ResolventError::DimensionCap { .. })));
    }
}
