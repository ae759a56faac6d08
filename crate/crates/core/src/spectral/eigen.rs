//! Householder reduction to tridiagonal form and implicit-shift QL iteration.
//!
//! Only eigenvalues are computed by [`symmetric_eigenvalues`]. The reduction
//! can optionally keep its orthogonal factor, which is what the resolvent
//! diagonal needs (`R = Q (T - z)^-1 Q^T`).

use num_complex::Complex64;

use super::SpectralError;

/// Maximum QL sweeps allowed per eigenvalue.
pub const MAX_QL_SWEEPS: usize = 50;

/// `A = Q T Q^T` with `T` symmetric tridiagonal.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    n: usize,
    /// diagonal of `T`
    diag: Vec<f64>,
    /// `off[i] = T[i][i+1]`, length `n - 1`
    off: Vec<f64>,
    /// row-major orthogonal factor, present when requested
    q: Option<Vec<f64>>,
}

impl Tridiagonal {
    /// Reduces the dense symmetric row-major matrix `a` (n x n).
    pub fn reduce(n: usize, a: &[f64], keep_q: bool) -> Self {
        assert_eq!(a.len(), n * n);
        let mut a = a.to_vec();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        // reflectors: (start index, tau, v) with v[0] == 1
        let mut reflectors: Vec<(usize, f64, Vec<f64>)> = Vec::new();
        let mut p = vec![0.0; n];

        for k in 0..n.saturating_sub(2) {
            let start = k + 1;
            let m = n - start;
            let x0 = a[k * n + start];
            let sigma: f64 = a[k * n + start + 1..(k + 1) * n].iter().map(|x| x * x).sum();
            diag[k] = a[k * n + k];
            if sigma == 0.0 {
                off[k] = x0;
                continue;
            }
            let norm = (x0 * x0 + sigma).sqrt();
            let beta = if x0 >= 0.0 { -norm } else { norm };
            let tau = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            let mut v = Vec::with_capacity(m);
            v.push(1.0);
            v.extend(a[k * n + start + 1..(k + 1) * n].iter().map(|x| x * scale));
            off[k] = beta;

            // p = tau * B v, with B the trailing block; only its upper triangle is kept current
            let p = &mut p[..m];
            p.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..m {
                let row = &a[(start + i) * (n + 1)..(start + i + 1) * n];
                let vi = v[i];
                p[i] += row[0] * vi + dot(&row[1..], &v[i + 1..]);
                for (pj, &r) in p[i + 1..].iter_mut().zip(&row[1..]) {
                    *pj += vi * r;
                }
            }
            p.iter_mut().for_each(|x| *x *= tau);
            let half = 0.5 * tau * dot(p, &v);
            for i in 0..m {
                p[i] -= half * v[i];
            }
            // B -= v p^T + p v^T
            for i in 0..m {
                let (vi, pi) = (v[i], p[i]);
                let row = &mut a[(start + i) * (n + 1)..(start + i + 1) * n];
                for ((r, &vj), &pj) in row.iter_mut().zip(&v[i..]).zip(&p[i..]) {
                    *r -= vi * pj + pi * vj;
                }
            }
            if keep_q {
                reflectors.push((start, tau, v));
            }
        }
        if n >= 2 {
            diag[n - 2] = a[(n - 2) * n + n - 2];
            off[n - 2] = a[(n - 2) * n + n - 1];
        }
        diag[n - 1] = a[(n - 1) * n + n - 1];

        let q = keep_q.then(|| accumulate_q(n, &reflectors));
        Self { n, diag, off, q }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn q(&self) -> Option<&[f64]> {
        self.q.as_deref()
    }

    /// Eigenvalues of `T` in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, SpectralError> {
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        ql_implicit(&mut d, &mut e)?;
        d.sort_by(f64::total_cmp);
        Ok(d)
    }

    /// Factorization of `T - z` for repeated solves.
    pub fn shifted(&self, z: Complex64) -> ShiftedTridiagonal<'_> {
        let n = self.n;
        // LDL^T-like elimination without pivoting: pivots have Im <= -Im z,
        // so they never vanish for Im z > 0.
        let mut pivots = Vec::with_capacity(n);
        let mut ratios = Vec::with_capacity(n.saturating_sub(1));
        let mut piv = Complex64::new(self.diag[0], 0.0) - z;
        pivots.push(piv);
        for i in 1..n {
            let l = self.off[i - 1] / piv;
            ratios.push(l);
            piv = Complex64::new(self.diag[i], 0.0) - z - l * self.off[i - 1];
            pivots.push(piv);
        }
        ShiftedTridiagonal { tri: self, pivots, ratios }
    }

    /// Diagonal of `(A - z)^-1`; requires the orthogonal factor.
    pub fn resolvent_diagonal(&self, z: Complex64) -> Vec<Complex64> {
        let q = self.q.as_deref().expect("resolvent diagonal needs the orthogonal factor");
        let n = self.n;
        let fac = self.shifted(z);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        (0..n)
            .map(|j| {
                let row = &q[j * n..(j + 1) * n];
                for (b, &r) in buf.iter_mut().zip(row) {
                    *b = Complex64::new(r, 0.0);
                }
                fac.solve_in_place(&mut buf);
                row.iter().zip(&buf).map(|(&r, &x)| x * r).sum()
            })
            .collect()
    }

    /// `(A - z)^-1 x` for a real vector `x`; requires the orthogonal factor.
    pub fn resolvent_apply(&self, z: Complex64, x: &[f64]) -> Vec<Complex64> {
        let q = self.q.as_deref().expect("resolvent apply needs the orthogonal factor");
        let n = self.n;
        // y = Q^T x
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (i, &xi) in x.iter().enumerate() {
            let row = &q[i * n..(i + 1) * n];
            for (yc, &qc) in y.iter_mut().zip(row) {
                yc.re += qc * xi;
            }
        }
        self.shifted(z).solve_in_place(&mut y);
        (0..n).map(|i| q[i * n..(i + 1) * n].iter().zip(&y).map(|(&a, &b)| b * a).sum()).collect()
    }
}

/// `T - z` factored as `L D L^T` (complex symmetric, no pivoting).
pub struct ShiftedTridiagonal<'a> {
    tri: &'a Tridiagonal,
    pivots: Vec<Complex64>,
    ratios: Vec<Complex64>,
}

impl ShiftedTridiagonal<'_> {
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.tri.n;
        for i in 1..n {
            let prev = b[i - 1];
            b[i] -= self.ratios[i - 1] * prev;
        }
        b[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            let next = b[i + 1];
            b[i] = (b[i] - next * self.tri.off[i]) / self.pivots[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Backward accumulation `Q = H_0 H_1 ... H_k`.
fn accumulate_q(n: usize, reflectors: &[(usize, f64, Vec<f64>)]) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    let mut y = vec![0.0; n];
    for (start, tau, v) in reflectors.iter().rev() {
        let start = *start;
        let y = &mut y[start..];
        y.iter_mut().for_each(|c| *c = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            let row = &q[(start + i) * n + start..(start + i + 1) * n];
            for (yc, &r) in y.iter_mut().zip(row) {
                *yc += vi * r;
            }
        }
        for (i, &vi) in v.iter().enumerate() {
            let f = tau * vi;
            let row = &mut q[(start + i) * n + start..(start + i + 1) * n];
            for (r, &yc) in row.iter_mut().zip(y.iter()) {
                *r -= f * yc;
            }
        }
    }
    q
}

/// Implicit-shift QL on a symmetric tridiagonal matrix, eigenvalues only.
///
/// `d` holds the diagonal, `e[i]` the entry coupling `i` and `i + 1`
/// (`e[n-1]` is scratch). On return `d` holds the unsorted eigenvalues.
pub fn ql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<(), SpectralError> {
    let n = d.len();
    assert_eq!(e.len(), n);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(SpectralError::NoConvergence { index: l, sweeps: MAX_QL_SWEEPS });
            }
            // Wilkinson-style shift from the leading 2x2 block
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = pythag(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = pythag(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `sqrt(a^2 + b^2)`, falling back to `hypot` only when squaring could
/// overflow or underflow.
#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    let big = a.abs().max(b.abs());
    if big < 1e150 && big > 1e-150 {
        (a * a + b * b).sqrt()
    } else {
        a.hypot(b)
    }
}

/// Eigenvalues of a dense symmetric row-major matrix, ascending.
pub fn symmetric_eigenvalues(n: usize, a: &[f64]) -> Result<Vec<f64>, SpectralError> {
    Tridiagonal::reduce(n, a, false).eigenvalues()
}
