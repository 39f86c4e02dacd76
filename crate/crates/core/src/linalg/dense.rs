//! Small dense complex eigensolver: shifted QR iteration with Givens
//! rotations on Hessenberg matrices, with accumulated Schur vectors.
//!
//! Used to extract Ritz values and vectors from Arnoldi projections; sizes
//! are a few dozen, so an unblocked implementation is adequate.

use num_complex::Complex64;

use super::gmres::givens;
use crate::error::{Error, Result};

/// Dense row-major square complex matrix.
#[derive(Debug, Clone)]
pub struct Dense {
    pub n: usize,
    pub a: Vec<Complex64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Dense {
            n,
            a: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }

    fn norm_frobenius(&self) -> f64 {
        self.a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rotate rows `i`, `i+1` over columns `from..n`.
    fn rotate_rows(&mut self, i: usize, c: Complex64, s: Complex64, from: usize) {
        for j in from..self.n {
            let a = self.at(i, j);
            let b = self.at(i + 1, j);
            self.set(i, j, c * a + s * b);
            self.set(i + 1, j, -s.conj() * a + c * b);
        }
    }

    /// Rotate columns `i`, `i+1` over rows `0..=to`.
    fn rotate_cols(&mut self, i: usize, c: Complex64, s: Complex64, to: usize) {
        for r in 0..=to.min(self.n - 1) {
            let a = self.at(r, i);
            let b = self.at(r, i + 1);
            self.set(r, i, c * a + s.conj() * b);
            self.set(r, i + 1, -s * a + c * b);
        }
    }
}

/// Reduce an upper Hessenberg matrix to Schur form `H = Q T Q^H`.
///
/// Returns `(t, q)` with `t` upper triangular (eigenvalues on the
/// diagonal) and `q` unitary.
pub fn schur_hessenberg(h: &Dense) -> Result<(Dense, Dense)> {
    let n = h.n;
    let mut t = h.clone();
    let mut q = Dense::identity(n);
    if n == 0 {
        return Ok((t, q));
    }
    let scale = t.norm_frobenius().max(1e-300);
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter_in_block = 0usize;
    let mut total_iters = 0usize;
    let max_total = 80 * n + 200;

    loop {
        // deflate negligible subdiagonals
        for i in 0..hi {
            let sub = t.at(i + 1, i).norm();
            if sub <= eps * (t.at(i, i).norm() + t.at(i + 1, i + 1).norm()).max(scale * eps) {
                t.set(i + 1, i, Complex64::new(0.0, 0.0));
            }
        }
        while hi > 0 && t.at(hi, hi - 1) == Complex64::new(0.0, 0.0) {
            hi -= 1;
            iter_in_block = 0;
        }
        if hi == 0 {
            break;
        }
        let mut lo = hi;
        while lo > 0 && t.at(lo, lo - 1) != Complex64::new(0.0, 0.0) {
            lo -= 1;
        }

        total_iters += 1;
        iter_in_block += 1;
        if total_iters > max_total {
            return Err(Error::NoConvergence {
                context: "QR iteration did not deflate".into(),
                iterations: total_iters,
            });
        }

        // Wilkinson shift from the trailing 2x2, exceptional shift on
        // stagnation
        let mu = if iter_in_block % 14 == 13 {
            t.at(hi, hi) + Complex64::new(1.5 * t.at(hi, hi - 1).norm(), 0.0)
        } else {
            let a = t.at(hi - 1, hi - 1);
            let b = t.at(hi - 1, hi);
            let c = t.at(hi, hi - 1);
            let d = t.at(hi, hi);
            let tr_half = (a + d) * 0.5;
            let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
            let l1 = tr_half + disc;
            let l2 = tr_half - disc;
            if (l1 - d).norm() <= (l2 - d).norm() {
                l1
            } else {
                l2
            }
        };

        // explicit single-shift bulge chase on the active block
        let mut x = t.at(lo, lo) - mu;
        let mut z = t.at(lo + 1, lo);
        for i in lo..hi {
            let (c, s) = givens(x, z);
            let from = if i == lo { lo } else { i - 1 };
            t.rotate_rows(i, c, s, from);
            t.rotate_cols(i, c, s, (i + 2).min(hi));
            q.rotate_cols(i, c, s, n - 1);
            if i + 1 < hi {
                x = t.at(i + 1, i);
                z = t.at(i + 2, i);
            }
        }
    }
    // clean strictly-lower part
    for i in 1..n {
        for j in 0..i {
            t.set(i, j, Complex64::new(0.0, 0.0));
        }
    }
    Ok((t, q))
}

/// Eigenvector of the upper-triangular `t` for the eigenvalue at diagonal
/// position `k`, by back-substitution (length n, supported on `0..=k`).
pub fn triangular_eigenvector(t: &Dense, k: usize) -> Vec<Complex64> {
    let n = t.n;
    let scale = t.norm_frobenius().max(1e-300);
    let lambda = t.at(k, k);
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    y[k] = Complex64::new(1.0, 0.0);
    for i in (0..k).rev() {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in (i + 1)..=k {
            acc += t.at(i, j) * y[j];
        }
        let mut denom = t.at(i, i) - lambda;
        if denom.norm() < f64::EPSILON * scale {
            denom = Complex64::new(f64::EPSILON * scale, 0.0);
        }
        y[i] = -acc / denom;
    }
    let nrm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    for v in &mut y {
        *v /= nrm;
    }
    y
}

/// Eigenvalues and (unnormalized) eigenvectors of an upper Hessenberg
/// matrix.
pub fn hessenberg_eigen(h: &Dense) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let (t, q) = schur_hessenberg(h)?;
    let n = h.n;
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        values.push(t.at(k, k));
        let y = triangular_eigenvector(&t, k);
        let v = (0..n)
            .map(|i| (0..n).map(|j| q.at(i, j) * y[j]).sum())
            .collect();
        vectors.push(v);
    }
    Ok((values, vectors))
}
