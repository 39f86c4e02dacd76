//! Shared helpers for the integration suites: dense reference solvers
//! built on an independent linear-algebra crate, optimal eigenvalue
//! matching, and a shooting-method reference for 1-D bound states.

#![allow(dead_code)]

use faer::complex_native::c64;
use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use robin_layer::sparse::ComplexSparseMatrix;

pub fn to_faer(m: &ComplexSparseMatrix) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for (j, v) in m.row(i) {
            out.write(i, j, c64::new(v.re, v.im));
        }
    }
    out
}

pub fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect()
}

/// Dense LU reference solve.
pub fn dense_solve(a: &ComplexSparseMatrix, b: &[Complex64]) -> Vec<Complex64> {
    let fa = to_faer(a);
    let fb = Mat::<c64>::from_fn(b.len(), 1, |i, _| c64::new(b[i].re, b[i].im));
    let x = fa.partial_piv_lu().solve(&fb);
    (0..b.len())
        .map(|i| {
            let v = x.read(i, 0);
            Complex64::new(v.re, v.im)
        })
        .collect()
}

/// Dense reference eigenvalues of a square matrix.
pub fn dense_eigenvalues(a: &ComplexSparseMatrix) -> Vec<Complex64> {
    let fa = to_faer(a);
    let evd: faer::solvers::Eigendecomposition<c64> = fa.eigendecomposition();
    let s = evd.s();
    (0..a.nrows())
        .map(|i| {
            let v = s.column_vector().read(i);
            Complex64::new(v.re, v.im)
        })
        .collect()
}

/// Dense reference eigenvalues of the pencil `A v = lambda M v` with
/// invertible `M`, via `M^{-1} A`.
pub fn dense_pencil_eigenvalues(
    a: &ComplexSparseMatrix,
    m: &ComplexSparseMatrix,
) -> Vec<Complex64> {
    let fa = to_faer(a);
    let fm = to_faer(m);
    let x = fm.partial_piv_lu().solve(&fa);
    let evd: faer::solvers::Eigendecomposition<c64> = x.eigendecomposition();
    let s = evd.s();
    (0..a.nrows())
        .map(|i| {
            let v = s.column_vector().read(i);
            Complex64::new(v.re, v.im)
        })
        .collect()
}

/// Dense reference for the weighted operator norm of a matrix map:
/// largest eigenvalue of `M_in^{-1} T^H M_out T`, square-rooted.
pub fn dense_weighted_opnorm(
    t: &ComplexSparseMatrix,
    m_in: &ComplexSparseMatrix,
    m_out: &ComplexSparseMatrix,
) -> f64 {
    let ft = to_faer(t);
    let fmin = to_faer(m_in);
    let fmout = to_faer(m_out);
    let g = ft.adjoint() * &fmout * &ft;
    let x = fmin.partial_piv_lu().solve(&g);
    let evd: faer::solvers::Eigendecomposition<c64> = x.eigendecomposition();
    let s = evd.s();
    let mut best = 0.0f64;
    for i in 0..t.ncols() {
        best = best.max(s.column_vector().read(i).re);
    }
    best.max(0.0).sqrt()
}

/// Minimum-cost perfect matching (Hungarian algorithm with potentials) on
/// a square cost matrix; returns `assign[row] = col`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // potentials and matching over a 1-based internal indexing
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[col] = row matched to col (1-based)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Largest matched distance between two equal-length eigenvalue lists
/// under the optimal pairing.
pub fn matched_eigenvalue_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).collect())
        .collect();
    let assign = hungarian(&cost);
    a.iter()
        .enumerate()
        .map(|(i, x)| (x - b[assign[i]]).norm())
        .fold(0.0, f64::max)
}

/// Smoothed indicator profile matching the step coupling: 1 on
/// `[0, half_width]`, cubic ramp to 0 over `smoothing`, 0 beyond.
pub fn step_beta(r: f64, half_width: f64, smoothing: f64) -> f64 {
    if r <= half_width {
        1.0
    } else if r >= half_width + smoothing {
        0.0
    } else {
        let t = (r - half_width) / smoothing;
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// Ground-state energy of `-psi'' + q(x) psi = mu psi` on the line for an
/// even potential `q` equal to the constant `q_inf` outside `[0, x_edge]`,
/// by shooting from an even start and matching the exact exponential decay
/// at the support edge; bisection on the mismatch.
///
/// Returns `None` when no state exists below `q_inf`.
pub fn shooting_ground_state(
    q: &dyn Fn(f64) -> f64,
    q_inf: f64,
    x_edge: f64,
    steps: usize,
) -> Option<f64> {
    let mismatch = |mu: f64| -> f64 {
        // RK4 on (psi, psi') from x = 0 with psi = 1, psi' = 0
        let h = x_edge / steps as f64;
        let mut y = [1.0f64, 0.0f64];
        let f = |x: f64, y: [f64; 2]| [y[1], (q(x) - mu) * y[0]];
        for k in 0..steps {
            let x = k as f64 * h;
            let k1 = f(x, y);
            let k2 = f(x + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f(x + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        }
        let kappa = (q_inf - mu).max(0.0).sqrt();
        y[1] + kappa * y[0]
    };
    // the ground state has no node inside the well, so the mismatch is a
    // smooth function with a single sign change below the edge
    let mut lo_q = f64::INFINITY;
    let samples = 4096;
    for i in 0..=samples {
        lo_q = lo_q.min(q(x_edge * i as f64 / samples as f64));
    }
    let mut lo = lo_q + 1e-12;
    let mut hi = q_inf - 1e-12;
    let f_lo = mismatch(lo);
    let f_hi = mismatch(hi);
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    let mut flo = f_lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = mismatch(mid);
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
