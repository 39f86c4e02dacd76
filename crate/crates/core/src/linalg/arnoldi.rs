//! Shift-invert Arnoldi for the generalized pencil `A v = lambda M v`.
//!
//! The iteration runs on `(A - tau M)^{-1} M`, whose dominant eigenvalues
//! `theta` correspond to pencil eigenvalues `lambda = tau + 1/theta`
//! closest to the target `tau`. Ritz pairs are accepted only when the
//! explicit pencil residual is small relative to the matrix norms, so a
//! returned eigenpair never depends on the projection being well
//! conditioned.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dense::{hessenberg_eigen, Dense};
use super::{LinearSolver, SolverOptions};
use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, ComplexSparseMatrix};

/// Converged eigenpairs of a pencil, sorted by distance from the target.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<Complex64>,
    /// Relative pencil residuals `||A v - lambda M v|| / ||v||`, scaled by
    /// `||A||_inf + |lambda| ||M||_inf`.
    pub residuals: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub n_converged: usize,
}

/// Compute up to `k` eigenvalues of `A v = lambda M v` nearest `target`.
pub fn shift_invert_arnoldi(
    a: &ComplexSparseMatrix,
    m: &ComplexSparseMatrix,
    target: Complex64,
    k: usize,
    tol: f64,
    opts: SolverOptions,
    seed: u64,
) -> Result<EigenResult> {
    let n = a.nrows();
    if m.nrows() != n || m.ncols() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(
            "pencil matrices must be square and equal-sized".into(),
        ));
    }
    let k = k.min(n);
    if k == 0 {
        return Ok(EigenResult {
            eigenvalues: vec![],
            residuals: vec![],
            vectors: vec![],
            n_converged: 0,
        });
    }
    let solver = LinearSolver::shifted(a, m, -target, opts)?;
    let scale = a.norm_inf().max(1e-300);
    let m_scale = m.norm_inf();

    // subspace of 2k+10 usually converges the k wanted pairs; retry once
    // with a larger space if not
    let mut subspace = (2 * k + 10).min(n);
    for attempt in 0..2 {
        let result = run_arnoldi(&solver, a, m, target, k, subspace, tol, scale, m_scale, seed)?;
        if result.n_converged >= k || attempt == 1 || subspace == n {
            return Ok(result);
        }
        subspace = (2 * subspace).min(n);
    }
    unreachable!()
}

#[allow(clippy::too_many_arguments)]
fn run_arnoldi(
    solver: &LinearSolver,
    a: &ComplexSparseMatrix,
    m: &ComplexSparseMatrix,
    target: Complex64,
    k: usize,
    subspace: usize,
    tol: f64,
    scale: f64,
    m_scale: f64,
    seed: u64,
) -> Result<EigenResult> {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(subspace + 1);
    let mut h = Dense::zeros(subspace + 1);
    let mut v0: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let n0 = norm2(&v0);
    for z in &mut v0 {
        *z /= n0;
    }
    v.push(v0);

    let mut steps = 0usize;
    while steps < subspace {
        let j = steps;
        let mut w = solver.solve(&m.matvec(&v[j]))?;
        // modified Gram-Schmidt with one full reorthogonalization pass
        for _ in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(vi, &w);
                h.set(i, j, h.at(i, j) + hij);
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
        }
        let wn = norm2(&w);
        steps += 1;
        if wn <= 1e-12 {
            // invariant subspace found: restart the basis in a random
            // direction orthogonal to what we have
            if steps >= subspace || v.len() >= n {
                break;
            }
            let mut r: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            for _ in 0..2 {
                for vi in v.iter() {
                    let c = dot(vi, &r);
                    for (rk, vk) in r.iter_mut().zip(vi) {
                        *rk -= c * vk;
                    }
                }
            }
            let rn = norm2(&r);
            if rn <= 1e-12 {
                break;
            }
            h.set(j + 1, j, Complex64::new(0.0, 0.0));
            v.push(r.iter().map(|z| z / rn).collect());
            continue;
        }
        h.set(j + 1, j, Complex64::new(wn, 0.0));
        v.push(w.iter().map(|z| z / wn).collect());
    }

    let dim = steps;
    let mut hk = Dense::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            hk.set(i, j, h.at(i, j));
        }
    }
    let (thetas, ys) = hessenberg_eigen(&hk)?;

    // map Ritz values back to the pencil and verify explicit residuals
    let mut candidates: Vec<(Complex64, f64, Vec<Complex64>)> = Vec::new();
    for (theta, y) in thetas.iter().zip(&ys) {
        if theta.norm() <= 1e-14 {
            continue;
        }
        let lambda = target + Complex64::new(1.0, 0.0) / theta;
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
        let xn = norm2(&x);
        if xn == 0.0 {
            continue;
        }
        for z in &mut x {
            *z /= xn;
        }
        let ax = a.matvec(&x);
        let mx = m.matvec(&x);
        let res: f64 = ax
            .iter()
            .zip(&mx)
            .map(|(p, q)| (p - lambda * q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let denom = scale + lambda.norm() * m_scale;
        candidates.push((lambda, res / denom, x));
    }
    candidates.sort_by(|p, q| {
        (p.0 - target)
            .norm()
            .partial_cmp(&(q.0 - target).norm())
            .unwrap()
    });
    candidates.truncate(k);

    let n_converged = candidates.iter().filter(|c| c.1 <= tol).count();
    let mut eigenvalues = Vec::with_capacity(candidates.len());
    let mut residuals = Vec::with_capacity(candidates.len());
    let mut vectors = Vec::with_capacity(candidates.len());
    for (lam, res, x) in candidates {
        eigenvalues.push(lam);
        residuals.push(res);
        vectors.push(x);
    }
    Ok(EigenResult {
        eigenvalues,
        residuals,
        vectors,
        n_converged,
    })
}
