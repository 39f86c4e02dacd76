//! Weighted operator-norm estimation by power iteration on the
//! Gram-adjoint composition.
//!
//! For a map `T` between quadrature spaces with Gram matrices `M_in` and
//! `M_out`, the estimated quantity is `sup ||T f||_out / ||f||_in`; the
//! iteration runs on `M_in^{-1} T^H M_out T`, which is self-adjoint and
//! positive semidefinite in the `M_in` inner product, so the Rayleigh
//! estimate grows monotonically toward the norm from below.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bandlu::BandLu;
use crate::error::Result;
use crate::sparse::{dot, ComplexSparseMatrix};

/// A linear map together with its Euclidean adjoint.
pub trait LinearMap {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>>;
    /// Conjugate-transpose action.
    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>>;
}

/// A sparse matrix as a `LinearMap`, with the adjoint cached.
pub struct MatrixMap {
    a: ComplexSparseMatrix,
    a_adjoint: ComplexSparseMatrix,
}

impl MatrixMap {
    pub fn new(a: &ComplexSparseMatrix) -> Self {
        MatrixMap {
            a_adjoint: a.conj_transpose(),
            a: a.clone(),
        }
    }
}

impl LinearMap for MatrixMap {
    fn dim_in(&self) -> usize {
        self.a.ncols()
    }
    fn dim_out(&self) -> usize {
        self.a.nrows()
    }
    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self.a.matvec(x))
    }
    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self.a_adjoint.matvec(y))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OpNormEstimate {
    /// Lower-bound estimate of the weighted operator norm.
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub last_rel_change: f64,
}

const STREAK_NEEDED: usize = 3;

/// Estimate `sup ||T f||_{M_out} / ||f||_{M_in}` by power iteration with a
/// seeded random start. Stops once the relative change of the estimate
/// stays below `tol` for three consecutive iterations.
pub fn weighted_opnorm(
    map: &dyn LinearMap,
    m_in: &ComplexSparseMatrix,
    m_out: &ComplexSparseMatrix,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<OpNormEstimate> {
    let n = map.dim_in();
    let m_in_solver = BandLu::factor(m_in)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    normalize_weighted(&mut v, m_in);

    let mut sigma = 0.0f64;
    let mut rel_change = f64::INFINITY;
    let mut streak = 0usize;
    let mut iterations = 0usize;
    for it in 1..=max_iters.max(1) {
        iterations = it;
        let w = map.apply(&v)?;
        let mw = m_out.matvec(&w);
        let sigma_sq = dot(&w, &mw).re.max(0.0);
        let new_sigma = sigma_sq.sqrt();
        if new_sigma == 0.0 {
            // zero map: the norm along this Krylov direction vanished
            return Ok(OpNormEstimate {
                value: 0.0,
                converged: true,
                iterations: it,
                last_rel_change: 0.0,
            });
        }
        rel_change = (new_sigma - sigma).abs() / new_sigma;
        sigma = sigma.max(new_sigma);
        if rel_change < tol {
            streak += 1;
            if streak >= STREAK_NEEDED {
                return Ok(OpNormEstimate {
                    value: sigma,
                    converged: true,
                    iterations: it,
                    last_rel_change: rel_change,
                });
            }
        } else {
            streak = 0;
        }
        let u = map.apply_adjoint(&mw)?;
        v = m_in_solver.solve(&u);
        normalize_weighted(&mut v, m_in);
    }
    Ok(OpNormEstimate {
        value: sigma,
        converged: false,
        iterations,
        last_rel_change: rel_change,
    })
}

fn normalize_weighted(v: &mut [Complex64], m: &ComplexSparseMatrix) {
    let mv = m.matvec(v);
    let nrm = dot(v, &mv).re.max(0.0).sqrt();
    if nrm > 0.0 {
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
}
