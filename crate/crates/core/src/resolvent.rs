//! Resolvent-difference study: applies the layer resolvent minus the
//! lifted effective resolvent, estimates its weighted operator norms in
//! both the L2 and the corrected W1 topology, sweeps the layer width, fits
//! convergence rates, and measures the transverse-channel decay ratio.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{corrector_diagonal, OperatorSet};
use crate::error::{Error, Result};
use crate::grid::{LateralBc, LayerGrid};
use crate::linalg::{weighted_opnorm, LinearMap, LinearSolver, SolverOptions};
use crate::model::{theorem_constants, BoundaryCoupling};
use crate::sparse::{dot, ComplexSparseMatrix};

/// Factorized pencils for one grid/coupling pair, ready for repeated
/// resolvent-difference applications.
pub struct ResolventOps {
    pub ops: OperatorSet,
    /// Factorization of `stiffness + mass` (the layer resolvent pencil).
    layer_solver: LinearSolver,
    /// Factorization of `h0 + m0` (the effective resolvent pencil).
    lateral_solver: LinearSolver,
    /// Node-wise multiplier `1 + Q`.
    corrector: Vec<Complex64>,
    /// `average^H` and `lift^H`, cached for adjoint applications.
    average_adj: ComplexSparseMatrix,
    lift_adj: ComplexSparseMatrix,
}

impl ResolventOps {
    pub fn build(
        grid: &LayerGrid,
        coupling: &BoundaryCoupling,
        opts: SolverOptions,
    ) -> Result<Self> {
        let ops = OperatorSet::build(grid, coupling)?;
        let one = Complex64::new(1.0, 0.0);
        let layer_solver = LinearSolver::shifted(&ops.stiffness, &ops.mass, one, opts)?;
        let lateral_solver = LinearSolver::shifted(&ops.h0, &ops.m0, one, opts)?;
        let corrector = corrector_diagonal(grid, coupling)?;
        let average_adj = ops.average.conj_transpose();
        let lift_adj = ops.lift.conj_transpose();
        Ok(ResolventOps {
            ops,
            layer_solver,
            lateral_solver,
            corrector,
            average_adj,
            lift_adj,
        })
    }

    /// `(H_eps + 1)^{-1} f` on the layer grid.
    pub fn layer_resolvent(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.layer_solver.solve(&self.ops.mass.matvec(f))
    }

    /// `(H_0 + 1)^{-1} g` on the lateral grid.
    pub fn lateral_resolvent(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        self.lateral_solver.solve(&self.ops.m0.matvec(g))
    }

    /// `(H_eps + 1)^{-1} f - lift (H_0 + 1)^{-1} average f`.
    pub fn apply_diff_l2(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let u = self.layer_resolvent(f)?;
        let v = self.lateral_resolvent(&self.ops.average.matvec(f))?;
        let lifted = self.ops.lift.matvec(&v);
        Ok(u.iter().zip(&lifted).map(|(a, b)| a - b).collect())
    }

    /// `(H_eps + 1)^{-1} f - (1 + Q) lift (H_0 + 1)^{-1} average f`,
    /// the corrected difference whose W1 norm stays `O(eps)`.
    pub fn apply_diff_w1(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let u = self.layer_resolvent(f)?;
        let v = self.lateral_resolvent(&self.ops.average.matvec(f))?;
        let lifted = self.ops.lift.matvec(&v);
        Ok(u.iter()
            .zip(lifted.iter().zip(&self.corrector))
            .map(|(a, (b, q))| a - q * b)
            .collect())
    }

    /// Euclidean adjoint of the difference map: needed by the norm
    /// estimator, which runs on `T^H M_out T`.
    fn apply_diff_adjoint(&self, g: &[Complex64], corrected: bool) -> Result<Vec<Complex64>> {
        // first term: (M (S + M)^{-H}) g
        let w = self.layer_solver.solve_adjoint(g)?;
        let term1 = self.ops.mass.matvec(&w);
        // second term: avg^H M0 (H0 + M0)^{-H} lift^H conj(1 + Q) g
        let gq: Vec<Complex64> = if corrected {
            g.iter()
                .zip(&self.corrector)
                .map(|(v, q)| q.conj() * v)
                .collect()
        } else {
            g.to_vec()
        };
        let y = self.lateral_solver.solve_adjoint(&self.lift_adj.matvec(&gq))?;
        let term2 = self.average_adj.matvec(&self.ops.m0.matvec(&y));
        Ok(term1.iter().zip(&term2).map(|(a, b)| a - b).collect())
    }
}

/// Which difference the norm estimator sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffKind {
    Plain,
    Corrected,
}

/// The resolvent difference as a `LinearMap` for the norm estimator.
pub struct DiffMap<'a> {
    res: &'a ResolventOps,
    kind: DiffKind,
}

impl<'a> DiffMap<'a> {
    pub fn new(res: &'a ResolventOps, kind: DiffKind) -> Self {
        DiffMap { res, kind }
    }
}

impl LinearMap for DiffMap<'_> {
    fn dim_in(&self) -> usize {
        self.res.ops.grid.n_nodes()
    }
    fn dim_out(&self) -> usize {
        self.res.ops.grid.n_nodes()
    }
    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        match self.kind {
            DiffKind::Plain => self.res.apply_diff_l2(x),
            DiffKind::Corrected => self.res.apply_diff_w1(x),
        }
    }
    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        self.res.apply_diff_adjoint(y, self.kind == DiffKind::Corrected)
    }
}

/// Grid provenance recorded with each report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridProvenance {
    pub d: usize,
    pub l: f64,
    pub n_lat: usize,
    pub n_trans: usize,
    pub lateral_bc: LateralBc,
    pub seed: u64,
}

/// Norm estimates and closed-form bounds for one layer width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventDiffReport {
    pub epsilon: f64,
    /// Estimated `L2 -> L2` norm of the plain difference.
    pub norm_l2: f64,
    /// `C * eps`.
    pub bound_l2: f64,
    /// Estimated `L2 -> W1` norm of the corrected difference.
    pub norm_w1_corrected: f64,
    /// Estimated `L2 -> W1` norm of the plain difference, for contrast.
    pub norm_w1_uncorrected: f64,
    /// `C(eps) * eps`.
    pub bound_w1: f64,
    /// Largest observed `||(H_eps+1)^{-1} Pperp f||_W1 / ||Pperp f||_L2`.
    pub lemma21_ratio: f64,
    /// `eps / pi`, the closed-form ceiling for `lemma21_ratio`.
    pub lemma21_bound: f64,
    pub all_converged: bool,
    pub provenance: GridProvenance,
}

fn weighted_norm(m: &ComplexSparseMatrix, v: &[Complex64]) -> f64 {
    dot(v, &m.matvec(v)).re.max(0.0).sqrt()
}

/// Estimate the theorem's operator norms and the transverse-channel ratio
/// on one grid.
pub fn estimate_theorem_norms(
    grid: &LayerGrid,
    coupling: &BoundaryCoupling,
    opts: SolverOptions,
    probes: usize,
    seed: u64,
) -> Result<ResolventDiffReport> {
    let consts = theorem_constants(coupling, grid.epsilon)?;
    let res = ResolventOps::build(grid, coupling, opts)?;
    let m_l2 = &res.ops.mass;
    let m_w1 = &res.ops.m_w1;

    let plain = DiffMap::new(&res, DiffKind::Plain);
    let corrected = DiffMap::new(&res, DiffKind::Corrected);
    let est_l2 = weighted_opnorm(&plain, m_l2, m_l2, 2000, 1e-6, seed)?;
    let est_w1c = weighted_opnorm(&corrected, m_l2, m_w1, 2000, 1e-6, seed.wrapping_add(1))?;
    let est_w1u = weighted_opnorm(&plain, m_l2, m_w1, 2000, 1e-6, seed.wrapping_add(2))?;

    // transverse channel: random probes projected onto the complement of
    // the transverse average
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let n = grid.n_nodes();
    let mut ratio = 0.0f64;
    for _ in 0..probes {
        let f: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let pf = res.ops.p_eps.matvec(&f);
        let perp: Vec<Complex64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
        let denom = weighted_norm(m_l2, &perp);
        if denom == 0.0 {
            continue;
        }
        let u = res.layer_resolvent(&perp)?;
        ratio = ratio.max(weighted_norm(m_w1, &u) / denom);
    }

    Ok(ResolventDiffReport {
        epsilon: grid.epsilon,
        norm_l2: est_l2.value,
        bound_l2: consts.c * grid.epsilon,
        norm_w1_corrected: est_w1c.value,
        norm_w1_uncorrected: est_w1u.value,
        bound_w1: consts.c_eps * grid.epsilon,
        lemma21_ratio: ratio,
        lemma21_bound: grid.epsilon / std::f64::consts::PI,
        all_converged: est_l2.converged && est_w1c.converged && est_w1u.converged,
        provenance: GridProvenance {
            d: grid.d,
            l: grid.l,
            n_lat: grid.n_lat,
            n_trans: grid.n_trans,
            lateral_bc: grid.lateral_bc,
            seed,
        },
    })
}

/// Lateral-grid policy shared across a sweep: the lateral grid stays fixed
/// and the transverse resolution follows the layer width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPolicy {
    pub d: usize,
    pub l: f64,
    pub n_lat: usize,
    pub lateral_bc: LateralBc,
    /// Floor for the transverse node count.
    pub n_trans_min: usize,
}

impl GridPolicy {
    /// Transverse node count for a layer width: enough nodes to keep the
    /// transverse spacing comparable to the lateral one, never below the
    /// floor.
    pub fn n_trans_for(&self, epsilon: f64) -> usize {
        let h_lat = 2.0 * self.l / (self.n_lat.max(2) as f64 - 1.0);
        let scaled = (8.0 * epsilon / h_lat).ceil() as usize;
        scaled.max(self.n_trans_min).max(2)
    }

    pub fn grid_for(&self, epsilon: f64) -> Result<LayerGrid> {
        LayerGrid::new(
            self.d,
            self.l,
            self.n_lat,
            epsilon,
            self.n_trans_for(epsilon),
            self.lateral_bc,
        )
    }
}

/// Log-log least-squares fit of norm against layer width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub epsilons: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fit `log(norm) = slope * log(eps) + intercept` by least squares.
pub fn fit_rate(epsilons: &[f64], norms: &[f64]) -> Result<RateFit> {
    if epsilons.len() != norms.len() || epsilons.len() < 2 {
        return Err(Error::Domain(
            "rate fit needs at least two matched (eps, norm) pairs".into(),
        ));
    }
    if epsilons.iter().any(|&e| e <= 0.0) || norms.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain(
            "rate fit needs strictly positive widths and norms".into(),
        ));
    }
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("rate fit needs distinct widths".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let p = slope * x + intercept;
            (y - p) * (y - p)
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(RateFit {
        epsilons: epsilons.to_vec(),
        norms: norms.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

/// Reports per layer width plus rate fits for the two estimated norms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateSweep {
    pub reports: Vec<ResolventDiffReport>,
    pub fit_l2: RateFit,
    pub fit_w1: RateFit,
    /// Widths dropped from the fits because an estimate did not converge.
    pub excluded: Vec<f64>,
}

/// Sweep the layer width under one grid policy and fit convergence rates.
pub fn rate_sweep(
    coupling: &BoundaryCoupling,
    epsilons: &[f64],
    policy: &GridPolicy,
    opts: SolverOptions,
    probes: usize,
    seed: u64,
) -> Result<RateSweep> {
    if epsilons.len() < 2 {
        return Err(Error::Domain("sweep needs at least two layer widths".into()));
    }
    let mut reports = Vec::with_capacity(epsilons.len());
    for (i, &eps) in epsilons.iter().enumerate() {
        let grid = policy.grid_for(eps)?;
        reports.push(estimate_theorem_norms(
            &grid,
            coupling,
            opts,
            probes,
            seed.wrapping_add(17 * i as u64),
        )?);
    }
    let mut kept_eps = Vec::new();
    let mut kept_l2 = Vec::new();
    let mut kept_w1 = Vec::new();
    let mut excluded = Vec::new();
    for r in &reports {
        if r.all_converged && r.norm_l2 > 0.0 && r.norm_w1_corrected > 0.0 {
            kept_eps.push(r.epsilon);
            kept_l2.push(r.norm_l2);
            kept_w1.push(r.norm_w1_corrected);
        } else {
            excluded.push(r.epsilon);
        }
    }
    let fit_l2 = fit_rate(&kept_eps, &kept_l2)?;
    let fit_w1 = fit_rate(&kept_eps, &kept_w1)?;
    Ok(RateSweep {
        reports,
        fit_l2,
        fit_w1,
        excluded,
    })
}

/// Richardson-style discretization margin: relative shift of the estimated
/// norm between a grid and its refinement. Reported, never assumed.
pub fn richardson_margin(
    coupling: &BoundaryCoupling,
    epsilon: f64,
    policy: &GridPolicy,
    opts: SolverOptions,
    seed: u64,
) -> Result<f64> {
    let coarse = policy.grid_for(epsilon)?;
    let fine_policy = GridPolicy {
        n_lat: 2 * policy.n_lat - 1,
        n_trans_min: 2 * policy.n_trans_min,
        ..policy.clone()
    };
    let fine = fine_policy.grid_for(epsilon)?;
    let rc = estimate_theorem_norms(&coarse, coupling, opts, 0, seed)?;
    let rf = estimate_theorem_norms(&fine, coupling, opts, 0, seed)?;
    let m_l2 = (rf.norm_l2 - rc.norm_l2).abs() / rf.norm_l2.max(1e-300);
    let m_w1 =
        (rf.norm_w1_corrected - rc.norm_w1_corrected).abs() / rf.norm_w1_corrected.max(1e-300);
    Ok(m_l2.max(m_w1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm2;

    fn benchmark_coupling() -> BoundaryCoupling {
        BoundaryCoupling::Gauss {
            alpha0: 1.0,
            amplitude: 0.5,
            sigma: 1.0,
        }
    }

    #[test]
    fn zero_coupling_diff_vanishes_on_transverse_constant_data() {
        let grid = LayerGrid::new(2, 4.0, 41, 0.2, 8, LateralBc::Dirichlet).unwrap();
        let zero = BoundaryCoupling::constant(0.0);
        let res = ResolventOps::build(&grid, &zero, SolverOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g: Vec<Complex64> = (0..grid.n_lateral_nodes())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let f = res.ops.lift.matvec(&g);
        let d = res.apply_diff_l2(&f).unwrap();
        let rel = norm2(&d) / norm2(&f);
        assert!(rel < 1e-8, "relative difference {rel:.3e}");
    }

    #[test]
    fn zero_coupling_corrected_equals_plain() {
        let grid = LayerGrid::new(2, 3.0, 25, 0.3, 6, LateralBc::Dirichlet).unwrap();
        let zero = BoundaryCoupling::constant(0.0);
        let res = ResolventOps::build(&grid, &zero, SolverOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f: Vec<Complex64> = (0..grid.n_nodes())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let a = res.apply_diff_l2(&f).unwrap();
        let b = res.apply_diff_w1(&f).unwrap();
        let d: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum();
        assert!(d.sqrt() < 1e-14);
    }

    #[test]
    fn adjoint_is_consistent_with_the_forward_map() {
        let grid = LayerGrid::new(2, 3.0, 21, 0.25, 6, LateralBc::Dirichlet).unwrap();
        let res =
            ResolventOps::build(&grid, &benchmark_coupling(), SolverOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = grid.n_nodes();
        for kind in [DiffKind::Plain, DiffKind::Corrected] {
            let map = DiffMap::new(&res, kind);
            let x: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let y: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            // <T x, y> == <x, T^H y>
            let lhs = dot(&y, &map.apply(&x).unwrap());
            let rhs = dot(&map.apply_adjoint(&y).unwrap(), &x);
            assert!(
                (lhs - rhs).norm() < 1e-8 * (lhs.norm() + 1.0),
                "{kind:?}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn zero_coupling_norm_respects_the_transverse_channel_bound() {
        // with no coupling the difference lives entirely on the
        // complement of the transverse average, controlled by eps/pi
        let grid = LayerGrid::new(2, 3.0, 31, 0.2, 10, LateralBc::Dirichlet).unwrap();
        let zero = BoundaryCoupling::constant(0.0);
        let report =
            estimate_theorem_norms(&grid, &zero, SolverOptions::default(), 10, 12).unwrap();
        assert!(report.all_converged);
        assert!(report.norm_l2 <= grid.epsilon / std::f64::consts::PI + 1e-6);
        assert!(report.lemma21_ratio <= report.lemma21_bound * 1.1);
    }

    #[test]
    fn rate_fit_recovers_a_synthetic_power_law() {
        let eps = [0.2, 0.1, 0.05, 0.025];
        let norms: Vec<f64> = eps.iter().map(|e: &f64| 0.7 * e.powf(1.3)).collect();
        let fit = fit_rate(&eps, &norms).unwrap();
        assert!((fit.slope - 1.3).abs() < 1e-12);
        assert!((fit.intercept - 0.7f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_is_deterministic_for_fixed_seed() {
        let grid = LayerGrid::new(2, 2.0, 17, 0.2, 6, LateralBc::Dirichlet).unwrap();
        let r1 = estimate_theorem_norms(
            &grid,
            &benchmark_coupling(),
            SolverOptions::default(),
            5,
            99,
        )
        .unwrap();
        let r2 = estimate_theorem_norms(
            &grid,
            &benchmark_coupling(),
            SolverOptions::default(),
            5,
            99,
        )
        .unwrap();
        assert_eq!(r1.norm_l2.to_bits(), r2.norm_l2.to_bits());
        assert_eq!(
            r1.norm_w1_corrected.to_bits(),
            r2.norm_w1_corrected.to_bits()
        );
        assert_eq!(r1.lemma21_ratio.to_bits(), r2.lemma21_ratio.to_bits());
    }
}
