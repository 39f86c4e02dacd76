//! Grid-refinement consistency of the assembled layer operator: on a
//! separable exact eigenfunction of the continuum operator the discrete
//! residual must shrink at second order in the lateral spacing.
//!
//! The transverse factor `e^{-i alpha0 x_d}` satisfies the face condition
//! exactly, so for constant coupling the product with a lateral Fourier
//! mode is an exact eigenfunction with eigenvalue `k^2 + alpha0^2`. The
//! face rows of the form-derived operator are only first-order consistent,
//! so the transverse grid is refined quadratically with the lateral one to
//! keep that contribution subdominant.

use num_complex::Complex64;

use robin_layer::assembly::assemble_form_heps;
use robin_layer::grid::{LateralBc, LayerGrid};
use robin_layer::model::BoundaryCoupling;
use robin_layer::resolvent::fit_rate;
use robin_layer::sparse::dot;

#[test]
fn residual_order_is_at_least_1_8() {
    let alpha0 = 1.0;
    let l = 3.0;
    let m_mode = 2usize;
    let k = m_mode as f64 * std::f64::consts::PI / l;
    let epsilon = 0.3;
    let coupling = BoundaryCoupling::constant(alpha0);
    let lambda = k * k + alpha0 * alpha0;

    let mut hs = Vec::new();
    let mut residuals = Vec::new();
    for (n_lat, n_trans) in [(31usize, 8usize), (62, 32), (124, 128)] {
        let grid = LayerGrid::new(2, l, n_lat, epsilon, n_trans, LateralBc::Periodic).unwrap();
        let (s, mass) = assemble_form_heps(&grid, &coupling).unwrap();
        let mut u = vec![Complex64::new(0.0, 0.0); grid.n_nodes()];
        for lat in 0..grid.n_lateral_nodes() {
            let x = grid.lateral_coord(grid.lateral_multi_index(lat)[0]);
            for t in 0..grid.n_trans {
                let xd = grid.transverse_coord(t);
                u[grid.node_index(lat, t)] =
                    Complex64::new(0.0, -alpha0 * xd).exp() * (k * x).cos();
            }
        }
        let su = s.matvec(&u);
        let mu = mass.matvec(&u);
        // node-wise residual of M^{-1} S u - lambda u, measured in the
        // quadrature norm
        let r: Vec<Complex64> = su
            .iter()
            .zip(&mu)
            .zip(mass.values())
            .map(|((a, b), w)| (a - lambda * b) / w)
            .collect();
        let mr = mass.matvec(&r);
        let num = dot(&r, &mr).re.sqrt();
        let den = dot(&u, &mu).re.sqrt();
        hs.push(grid.h_lat);
        residuals.push(num / den);
    }
    let fit = fit_rate(&hs, &residuals).unwrap();
    assert!(
        fit.slope >= 1.8,
        "fitted consistency order {:.3} (residuals {residuals:?})",
        fit.slope
    );
    // the finest grid must actually be accurate, not merely convergent
    assert!(residuals[2] < 1e-2, "finest residual {:.3e}", residuals[2]);
}
