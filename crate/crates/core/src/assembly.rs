//! Quadrature-based assembly of the discrete layer operator, the effective
//! lateral operator, the transverse averaging projection, and the Gram
//! matrices of the discrete L2 and W1 norms.
//!
//! The layer operator is assembled from its sesquilinear form: the gradient
//! part is a sum of per-edge difference quadratures and the boundary terms
//! enter as imaginary diagonal loads on the two face node sets, so the sign
//! convention of the two faces is fixed by construction.

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{LateralBc, LayerGrid};
use crate::model::BoundaryCoupling;
use crate::sparse::ComplexSparseMatrix;

fn push_edge(
    triplets: &mut Vec<(usize, usize, Complex64)>,
    i: usize,
    j: usize,
    coeff: f64,
) {
    let c = Complex64::new(coeff, 0.0);
    triplets.push((i, i, c));
    triplets.push((j, j, c));
    triplets.push((i, j, -c));
    triplets.push((j, i, -c));
}

/// Gradient quadrature over the layer: `u^H G u ~ int |grad u|^2`.
///
/// Shared by the layer stiffness and by the W1 Gram matrix, so the real
/// part of the stiffness quadratic form and the W1 seminorm agree exactly.
pub fn layer_gradient_matrix(grid: &LayerGrid) -> ComplexSparseMatrix {
    let n = grid.n_nodes();
    let mut triplets = Vec::new();

    // transverse edges
    for lat in 0..grid.n_lateral_nodes() {
        let wl = grid.lateral_weight(lat);
        for t in 0..grid.n_trans - 1 {
            push_edge(
                &mut triplets,
                grid.node_index(lat, t),
                grid.node_index(lat, t + 1),
                wl / grid.h_trans,
            );
        }
    }

    // lateral edges, one pass per lateral axis
    let axes = grid.n_lateral_axes();
    for axis in 0..axes {
        for lat in 0..grid.n_lateral_nodes() {
            let mi = grid.lateral_multi_index(lat);
            let cross_lat: f64 = (0..axes)
                .filter(|&a| a != axis)
                .map(|a| grid.lateral_axis_weight(mi[a]))
                .product();
            let j = mi[axis];
            for t in 0..grid.n_trans {
                let coeff = cross_lat * grid.transverse_weight(t) / grid.h_lat;
                let i_node = grid.node_index(lat, t);
                if j + 1 < grid.n_lat {
                    let mut nb = mi;
                    nb[axis] = j + 1;
                    let j_node = grid.node_index(grid.lateral_flat_index(&nb[..axes]), t);
                    push_edge(&mut triplets, i_node, j_node, coeff);
                }
                match grid.lateral_bc {
                    LateralBc::Periodic => {
                        if j + 1 == grid.n_lat {
                            let mut nb = mi;
                            nb[axis] = 0;
                            let j_node =
                                grid.node_index(grid.lateral_flat_index(&nb[..axes]), t);
                            push_edge(&mut triplets, i_node, j_node, coeff);
                        }
                    }
                    LateralBc::Dirichlet => {
                        // edges to the zero-valued virtual nodes one spacing
                        // outside the box
                        if j == 0 || j == grid.n_lat - 1 {
                            triplets.push((i_node, i_node, Complex64::new(coeff, 0.0)));
                        }
                    }
                }
            }
        }
    }
    ComplexSparseMatrix::from_triplets(n, n, &triplets).unwrap()
}

/// Gradient quadrature on the lateral grid alone.
pub fn lateral_gradient_matrix(grid: &LayerGrid) -> ComplexSparseMatrix {
    let n = grid.n_lateral_nodes();
    let mut triplets = Vec::new();
    let axes = grid.n_lateral_axes();
    for axis in 0..axes {
        for lat in 0..n {
            let mi = grid.lateral_multi_index(lat);
            let cross: f64 = (0..axes)
                .filter(|&a| a != axis)
                .map(|a| grid.lateral_axis_weight(mi[a]))
                .product();
            let coeff = cross / grid.h_lat;
            let j = mi[axis];
            if j + 1 < grid.n_lat {
                let mut nb = mi;
                nb[axis] = j + 1;
                push_edge(
                    &mut triplets,
                    lat,
                    grid.lateral_flat_index(&nb[..axes]),
                    coeff,
                );
            }
            match grid.lateral_bc {
                LateralBc::Periodic => {
                    if j + 1 == grid.n_lat {
                        let mut nb = mi;
                        nb[axis] = 0;
                        push_edge(
                            &mut triplets,
                            lat,
                            grid.lateral_flat_index(&nb[..axes]),
                            coeff,
                        );
                    }
                }
                LateralBc::Dirichlet => {
                    if j == 0 || j == grid.n_lat - 1 {
                        triplets.push((lat, lat, Complex64::new(coeff, 0.0)));
                    }
                }
            }
        }
    }
    ComplexSparseMatrix::from_triplets(n, n, &triplets).unwrap()
}

/// Assemble the layer form: gradient quadrature plus imaginary boundary
/// traces `+i alpha w'` on the upper face and `-i alpha w'` on the lower
/// face. Returns `(stiffness, mass)`; the generalized problem
/// `(stiffness + mass) u = mass f` realizes the shifted resolvent equation.
pub fn assemble_form_heps(
    grid: &LayerGrid,
    coupling: &BoundaryCoupling,
) -> Result<(ComplexSparseMatrix, ComplexSparseMatrix)> {
    coupling.validate()?;
    let n = grid.n_nodes();
    let grad = layer_gradient_matrix(grid);
    let mut triplets = Vec::with_capacity(2 * grid.n_lateral_nodes());
    for lat in 0..grid.n_lateral_nodes() {
        let xp = grid.lateral_point(lat);
        let a = coupling.eval(&xp)?;
        let wl = grid.lateral_weight(lat);
        let top = grid.node_index(lat, grid.n_trans - 1);
        let bottom = grid.node_index(lat, 0);
        triplets.push((top, top, Complex64::new(0.0, a * wl)));
        triplets.push((bottom, bottom, Complex64::new(0.0, -a * wl)));
    }
    let traces = ComplexSparseMatrix::from_triplets(n, n, &triplets)?;
    let stiffness = grad.linear_combination(
        Complex64::new(1.0, 0.0),
        &traces,
        Complex64::new(1.0, 0.0),
    )?;
    let mass = layer_mass_matrix(grid);
    Ok((stiffness, mass))
}

/// Diagonal L2 Gram of the layer quadrature.
pub fn layer_mass_matrix(grid: &LayerGrid) -> ComplexSparseMatrix {
    let n = grid.n_nodes();
    let mut d = vec![0.0f64; n];
    for lat in 0..grid.n_lateral_nodes() {
        for t in 0..grid.n_trans {
            d[grid.node_index(lat, t)] = grid.node_weight(lat, t);
        }
    }
    ComplexSparseMatrix::real_diagonal(&d)
}

/// Diagonal L2 Gram of the lateral quadrature.
pub fn lateral_mass_matrix(grid: &LayerGrid) -> ComplexSparseMatrix {
    let d: Vec<f64> = (0..grid.n_lateral_nodes())
        .map(|lat| grid.lateral_weight(lat))
        .collect();
    ComplexSparseMatrix::real_diagonal(&d)
}

/// Effective lateral operator: gradient quadrature plus `alpha^2` potential.
/// Hermitian by construction.
pub fn assemble_h0(
    grid: &LayerGrid,
    coupling: &BoundaryCoupling,
) -> Result<ComplexSparseMatrix> {
    coupling.validate()?;
    let grad = lateral_gradient_matrix(grid);
    let n = grid.n_lateral_nodes();
    let mut triplets = Vec::with_capacity(n);
    for lat in 0..n {
        let a = coupling.eval(&grid.lateral_point(lat))?;
        triplets.push((lat, lat, Complex64::new(a * a * grid.lateral_weight(lat), 0.0)));
    }
    let pot = ComplexSparseMatrix::from_triplets(n, n, &triplets)?;
    grad.linear_combination(Complex64::new(1.0, 0.0), &pot, Complex64::new(1.0, 0.0))
}

/// Transverse averaging projection and the transverse-constant embedding.
///
/// `average` maps layer vectors to lateral vectors by the transverse
/// quadrature mean; `lift` embeds lateral vectors as transverse-constant
/// layer vectors; `p_eps = lift * average`.
pub fn assemble_projection(
    grid: &LayerGrid,
) -> (ComplexSparseMatrix, ComplexSparseMatrix, ComplexSparseMatrix) {
    let n = grid.n_nodes();
    let nl = grid.n_lateral_nodes();
    let mut avg_t = Vec::with_capacity(nl * grid.n_trans);
    let mut lift_t = Vec::with_capacity(n);
    for lat in 0..nl {
        for t in 0..grid.n_trans {
            let node = grid.node_index(lat, t);
            avg_t.push((
                lat,
                node,
                Complex64::new(grid.transverse_weight(t) / grid.epsilon, 0.0),
            ));
            lift_t.push((node, lat, Complex64::new(1.0, 0.0)));
        }
    }
    let average = ComplexSparseMatrix::from_triplets(nl, n, &avg_t).unwrap();
    let lift = ComplexSparseMatrix::from_triplets(n, nl, &lift_t).unwrap();
    let mut p_t = Vec::with_capacity(nl * grid.n_trans * grid.n_trans);
    for lat in 0..nl {
        for t in 0..grid.n_trans {
            for s in 0..grid.n_trans {
                p_t.push((
                    grid.node_index(lat, t),
                    grid.node_index(lat, s),
                    Complex64::new(grid.transverse_weight(s) / grid.epsilon, 0.0),
                ));
            }
        }
    }
    let p_eps = ComplexSparseMatrix::from_triplets(n, n, &p_t).unwrap();
    (p_eps, lift, average)
}

/// The three Gram matrices: layer L2, layer W1, lateral L2.
pub fn gram_matrices(
    grid: &LayerGrid,
) -> (ComplexSparseMatrix, ComplexSparseMatrix, ComplexSparseMatrix) {
    let m_l2 = layer_mass_matrix(grid);
    let grad = layer_gradient_matrix(grid);
    let m_w1 = m_l2
        .linear_combination(Complex64::new(1.0, 0.0), &grad, Complex64::new(1.0, 0.0))
        .unwrap();
    let m0_l2 = lateral_mass_matrix(grid);
    (m_l2, m_w1, m0_l2)
}

/// Node-wise corrector multiplier `1 + Q = 1 - i alpha(x') x_d`.
pub fn corrector_diagonal(grid: &LayerGrid, coupling: &BoundaryCoupling) -> Result<Vec<Complex64>> {
    let mut d = vec![Complex64::new(1.0, 0.0); grid.n_nodes()];
    for lat in 0..grid.n_lateral_nodes() {
        let a = coupling.eval(&grid.lateral_point(lat))?;
        for t in 0..grid.n_trans {
            d[grid.node_index(lat, t)] = Complex64::new(1.0, -a * grid.transverse_coord(t));
        }
    }
    Ok(d)
}

/// Everything assembled on one grid for one coupling.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub grid: LayerGrid,
    pub coupling: BoundaryCoupling,
    /// Discretization of the layer form.
    pub stiffness: ComplexSparseMatrix,
    /// Layer L2 Gram (diagonal).
    pub mass: ComplexSparseMatrix,
    /// Effective lateral operator.
    pub h0: ComplexSparseMatrix,
    /// Lateral L2 Gram (diagonal).
    pub m0: ComplexSparseMatrix,
    pub p_eps: ComplexSparseMatrix,
    pub lift: ComplexSparseMatrix,
    pub average: ComplexSparseMatrix,
    pub m_w1: ComplexSparseMatrix,
}

impl OperatorSet {
    pub fn build(grid: &LayerGrid, coupling: &BoundaryCoupling) -> Result<Self> {
        let (stiffness, mass) = assemble_form_heps(grid, coupling)?;
        let h0 = assemble_h0(grid, coupling)?;
        let (p_eps, lift, average) = assemble_projection(grid);
        let (_, m_w1, m0) = gram_matrices(grid);
        Ok(OperatorSet {
            grid: grid.clone(),
            coupling: coupling.clone(),
            stiffness,
            mass,
            h0,
            m0,
            p_eps,
            lift,
            average,
            m_w1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dot;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn neumann_layer_is_hermitian_with_constant_kernel() {
        let grid = LayerGrid::new(2, 1.0, 7, 0.4, 4, LateralBc::Periodic).unwrap();
        let zero = BoundaryCoupling::constant(0.0);
        let (s, m) = assemble_form_heps(&grid, &zero).unwrap();
        assert!(s.is_hermitian(1e-13));
        // constant vector is in the kernel of the stiffness
        let ones = vec![Complex64::new(1.0, 0.0); grid.n_nodes()];
        let su = s.matvec(&ones);
        assert!(su.iter().all(|v| v.norm() < 1e-13));
        // mass trace equals box volume
        let tr: f64 = m.values().iter().map(|v| v.re).sum();
        assert_relative_eq!(tr, 2.0 * 0.4, max_relative = 1e-12);
    }

    #[test]
    fn adjoint_rule_flips_coupling_sign() {
        let grid = LayerGrid::new(2, 2.0, 9, 0.3, 5, LateralBc::Dirichlet).unwrap();
        let plus = BoundaryCoupling::Gauss {
            alpha0: 1.0,
            amplitude: 0.5,
            sigma: 1.0,
        };
        let minus = BoundaryCoupling::Gauss {
            alpha0: -1.0,
            amplitude: -0.5,
            sigma: 1.0,
        };
        let (sp, _) = assemble_form_heps(&grid, &plus).unwrap();
        let (sm, _) = assemble_form_heps(&grid, &minus).unwrap();
        assert_eq!(sp.conj_transpose().max_abs_diff(&sm), 0.0);
    }

    #[test]
    fn pt_symmetry_flip_conjugation_identity() {
        let grid = LayerGrid::new(2, 2.0, 9, 0.3, 5, LateralBc::Dirichlet).unwrap();
        let coupling = BoundaryCoupling::Gauss {
            alpha0: 1.0,
            amplitude: 0.5,
            sigma: 1.0,
        };
        let (s, _) = assemble_form_heps(&grid, &coupling).unwrap();
        let flipped = s.permuted(&grid.transverse_flip_permutation()).unwrap();
        // conj(S_flipped) == S, entrywise and exactly
        let conj_flipped = flipped.conj_transpose().transpose();
        assert_eq!(conj_flipped.max_abs_diff(&s), 0.0);
    }

    #[test]
    fn h0_is_hermitian_and_shifts_with_constant_coupling() {
        let grid = LayerGrid::new(2, 2.0, 11, 0.3, 4, LateralBc::Dirichlet).unwrap();
        let c = BoundaryCoupling::constant(2.0);
        let h = assemble_h0(&grid, &c).unwrap();
        assert!(h.is_hermitian(1e-13));
        let zero = BoundaryCoupling::constant(0.0);
        let h_free = assemble_h0(&grid, &zero).unwrap();
        let m0 = lateral_mass_matrix(&grid);
        let shifted = h_free
            .linear_combination(Complex64::new(1.0, 0.0), &m0, Complex64::new(4.0, 0.0))
            .unwrap();
        assert!(h.max_abs_diff(&shifted) < 1e-12);
    }

    #[test]
    fn h0_free_has_standard_stencil_pattern() {
        let grid = LayerGrid::new(2, 2.0, 7, 0.3, 2, LateralBc::Dirichlet).unwrap();
        let h = assemble_h0(&grid, &BoundaryCoupling::constant(0.0)).unwrap();
        let inv_h = 1.0 / grid.h_lat;
        for i in 0..7usize {
            for (j, v) in h.row(i) {
                let expect = if i == j { 2.0 * inv_h } else { -inv_h };
                assert_relative_eq!(v.re, expect, max_relative = 1e-13);
                assert_eq!(v.im, 0.0);
            }
        }
    }

    #[test]
    fn projection_identities() {
        let grid = LayerGrid::new(2, 1.5, 8, 0.5, 9, LateralBc::Dirichlet).unwrap();
        let (p, lift, avg) = assemble_projection(&grid);
        let m = layer_mass_matrix(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(7);

        // transverse-constant data is fixed by P
        let g = random_vec(grid.n_lateral_nodes(), &mut rng);
        let u = lift.matvec(&g);
        let pu = p.matvec(&u);
        let diff: f64 = u.iter().zip(&pu).map(|(a, b)| (a - b).norm()).sum();
        assert!(diff < 1e-12);

        // P^2 = P and M-self-adjointness on random vectors
        for _ in 0..20 {
            let f = random_vec(grid.n_nodes(), &mut rng);
            let pf = p.matvec(&f);
            let ppf = p.matvec(&pf);
            let num: f64 = pf.iter().zip(&ppf).map(|(a, b)| (a - b).norm_sqr()).sum();
            assert!(num.sqrt() < 1e-10);
            let h = random_vec(grid.n_nodes(), &mut rng);
            let lhs = dot(&m.matvec(&p.matvec(&f)), &h);
            let rhs = dot(&m.matvec(&f), &p.matvec(&h));
            assert!((lhs - rhs).norm() < 1e-10 * (lhs.norm() + 1.0));
        }

        // first transverse cosine mode averages to zero under the quadrature
        // that the projection itself uses (uniform interior weights kill the
        // sampled cosine sum exactly for this node layout)
        let nt = grid.n_trans;
        let mut u = vec![Complex64::new(0.0, 0.0); grid.n_nodes()];
        for lat in 0..grid.n_lateral_nodes() {
            for t in 0..nt {
                let x = grid.transverse_coord(t);
                u[grid.node_index(lat, t)] = Complex64::new(
                    (std::f64::consts::PI * x / grid.epsilon).cos(),
                    0.0,
                );
            }
        }
        let a = avg.matvec(&u);
        assert!(a.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn l2_norm_splits_across_projection() {
        // || f ||^2 = eps || P f ||_lat^2 + || Pperp f ||^2
        let grid = LayerGrid::new(2, 1.0, 6, 0.3, 7, LateralBc::Dirichlet).unwrap();
        let (p, _lift, avg) = assemble_projection(&grid);
        let m = layer_mass_matrix(&grid);
        let m0 = lateral_mass_matrix(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let f = random_vec(grid.n_nodes(), &mut rng);
            let pf = p.matvec(&f);
            let perp: Vec<Complex64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
            let total = dot(&m.matvec(&f), &f).re;
            let lat_part = grid.epsilon * dot(&m0.matvec(&avg.matvec(&f)), &avg.matvec(&f)).re;
            let perp_part = dot(&m.matvec(&perp), &perp).re;
            assert_relative_eq!(total, lat_part + perp_part, max_relative = 1e-10);
        }
    }

    #[test]
    fn w1_gram_measures_gradients() {
        // periodic laterally, so the transverse-linear profile has gradient
        // energy exactly equal to the box volume
        let grid = LayerGrid::new(2, 1.0, 41, 0.5, 21, LateralBc::Periodic).unwrap();
        let (m_l2, m_w1, _) = gram_matrices(&grid);

        let mut u = vec![Complex64::new(0.0, 0.0); grid.n_nodes()];
        for lat in 0..grid.n_lateral_nodes() {
            for t in 0..grid.n_trans {
                u[grid.node_index(lat, t)] =
                    Complex64::new(grid.transverse_coord(t), 0.0);
            }
        }
        let l2 = dot(&m_l2.matvec(&u), &u).re;
        let w1 = dot(&m_w1.matvec(&u), &u).re;
        // gradient energy of x_d over the box is its volume
        assert_relative_eq!(w1 - l2, 2.0 * 0.5, max_relative = 1e-10);

        let tr: f64 = m_l2.values().iter().map(|v| v.re).sum();
        assert_relative_eq!(tr, 2.0 * 0.5, max_relative = 1e-12);

        // laterally constant data has no lateral gradient energy at all
        let ones = vec![Complex64::new(1.0, 0.0); grid.n_nodes()];
        let g1 = dot(&m_w1.matvec(&ones), &ones).re - dot(&m_l2.matvec(&ones), &ones).re;
        assert!(g1.abs() < 1e-12);
    }

    #[test]
    fn numerical_range_respects_the_enclosure() {
        let grid = LayerGrid::new(2, 3.0, 31, 0.3, 8, LateralBc::Dirichlet).unwrap();
        let coupling = BoundaryCoupling::Gauss {
            alpha0: 1.0,
            amplitude: 0.5,
            sigma: 1.0,
        };
        let (s, m) = assemble_form_heps(&grid, &coupling).unwrap();
        let asup = coupling.sup_norms().alpha;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let v = random_vec(grid.n_nodes(), &mut rng);
            let num = dot(&s.matvec(&v), &v);
            let den = dot(&m.matvec(&v), &v).re;
            let z = num / den;
            assert!(z.re >= -1e-10);
            assert!(z.im.abs() <= 2.0 * asup * z.re.max(0.0).sqrt() + 1e-8);
        }
    }
}
