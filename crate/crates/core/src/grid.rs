//! Truncated tensor grid on `[-L, L]^{d-1} x (0, eps)`.
//!
//! Transverse nodes include both faces, where the boundary traces live.
//! Quadrature is trapezoidal; lateral closure is either a Dirichlet box
//! or periodic identification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateralBc {
    Dirichlet,
    Periodic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerGrid {
    pub d: usize,
    pub l: f64,
    pub n_lat: usize,
    pub epsilon: f64,
    pub n_trans: usize,
    pub lateral_bc: LateralBc,
    pub h_lat: f64,
    pub h_trans: f64,
}

impl LayerGrid {
    pub fn new(
        d: usize,
        l: f64,
        n_lat: usize,
        epsilon: f64,
        n_trans: usize,
        lateral_bc: LateralBc,
    ) -> Result<Self> {
        if !(2..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("d must be 2 or 3, got {d}")));
        }
        if l <= 0.0 || !l.is_finite() {
            return Err(Error::InvalidGrid("L must be positive".into()));
        }
        if n_lat < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 lateral points per axis, got {n_lat}"
            )));
        }
        if epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidGrid("epsilon must be positive".into()));
        }
        if n_trans < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 transverse points (both faces), got {n_trans}"
            )));
        }
        let h_lat = match lateral_bc {
            LateralBc::Dirichlet => 2.0 * l / (n_lat - 1) as f64,
            LateralBc::Periodic => 2.0 * l / n_lat as f64,
        };
        let h_trans = epsilon / (n_trans - 1) as f64;
        Ok(LayerGrid {
            d,
            l,
            n_lat,
            epsilon,
            n_trans,
            lateral_bc,
            h_lat,
            h_trans,
        })
    }

    pub fn n_lateral_axes(&self) -> usize {
        self.d - 1
    }

    pub fn n_lateral_nodes(&self) -> usize {
        self.n_lat.pow(self.n_lateral_axes() as u32)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_lateral_nodes() * self.n_trans
    }

    /// Global index of (lateral node, transverse node).
    pub fn node_index(&self, lat: usize, t: usize) -> usize {
        lat * self.n_trans + t
    }

    /// Decompose a lateral flat index into per-axis indices.
    pub fn lateral_multi_index(&self, lat: usize) -> [usize; 2] {
        match self.n_lateral_axes() {
            1 => [lat, 0],
            _ => [lat / self.n_lat, lat % self.n_lat],
        }
    }

    pub fn lateral_flat_index(&self, idx: &[usize]) -> usize {
        match self.n_lateral_axes() {
            1 => idx[0],
            _ => idx[0] * self.n_lat + idx[1],
        }
    }

    /// Coordinate of the `j`-th node along a lateral axis.
    pub fn lateral_coord(&self, j: usize) -> f64 {
        -self.l + j as f64 * self.h_lat
    }

    /// Lateral point of a flat lateral index (length d-1).
    pub fn lateral_point(&self, lat: usize) -> Vec<f64> {
        let mi = self.lateral_multi_index(lat);
        (0..self.n_lateral_axes())
            .map(|a| self.lateral_coord(mi[a]))
            .collect()
    }

    pub fn transverse_coord(&self, t: usize) -> f64 {
        t as f64 * self.h_trans
    }

    /// Trapezoid weight of the `j`-th node along a lateral axis.
    pub fn lateral_axis_weight(&self, j: usize) -> f64 {
        match self.lateral_bc {
            LateralBc::Periodic => self.h_lat,
            LateralBc::Dirichlet => {
                if j == 0 || j == self.n_lat - 1 {
                    0.5 * self.h_lat
                } else {
                    self.h_lat
                }
            }
        }
    }

    /// Product of axis weights for a flat lateral index.
    pub fn lateral_weight(&self, lat: usize) -> f64 {
        let mi = self.lateral_multi_index(lat);
        (0..self.n_lateral_axes())
            .map(|a| self.lateral_axis_weight(mi[a]))
            .product()
    }

    /// Trapezoid weight of transverse node `t`; weights sum to `epsilon`.
    pub fn transverse_weight(&self, t: usize) -> f64 {
        if t == 0 || t == self.n_trans - 1 {
            0.5 * self.h_trans
        } else {
            self.h_trans
        }
    }

    pub fn node_weight(&self, lat: usize, t: usize) -> f64 {
        self.lateral_weight(lat) * self.transverse_weight(t)
    }

    /// Permutation realizing the transverse flip `x_d -> eps - x_d`.
    pub fn transverse_flip_permutation(&self) -> Vec<usize> {
        let mut perm = vec![0usize; self.n_nodes()];
        for lat in 0..self.n_lateral_nodes() {
            for t in 0..self.n_trans {
                perm[self.node_index(lat, t)] = self.node_index(lat, self.n_trans - 1 - t);
            }
        }
        perm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weight_sum_is_box_volume() {
        let g = LayerGrid::new(2, 1.0, 3, 0.5, 2, LateralBc::Dirichlet).unwrap();
        assert_eq!(g.n_nodes(), 6);
        let sum: f64 = (0..g.n_lateral_nodes())
            .flat_map(|l| (0..g.n_trans).map(move |t| (l, t)))
            .map(|(l, t)| g.node_weight(l, t))
            .sum();
        assert_relative_eq!(sum, 1.0, max_relative = 1e-12);

        let g = LayerGrid::new(3, 2.0, 5, 0.3, 3, LateralBc::Dirichlet).unwrap();
        assert_eq!(g.n_nodes(), 75);
        let sum: f64 = (0..g.n_lateral_nodes())
            .flat_map(|l| (0..g.n_trans).map(move |t| (l, t)))
            .map(|(l, t)| g.node_weight(l, t))
            .sum();
        assert_relative_eq!(sum, 16.0 * 0.3, max_relative = 1e-12);
    }

    #[test]
    fn periodic_weights_uniform() {
        let g = LayerGrid::new(2, 1.0, 4, 0.5, 3, LateralBc::Periodic).unwrap();
        for j in 0..4 {
            assert_relative_eq!(g.lateral_axis_weight(j), g.h_lat);
        }
        let sum: f64 = (0..4).map(|j| g.lateral_axis_weight(j)).sum();
        assert_relative_eq!(sum, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(LayerGrid::new(2, 1.0, 3, 0.5, 1, LateralBc::Dirichlet).is_err());
        assert!(LayerGrid::new(4, 1.0, 3, 0.5, 2, LateralBc::Dirichlet).is_err());
        assert!(LayerGrid::new(2, -1.0, 3, 0.5, 2, LateralBc::Dirichlet).is_err());
        assert!(LayerGrid::new(2, 1.0, 2, 0.5, 2, LateralBc::Dirichlet).is_err());
    }

    #[test]
    fn flip_permutation_is_involutive() {
        let g = LayerGrid::new(2, 1.0, 5, 0.5, 4, LateralBc::Dirichlet).unwrap();
        let p = g.transverse_flip_permutation();
        for i in 0..g.n_nodes() {
            assert_eq!(p[p[i]], i);
        }
    }

    #[test]
    fn grid_serializes_to_json() {
        let g = LayerGrid::new(2, 1.0, 5, 0.5, 4, LateralBc::Dirichlet).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: LayerGrid = serde_json::from_str(&s).unwrap();
        assert_eq!(back.n_nodes(), g.n_nodes());
        assert_eq!(back.lateral_bc, g.lateral_bc);
    }
}
