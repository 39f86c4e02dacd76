//! Banded LU factorization with partial pivoting for complex matrices.
//!
//! The band is detected from the sparsity pattern; matrices assembled on
//! tensor grids with lexicographic node ordering have narrow bands, and a
//! fully dense matrix degrades gracefully to dense LU.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::ComplexSparseMatrix;

/// LAPACK-style band storage: entry (i, j) lives at row `kl + ku + i - j`
/// of column `j`; the extra `kl` upper rows hold pivoting fill-in.
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // caller guarantees |i - j| within the stored band
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    pub fn factor(a: &ComplexSparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch("band LU needs a square matrix".into()));
        }
        let n = a.nrows();
        let mut kl = 0usize;
        let mut ku = 0usize;
        for i in 0..n {
            for (j, _) in a.row(i) {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let ldab = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            ldab,
            ab: vec![Complex64::new(0.0, 0.0); ldab * n],
            ipiv: vec![0usize; n],
        };
        for i in 0..n {
            for (j, v) in a.row(i) {
                let k = lu.idx(i, j);
                lu.ab[k] = v;
            }
        }
        lu.factor_in_place()?;
        Ok(lu)
    }

    fn factor_in_place(&mut self) -> Result<()> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let scale = self
            .ab
            .iter()
            .fold(0.0f64, |m, v| m.max(v.norm()));
        for j in 0..n {
            let i_max = (j + kl).min(n - 1);
            // partial pivot within the column band
            let mut p = j;
            let mut best = self.ab[self.idx(j, j)].norm();
            for i in (j + 1)..=i_max {
                let v = self.ab[self.idx(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.ipiv[j] = p;
            if best <= 1e-300 * scale.max(1.0) {
                return Err(Error::SingularPencil(format!("zero pivot at column {j}")));
            }
            let j_hi = (j + kl + ku).min(n - 1);
            if p != j {
                for c in j..=j_hi {
                    let a = self.idx(j, c);
                    let b = self.idx(p, c);
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[self.idx(j, j)];
            if piv == Complex64::new(0.0, 0.0) {
                return Err(Error::SingularPencil(format!("zero pivot at column {j}")));
            }
            for i in (j + 1)..=i_max {
                let k = self.idx(i, j);
                let mult = self.ab[k] / piv;
                self.ab[k] = mult;
                if mult != Complex64::new(0.0, 0.0) {
                    for c in (j + 1)..=j_hi {
                        let kj = self.idx(j, c);
                        let ki = self.idx(i, c);
                        let t = mult * self.ab[kj];
                        self.ab[ki] -= t;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solve `A x = b` using the stored factors.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut x = b.to_vec();
        // forward: apply pivots and L
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let xj = x[j];
            if xj != Complex64::new(0.0, 0.0) {
                let i_max = (j + kl).min(n - 1);
                for i in (j + 1)..=i_max {
                    let t = self.ab[self.idx(i, j)] * xj;
                    x[i] -= t;
                }
            }
        }
        // backward: U
        for j in (0..n).rev() {
            x[j] /= self.ab[self.idx(j, j)];
            let xj = x[j];
            if xj != Complex64::new(0.0, 0.0) {
                let i_min = j.saturating_sub(kl + ku);
                for i in i_min..j {
                    let t = self.ab[self.idx(i, j)] * xj;
                    x[i] -= t;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, band: usize, rng: &mut ChaCha8Rng) -> ComplexSparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(band)..(i + band + 1).min(n) {
                t.push((
                    i,
                    j,
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
                ));
            }
            // diagonal dominance keeps the test matrices well conditioned
            t.push((i, i, Complex64::new(3.0 + band as f64, 1.0)));
        }
        ComplexSparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn solves_random_band_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(n, band) in &[(7usize, 1usize), (40, 3), (25, 24), (60, 7)] {
            let a = random_band(n, band, &mut rng);
            let b: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let lu = BandLu::factor(&a).unwrap();
            let x = lu.solve(&b);
            let ax = a.matvec(&x);
            let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            assert!(norm2(&r) / norm2(&b) < 1e-12, "n={n} band={band}");
        }
    }

    #[test]
    fn reports_singular_matrix() {
        let a = ComplexSparseMatrix::from_triplets(
            2,
            2,
            &[
                (0, 0, Complex64::new(1.0, 0.0)),
                (0, 1, Complex64::new(2.0, 0.0)),
                (1, 0, Complex64::new(2.0, 0.0)),
                (1, 1, Complex64::new(4.0, 0.0)),
            ],
        )
        .unwrap();
        assert!(matches!(
            BandLu::factor(&a),
            Err(Error::SingularPencil(_))
        ));
    }
}
