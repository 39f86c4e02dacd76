//! Complex CSR sparse matrices with the few kernels the discrete operators
//! need, plus Matrix Market coordinate I/O for cross-tool debugging.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Compressed sparse row matrix over `Complex64`.
///
/// Column indices are strictly increasing within each row and exact zeros
/// produced during assembly are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl ComplexSparseMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Entries of row `i` as `(col, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// Build from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, Complex64)],
    ) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // ties broken by insertion order so duplicate contributions always
        // accumulate in the same sequence (bitwise-deterministic assembly)
        order.sort_unstable_by_key(|&k| (triplets[k].0, triplets[k].1, k));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut cur_row = 0usize;
        for k in order {
            let (i, j, v) = triplets[k];
            while cur_row < i {
                cur_row += 1;
                row_ptr[cur_row] = values.len();
            }
            if let (Some(&last_j), true) = (col_idx.last(), values.len() > row_ptr[i]) {
                if last_j == j {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            col_idx.push(j);
            values.push(v);
        }
        while cur_row < nrows {
            cur_row += 1;
            row_ptr[cur_row] = values.len();
        }
        let mut m = ComplexSparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        m.drop_zeros();
        Ok(m)
    }

    fn drop_zeros(&mut self) {
        let mut new_col = Vec::with_capacity(self.col_idx.len());
        let mut new_val = Vec::with_capacity(self.values.len());
        let mut new_ptr = vec![0usize; self.nrows + 1];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                if v != Complex64::new(0.0, 0.0) {
                    new_col.push(j);
                    new_val.push(v);
                }
            }
            new_ptr[i + 1] = new_val.len();
        }
        self.col_idx = new_col;
        self.values = new_val;
        self.row_ptr = new_ptr;
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn diagonal(d: &[Complex64]) -> Self {
        let n = d.len();
        let triplets: Vec<_> = d
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self::from_triplets(n, n, &triplets).unwrap()
    }

    pub fn real_diagonal(d: &[f64]) -> Self {
        let cd: Vec<Complex64> = d.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::diagonal(&cd)
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        for i in 0..self.nrows {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                triplets.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &triplets).unwrap()
    }

    pub fn conj_transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                triplets.push((j, i, v.conj()));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &triplets).unwrap()
    }

    /// `a * self + b * other`.
    pub fn linear_combination(
        &self,
        a: Complex64,
        other: &ComplexSparseMatrix,
        b: Complex64,
    ) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(
                "linear combination of unequal shapes".into(),
            ));
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                triplets.push((i, j, a * v));
            }
            for (j, v) in other.row(i) {
                triplets.push((i, j, b * v));
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn scale(&self, a: Complex64) -> Self {
        let mut m = self.clone();
        for v in &mut m.values {
            *v *= a;
        }
        m
    }

    /// Maximum absolute entry difference against `other` over the union
    /// pattern.
    pub fn max_abs_diff(&self, other: &ComplexSparseMatrix) -> f64 {
        let diff = self
            .linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
            .expect("shape mismatch in max_abs_diff");
        diff.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0f64, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.max_abs_diff(&self.conj_transpose()) <= tol
    }

    /// Apply a symmetric row/column permutation: `B = A[perm, perm]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.nrows || self.nrows != self.ncols {
            return Err(Error::DimensionMismatch("bad permutation".into()));
        }
        let mut inv = vec![0usize; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                triplets.push((inv[i], inv[j], v));
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Write in Matrix Market coordinate complex general format (1-based).
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix market stream".into()))??;
        let h = header.to_lowercase();
        if !h.starts_with("%%matrixmarket matrix coordinate") {
            return Err(Error::Parse(format!("unsupported header: {header}")));
        }
        let complex = h.contains("complex");
        if !h.contains("general") {
            return Err(Error::Parse("only 'general' symmetry supported".into()));
        }
        let mut size_line = None;
        for line in lines.by_ref() {
            let line = line?;
            if line.starts_with('%') || line.trim().is_empty() {
                continue;
            }
            size_line = Some(line);
            break;
        }
        let size_line = size_line.ok_or_else(|| Error::Parse("missing size line".into()))?;
        let dims: Vec<usize> = size_line
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("{e}"))))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Parse("bad size line".into()));
        }
        let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);
        let mut triplets = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let need = if complex { 4 } else { 3 };
            if toks.len() < need {
                return Err(Error::Parse(format!("bad entry line: {line}")));
            }
            let i: usize = toks[0].parse().map_err(|e| Error::Parse(format!("{e}")))?;
            let j: usize = toks[1].parse().map_err(|e| Error::Parse(format!("{e}")))?;
            let re: f64 = toks[2].parse().map_err(|e| Error::Parse(format!("{e}")))?;
            let im: f64 = if complex {
                toks[3].parse().map_err(|e| Error::Parse(format!("{e}")))?
            } else {
                0.0
            };
            triplets.push((i - 1, j - 1, Complex64::new(re, im)));
        }
        if triplets.len() != nnz {
            return Err(Error::Parse(format!(
                "expected {nnz} entries, found {}",
                triplets.len()
            )));
        }
        Self::from_triplets(nrows, ncols, &triplets)
    }
}

/// Euclidean dot product, conjugating the first argument.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
