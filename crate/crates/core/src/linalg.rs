//! Small dense and sparse linear-algebra helpers on top of `nalgebra`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::math::{ln, sign};

/// Compressed sparse row operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOp {
    /// Rows of `(column, value)` in any order; duplicates are summed and
    /// zeros dropped.
    pub fn from_rows<R>(ncols: usize, rows: impl IntoIterator<Item = R>) -> Self
    where
        R: IntoIterator<Item = (usize, f64)>,
    {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for row in rows {
            entries.clear();
            entries.extend(row);
            entries.sort_by_key(|e| e.0);
            let start = indices.len();
            for &(j, v) in &entries {
                assert!(j < ncols, "column {j} out of range");
                if indices.len() > start && indices[indices.len() - 1] == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                }
            }
            let mut k = start;
            for i in start..indices.len() {
                if values[i] != 0.0 {
                    indices[k] = indices[i];
                    values[k] = values[i];
                    k += 1;
                }
            }
            indices.truncate(k);
            values.truncate(k);
            indptr.push(indices.len());
        }
        SparseOp { nrows: indptr.len() - 1, ncols, indptr, indices, values }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        Self::from_rows(m.ncols(), (0..m.nrows()).map(|i| (0..m.ncols()).map(move |j| (j, m[(i, j)]))))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] += self.values[k];
            }
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.indptr[i]..self.indptr[i + 1] {
            s += self.values[k] * x[self.indices[k]];
        }
        s
    }

    /// `out = A x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for (i, o) in out.iter_mut().enumerate().take(self.nrows) {
            *o = self.row_dot(i, x);
        }
    }

    /// `out = Aᵀ y`
    pub fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate().take(self.nrows) {
            if yi == 0.0 {
                continue;
            }
            for k in self.indptr[i]..self.indptr[i + 1] {
                out[self.indices[k]] += self.values[k] * yi;
            }
        }
    }

    /// ‖A x‖₁
    pub fn l1_of_product(&self, x: &[f64]) -> f64 {
        (0..self.nrows).map(|i| self.row_dot(i, x).abs()).sum()
    }

    /// ‖A x‖₂²
    pub fn sq_of_product(&self, x: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|i| {
                let r = self.row_dot(i, x);
                r * r
            })
            .sum()
    }

    /// `out += scale · Aᵀ sign(A x)` and returns ‖A x‖₁.
    pub fn add_sign_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) -> f64 {
        let mut l1 = 0.0;
        for i in 0..self.nrows {
            let r = self.row_dot(i, x);
            l1 += r.abs();
            let s = scale * sign(r);
            if s != 0.0 {
                for k in self.indptr[i]..self.indptr[i + 1] {
                    out[self.indices[k]] += self.values[k] * s;
                }
            }
        }
        l1
    }

    /// AᵀA as a dense matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.ncols, self.ncols);
        for i in 0..self.nrows {
            let r = self.indptr[i]..self.indptr[i + 1];
            for a in r.clone() {
                for b in r.clone() {
                    g[(self.indices[a], self.indices[b])] += self.values[a] * self.values[b];
                }
            }
        }
        g
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn cholesky(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    Cholesky::new(m).ok_or_else(|| Error::Numerical(format!("{n}x{n} matrix is not positive definite")))
}

/// log det of the factored matrix.
pub fn chol_logdet(c: &Cholesky<f64, Dyn>) -> f64 {
    let l = c.l_dirty();
    (0..l.nrows()).map(|i| ln(l[(i, i)])).sum::<f64>() * 2.0
}

/// Inverse of a lower-triangular factor (also lower triangular).
pub fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::identity(n, n);
    let solved = l.solve_lower_triangular_mut(&mut inv);
    debug_assert!(solved);
    // Clear anything above the diagonal left over from the dirty factor.
    for j in 0..n {
        for i in 0..j {
            inv[(i, j)] = 0.0;
        }
    }
    inv
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending and
/// eigenvectors as matching columns.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Closest symmetric matrix (in Frobenius norm) whose eigenvalues are all
/// at least `floor`.
pub fn floor_spectrum(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let s = symmetrize(m);
    let n = s.nrows();
    let shifted = &s - DMatrix::identity(n, n) * floor;
    if Cholesky::new(shifted).is_some() {
        return s;
    }
    let eig = SymmetricEigen::new(s);
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    out = symmetrize(&out);
    out
}

/// `out = Lᵀ x` for lower-triangular `l` stored densely (row-major access
/// through nalgebra's column-major storage).
pub fn lower_t_mul(l: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let n = l.nrows();
    for j in 0..n {
        let col = l.column(j);
        let mut s = 0.0;
        for i in j..n {
            s += col[i] * x[i];
        }
        out[j] = s;
    }
}

/// `out = L x` for lower-triangular `l`.
pub fn lower_mul(l: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let n = l.nrows();
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in 0..n {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let col = l.column(j);
        for i in j..n {
            out[i] += col[i] * xj;
        }
    }
}
