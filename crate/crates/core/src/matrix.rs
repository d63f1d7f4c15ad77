//! Dense row-major matrices, SVD and least-squares solving.
//!
//! `DataMatrix` is the sample-by-feature carrier used throughout the crate.
//! Factorizations are delegated to `nalgebra`; this module owns the
//! conventions layered on top (descending singular values, rank cutoff,
//! sign normalization and minimum-norm solutions).

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{invalid, Result};

/// Singular values at or below `RANK_TOL * s_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Dense `rows × cols` matrix of finite values, stored row-major
/// (`values[i * cols + j]` is sample `i`, feature `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid(format!("matrix must be non-empty, got {rows}x{cols}"));
        }
        if values.len() != rows * cols {
            return invalid(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite value at row {}, column {}", pos / cols, pos % cols));
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != m {
                return invalid(format!("row {i} has {} columns, expected {m}", row.len()));
            }
            values.extend_from_slice(row);
        }
        Self::new(n, m, values)
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, values }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// New matrix made of the given rows, in order; duplicates allowed.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return invalid(format!("row index {i} out of range for {} rows", self.rows));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, values)
    }

    /// New matrix made of the given columns, in order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&j) = indices.iter().find(|&&j| j >= self.cols) {
            return invalid(format!("column index {j} out of range for {} columns", self.cols));
        }
        let mut values = Vec::with_capacity(indices.len() * self.rows);
        for i in 0..self.rows {
            let row = self.row(i);
            values.extend(indices.iter().map(|&j| row[j]));
        }
        Self::new(self.rows, indices.len(), values)
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            values.extend((0..self.rows).map(|i| self.get(i, j)));
        }
        Self { rows: self.cols, cols: self.rows, values }
    }

    pub fn matmul(&self, other: &DataMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return invalid(format!("cannot multiply {}x{} by {}x{}", self.rows, self.cols, other.rows, other.cols));
        }
        let mut values = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut values[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Self { rows: self.rows, cols: other.cols, values })
    }

    /// Matrix-vector product `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return invalid(format!("vector length {} does not match {} columns", v.len(), self.cols));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, &v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            values.extend(m.row(i).iter().copied());
        }
        Self::new(m.nrows(), m.ncols(), values)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks that `y` is a finite target vector paired with `x`.
pub fn check_targets(x: &DataMatrix, y: &[f64]) -> Result<()> {
    if y.len() != x.rows() {
        return invalid(format!("target length {} does not match {} rows", y.len(), x.rows()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return invalid(format!("non-finite target at row {i}"));
    }
    Ok(())
}

/// Thin rank-truncated SVD `X = U · diag(s) · Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `n × r`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// `r` singular values, descending, all above the rank cutoff.
    pub s: Vec<f64>,
    /// `m × r`, orthonormal columns.
    pub v: DMatrix<f64>,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.s));
        &self.u * d * self.v.transpose()
    }
}

/// Full (untruncated) decomposition with descending singular values and
/// each right singular vector oriented so its largest-magnitude entry is positive.
pub(crate) fn full_svd(a: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = SVD::try_new(a, true, true, f64::EPSILON, 0)
        .expect("SVD with unbounded iterations always converges on finite input");
    let mut u = svd.u.expect("u requested");
    let mut v = svd.v_t.expect("v requested").transpose();
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    for k in 0..s.len() {
        let col = v.column(k);
        let pivot = col.iter().copied().fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.column_mut(k).neg_mut();
            u.column_mut(k).neg_mut();
        }
    }
    (u, s, v)
}

/// Number of singular values (sorted descending) above the relative cutoff.
pub(crate) fn numerical_rank(s: &[f64]) -> usize {
    let s_max = s.first().copied().unwrap_or(0.0);
    if s_max <= 0.0 {
        return 0;
    }
    s.iter().take_while(|&&v| v > RANK_TOL * s_max).count()
}

pub fn svd(x: &DataMatrix) -> Result<SvdResult> {
    let (u, s, v) = full_svd(x.to_dmatrix());
    let r = numerical_rank(&s);
    Ok(SvdResult { u: u.columns(0, r).into_owned(), s: s[..r].to_vec(), v: v.columns(0, r).into_owned() })
}

/// Minimum-norm solution of `a · w ≈ b` through the rank-truncated pseudoinverse.
fn pinv_solve(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (u, s, v) = full_svd(a);
    let r = numerical_rank(&s);
    let mut w = DVector::zeros(v.nrows());
    for k in 0..r {
        let coef = u.column(k).dot(b) / s[k];
        w.axpy(coef, &v.column(k), 1.0);
    }
    w
}

/// Minimum-norm least-squares weights for `x · w ≈ y`.
///
/// Tall problems are first reduced with a QR factorization so the SVD only
/// runs on the `m × m` triangular factor; rank deficiency is handled by the
/// pseudoinverse rather than reported as an error.
pub fn ols_solve(x: &DataMatrix, y: &[f64]) -> Result<Vec<f64>> {
    check_targets(x, y)?;
    let (n, m) = (x.rows(), x.cols());
    let a = x.to_dmatrix();
    let mut b = DVector::from_column_slice(y);
    let w = if n >= m {
        let qr = a.qr();
        qr.q_tr_mul(&mut b);
        let qty = b.rows(0, m).into_owned();
        pinv_solve(qr.unpack_r(), &qty)
    } else {
        pinv_solve(a, &b)
    };
    Ok(w.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(DataMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DataMatrix::new(0, 2, vec![]).is_err());
        assert!(DataMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn identity_svd() {
        let r = svd(&DataMatrix::identity(2)).unwrap();
        assert_eq!(r.s, vec![1.0, 1.0]);
        let uv = &r.u * r.v.transpose();
        assert!((uv - DMatrix::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn diagonal_svd_truncates_rank() {
        let x = DataMatrix::from_rows(&[[3.0, 0.0], [0.0, 0.0]]).unwrap();
        let r = svd(&x).unwrap();
        assert_eq!(r.rank(), 1);
        assert!((r.s[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let x = DataMatrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert_eq!(svd(&x).unwrap().rank(), 0);
        assert_eq!(ols_solve(&x, &[1.0, 2.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn ols_identity_and_exact_fit() {
        let w = ols_solve(&DataMatrix::identity(2), &[3.0, 5.0]).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-14 && (w[1] - 5.0).abs() < 1e-14);
        let x = DataMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let w = ols_solve(&x, &[2.0, 4.0, 6.0]).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn ols_rank_deficient_is_minimum_norm() {
        // Duplicate columns: any split of the weight fits, min-norm splits evenly.
        let x = DataMatrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let w = ols_solve(&x, &[2.0, 4.0, 6.0]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_wide_system() {
        let x = DataMatrix::from_rows(&[[1.0, 0.0, 1.0]]).unwrap();
        let w = ols_solve(&x, &[2.0]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12 && (w[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_dimension_mismatch() {
        assert!(ols_solve(&DataMatrix::identity(2), &[1.0]).is_err());
    }

    #[test]
    fn select_and_transpose() {
        let x = DataMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(x.select_columns(&[2, 0]).unwrap().row(1), &[6.0, 4.0]);
        assert_eq!(x.select_rows(&[1, 1]).unwrap().row(0), &[4.0, 5.0, 6.0]);
        assert_eq!(x.transpose().row(2), &[3.0, 6.0]);
        assert!(x.select_columns(&[3]).is_err());
    }
}
