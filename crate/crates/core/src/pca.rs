//! Full-rank PCA: centering plus an orthogonal rotation that keeps every
//! component, so the transform is lossless and shape-preserving.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{full_svd, numerical_rank, DataMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// `m × m` orthogonal matrix, row-major; column `k` is the k-th principal axis.
    rotation: Vec<f64>,
    /// `m` values, descending; entries past the numerical rank are exactly 0.
    singular_values: Vec<f64>,
    column_means: Vec<f64>,
}

impl PcaModel {
    pub fn fit(x: &DataMatrix) -> Result<Self> {
        let (n, m) = (x.rows(), x.cols());
        if n < 2 {
            return invalid(format!("PCA needs at least 2 rows, got {n}"));
        }
        let column_means = x.column_means();
        let centered = DMatrix::from_fn(n, m, |i, j| x.get(i, j) - column_means[j]);
        let (_, s, v) = full_svd(centered);
        let r = numerical_rank(&s);

        let mut singular_values = vec![0.0; m];
        singular_values[..r].copy_from_slice(&s[..r]);
        let basis = complete_basis(v);

        let mut rotation = Vec::with_capacity(m * m);
        for i in 0..m {
            rotation.extend(basis.row(i).iter().copied());
        }
        Ok(Self { rotation, singular_values, column_means })
    }

    pub fn dims(&self) -> usize {
        self.column_means.len()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn rotation(&self) -> DataMatrix {
        let m = self.dims();
        DataMatrix::new(m, m, self.rotation.clone()).expect("rotation is finite and square")
    }

    /// `(x − means) · rotation`.
    pub fn transform(&self, x: &DataMatrix) -> Result<DataMatrix> {
        let m = self.dims();
        if x.cols() != m {
            return invalid(format!("PCA fitted on {m} columns, got {}", x.cols()));
        }
        let mut out = vec![0.0; x.rows() * m];
        let mut centered = vec![0.0; m];
        for i in 0..x.rows() {
            for ((c, &v), &mu) in centered.iter_mut().zip(x.row(i)).zip(&self.column_means) {
                *c = v - mu;
            }
            let dst = &mut out[i * m..(i + 1) * m];
            for (j, &c) in centered.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for (d, &r) in dst.iter_mut().zip(&self.rotation[j * m..(j + 1) * m]) {
                    *d += c * r;
                }
            }
        }
        DataMatrix::new(x.rows(), m, out)
    }

    /// `z · rotationᵀ + means`; undoes [`transform`](Self::transform).
    pub fn inverse_transform(&self, z: &DataMatrix) -> Result<DataMatrix> {
        let m = self.dims();
        if z.cols() != m {
            return invalid(format!("PCA fitted on {m} columns, got {}", z.cols()));
        }
        let back = z.matmul(&self.rotation().transpose())?;
        let values =
            back.values().chunks(m).flat_map(|row| row.iter().zip(&self.column_means).map(|(v, mu)| v + mu)).collect();
        DataMatrix::new(z.rows(), m, values)
    }
}

/// Extends orthonormal columns `v` (`m × k`, `k ≤ m`) to an `m × m` orthogonal
/// matrix by Gram-Schmidt over the standard basis.
fn complete_basis(v: DMatrix<f64>) -> DMatrix<f64> {
    let m = v.nrows();
    if v.ncols() >= m {
        return v.columns(0, m).into_owned();
    }
    let mut cols: Vec<DVector<f64>> = v.column_iter().map(|c| c.into_owned()).collect();
    for i in 0..m {
        if cols.len() == m {
            break;
        }
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&e);
                e.axpy(-proj, c, 1.0);
            }
        }
        let norm = e.norm();
        if norm > 1e-8 {
            cols.push(e / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_orthogonal(r: &DataMatrix) {
        let rtr = r.transpose().matmul(r).unwrap();
        for i in 0..r.cols() {
            for j in 0..r.cols() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((rtr.get(i, j) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn needs_two_rows() {
        let x = DataMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(PcaModel::fit(&x).is_err());
    }

    #[test]
    fn orthogonal_centered_columns_give_signed_permutation() {
        // column 1 has the larger norm, so it becomes the first component
        let x = DataMatrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 3.0], [0.0, -3.0]]).unwrap();
        let pca = PcaModel::fit(&x).unwrap();
        let r = pca.rotation();
        assert!((r.get(1, 0).abs() - 1.0).abs() < 1e-12);
        assert!((r.get(0, 1).abs() - 1.0).abs() < 1e-12);
        assert!(r.get(0, 0).abs() < 1e-12 && r.get(1, 1).abs() < 1e-12);
        let s = pca.singular_values();
        assert!((s[0] - 18f64.sqrt()).abs() < 1e-12 && (s[1] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_column_has_zero_singular_value() {
        let x = DataMatrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [4.0, 5.0]]).unwrap();
        let pca = PcaModel::fit(&x).unwrap();
        assert_eq!(pca.singular_values()[1], 0.0);
        assert_orthogonal(&pca.rotation());
    }

    #[test]
    fn wide_data_is_completed_to_full_rank() {
        let x = DataMatrix::from_rows(&[[1.0, 2.0, 0.5, -1.0], [0.0, 1.0, 3.0, 2.0], [2.0, 2.0, 1.0, 0.0]]).unwrap();
        let pca = PcaModel::fit(&x).unwrap();
        assert_eq!(pca.singular_values().len(), 4);
        assert_eq!(pca.singular_values()[2], 0.0);
        assert_eq!(pca.singular_values()[3], 0.0);
        assert_orthogonal(&pca.rotation());
        let back = pca.inverse_transform(&pca.transform(&x).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(x.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn transform_rejects_wrong_width() {
        let x = DataMatrix::from_rows(&[[1.0, 2.0], [3.0, 5.0]]).unwrap();
        let pca = PcaModel::fit(&x).unwrap();
        assert!(pca.transform(&DataMatrix::identity(3)).is_err());
    }
}
