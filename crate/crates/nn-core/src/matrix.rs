//! Dense row-major `f64` matrix with the kernels the engine needs.
//!
//! The multiply kernels come in three flavours so the backward pass never has
//! to materialize a transpose: `matmul` (A·B), `matmul_transpose_lhs` (Aᵀ·B)
//! and `matmul_transpose_rhs` (A·Bᵀ). All three walk contiguous rows in the
//! inner loop. Products skip zero left-hand entries, which is exact in IEEE
//! arithmetic for finite operands and pays off on post-ReLU activations.

use std::fmt;

use crate::NnError;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Matrix of the given shape filled with zeros.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from a flat row-major buffer.
    ///
    /// Fails if the buffer length does not equal `rows * cols` or any entry
    /// is NaN or infinite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::BadShape {
                rows,
                cols,
                got: data.len(),
            });
        }
        let m = Matrix { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    /// Builds a matrix from row slices, which must all have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NnError> {
        if rows.is_empty() {
            return Err(NnError::EmptyInput("from_rows got no rows"));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(NnError::DimensionMismatch {
                    op: "from_rows",
                    left: format!("row 0 has {cols} columns"),
                    right: format!("row {i} has {} columns", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, NnError> {
        if self.cols != other.rows {
            return Err(self.dim_err("matmul", other));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`; `self` and `other` must have the same row count.
    pub fn matmul_transpose_lhs(&self, other: &Matrix) -> Result<Matrix, NnError> {
        if self.rows != other.rows {
            return Err(self.dim_err("matmul_transpose_lhs", other));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let b_row = other.row(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = out.row_mut(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`; `self` and `other` must have the same column count.
    pub fn matmul_transpose_rhs(&self, other: &Matrix) -> Result<Matrix, NnError> {
        if self.cols != other.cols {
            return Err(self.dim_err("matmul_transpose_rhs", other));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out_row[j] = acc;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Applies `f` to every entry, returning a new matrix.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Gathers the given rows into a new matrix, in the order given.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix, NnError> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for (pos, &idx) in indices.iter().enumerate() {
            if idx >= self.rows {
                return Err(NnError::RowOutOfBounds {
                    row: pos,
                    index: idx,
                    len: self.rows,
                });
            }
            data.extend_from_slice(self.row(idx));
        }
        Ok(Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// Adds a 1×cols row vector to every row in place.
    pub fn add_row_vector(&mut self, row_vector: &Matrix) -> Result<(), NnError> {
        if row_vector.rows != 1 || row_vector.cols != self.cols {
            return Err(self.dim_err("add_row_vector", row_vector));
        }
        for r in 0..self.rows {
            for (o, &b) in self.row_mut(r).iter_mut().zip(&row_vector.data) {
                *o += b;
            }
        }
        Ok(())
    }

    /// Entry-wise product in place.
    pub fn hadamard_assign(&mut self, other: &Matrix) -> Result<(), NnError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.dim_err("hadamard_assign", other));
        }
        for (o, &b) in self.data.iter_mut().zip(&other.data) {
            *o *= b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Column sums as a 1×cols matrix.
    pub fn column_sums(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, &v) in out.data.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    /// Index of the largest entry in each row; ties resolve to the lower index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Errors on the first NaN or infinite entry.
    pub fn check_finite(&self) -> Result<(), NnError> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(NnError::NonFinite {
                    row: i / self.cols.max(1),
                    col: i % self.cols.max(1),
                });
            }
        }
        Ok(())
    }

    fn dim_err(&self, op: &'static str, other: &Matrix) -> NnError {
        NnError::DimensionMismatch {
            op,
            left: format!("{}x{}", self.rows, self.cols),
            right: format!("{}x{}", other.rows, other.cols),
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_hand_case() {
        let a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = m(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = m(2, 3, &[0.0; 6]);
        let b = m(2, 2, &[0.0; 4]);
        assert!(matches!(
            a.matmul(&b),
            Err(NnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn transpose_variants_agree_with_explicit_transpose() {
        let a = m(2, 3, &[1.0, -2.0, 3.0, 0.5, 4.0, -1.0]);
        let b = m(2, 4, &[2.0, 0.0, 1.0, -3.0, 5.0, 1.0, 0.0, 2.0]);
        let via_kernel = a.matmul_transpose_lhs(&b).unwrap();
        let via_transpose = a.transpose().matmul(&b).unwrap();
        assert_eq!(via_kernel.data(), via_transpose.data());

        let c = m(3, 4, &[1.0, 2.0, 0.0, -1.0, 3.0, 1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let d = m(2, 4, &[1.0, 0.0, 2.0, 1.0, -1.0, 1.0, 0.0, 3.0]);
        let via_kernel = c.matmul_transpose_rhs(&d).unwrap();
        let via_transpose = c.matmul(&d.transpose()).unwrap();
        assert_eq!(via_kernel.data(), via_transpose.data());
    }

    #[test]
    fn from_vec_rejects_bad_length_and_non_finite() {
        assert!(matches!(
            Matrix::from_vec(2, 2, vec![1.0; 3]),
            Err(NnError::BadShape { .. })
        ));
        assert!(matches!(
            Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(NnError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn from_rows_rejects_ragged_input() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            Matrix::from_rows(&rows),
            Err(NnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn select_rows_gathers_in_order() {
        let a = m(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let g = a.select_rows(&[2, 0, 2]).unwrap();
        assert_eq!(g.data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        assert!(a.select_rows(&[3]).is_err());
    }

    #[test]
    fn argmax_ties_resolve_to_lower_index() {
        let a = m(2, 3, &[1.0, 3.0, 3.0, 2.0, 2.0, 1.0]);
        assert_eq!(a.argmax_rows(), vec![1, 0]);
    }

    #[test]
    fn column_sums_and_row_vector_add() {
        let mut a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.column_sums().data(), &[5.0, 7.0, 9.0]);
        let bias = m(1, 3, &[10.0, 20.0, 30.0]);
        a.add_row_vector(&bias).unwrap();
        assert_eq!(a.row(1), &[14.0, 25.0, 36.0]);
    }
}
