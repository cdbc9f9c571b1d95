//! Minimal dense linear algebra for the determinant blocks: a row-major
//! matrix and an LU factorization with partial pivoting, used by the
//! from-scratch recompute path. Rank-one updates live with the wavefunction.

use crate::error::{QmcError, Result};
use crate::Real;

/// Row-major square-or-rectangular dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(QmcError::SizeMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn convert<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        }
    }

    /// max_ij |(self * other)_ij - I_ij|; both must be square of equal size.
    pub fn identity_residual(&self, other: &Matrix<T>) -> f64 {
        assert_eq!(self.rows, self.cols);
        assert_eq!(other.rows, self.rows);
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0f64;
                for k in 0..n {
                    acc += self[(i, k)].to_f64() * other[(k, j)].to_f64();
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// LU factorization (Doolittle, partial pivoting) of a square matrix.
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
    swap_parity: bool,
}

impl Lu {
    pub fn factor(a: &Matrix<f64>) -> Result<Self> {
        assert_eq!(a.rows(), a.cols(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.data().to_vec();
        let mut pivots = vec![0usize; n];
        let mut swap_parity = false;

        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = lu[col * n + col].abs();
            for r in col + 1..n {
                let mag = lu[r * n + col].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag == 0.0 || !pivot_mag.is_finite() {
                return Err(QmcError::SingularMatrix);
            }
            pivots[col] = pivot_row;
            if pivot_row != col {
                swap_parity = !swap_parity;
                for c in 0..n {
                    lu.swap(col * n + c, pivot_row * n + c);
                }
            }
            let inv_pivot = 1.0 / lu[col * n + col];
            for r in col + 1..n {
                let factor = lu[r * n + col] * inv_pivot;
                lu[r * n + col] = factor;
                for c in col + 1..n {
                    lu[r * n + c] -= factor * lu[col * n + c];
                }
            }
        }
        Ok(Self { n, lu, pivots, swap_parity })
    }

    /// (log|det|, sign) from the pivoted U diagonal.
    pub fn log_abs_det(&self) -> (f64, f64) {
        let mut log_abs = 0.0;
        let mut sign = if self.swap_parity { -1.0 } else { 1.0 };
        for i in 0..self.n {
            let d = self.lu[i * self.n + i];
            log_abs += d.abs().ln();
            if d < 0.0 {
                sign = -sign;
            }
        }
        (log_abs, sign)
    }

    /// Solve in place for one right-hand side.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for col in 0..n {
            b.swap(col, self.pivots[col]);
        }
        for r in 1..n {
            let mut acc = b[r];
            for c in 0..r {
                acc -= self.lu[r * n + c] * b[c];
            }
            b[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = b[r];
            for c in r + 1..n {
                acc -= self.lu[r * n + c] * b[c];
            }
            b[r] = acc / self.lu[r * n + r];
        }
    }

    pub fn inverse(&self) -> Matrix<f64> {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut col = vec![0.0f64; n];
        for j in 0..n {
            col.iter_mut().for_each(|x| *x = 0.0);
            col[j] = 1.0;
            self.solve(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Inverse, log|det| and sign in one call.
pub fn invert(a: &Matrix<f64>) -> Result<(Matrix<f64>, f64, f64)> {
    let lu = Lu::factor(a)?;
    let (log_abs, sign) = lu.log_abs_det();
    Ok((lu.inverse(), log_abs, sign))
}
