use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DMatrix<T> {
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

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `x^T M y`
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        debug_assert_eq!(x.len(), self.rows);
        x.iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &xi)| acc + xi * dot(self.row(i), y))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        out
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    /// Grows a square matrix to `(n+1) x (n+1)` keeping the leading block.
    pub fn grow_square(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut next = Self::zeros(n + 1, n + 1);
        for i in 0..n {
            next.row_mut(i)[..n].copy_from_slice(self.row(i));
        }
        *self = next;
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        Cholesky::factor(self)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Cholesky<T> {
    l: DMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &DMatrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Dimension { expected: a.rows, got: a.cols });
        }
        let n = a.rows;
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s.as_f64() });
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    pub fn factor_l(&self) -> &DMatrix<T> {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let s = y[i] - dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `L^T x = y`.
    pub fn backward(&self, y: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.l[(i, i)];
            let xi = x[i];
            for k in 0..i {
                x[k] -= self.l[(i, k)] * xi;
            }
        }
        x
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }

    /// `log det A`
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim()).map(|i| two * self.l[(i, i)].ln()).sum()
    }

    pub fn inverse(&self) -> DMatrix<T> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_small_spd() {
        let a = DMatrix::<f64>::from_row_major(3, 3, vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]).unwrap();
        let c = a.cholesky().unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        let ax = a.matvec(&x);
        for (u, v) in ax.iter().zip(b) {
            assert!((u - v).abs() < 1e-14);
        }
        let inv = c.inverse();
        let id = a.matmul(&inv);
        assert!(id.max_abs_diff(&DMatrix::identity(3)) < 1e-14);
        let det: f64 = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.4) + 0.4 * (2.0 - 5.0 * 0.4);
        assert!((c.log_det() - det.ln()).abs() < 1e-13);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(a.cholesky(), Err(Error::NotPositiveDefinite { row: 1, .. })));
    }

    #[test]
    fn grow_keeps_leading_block() {
        let mut a = DMatrix::from_fn(2, 2, |i, j| (i * 2 + j) as f32);
        a.grow_square();
        assert_eq!(a.rows(), 3);
        assert_eq!(a[(1, 1)], 3.0);
        assert_eq!(a[(2, 2)], 0.0);
    }
}
