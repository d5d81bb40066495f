use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

use super::CsrMatrix;

/// Envelope Cholesky factorization of a sparse SPD matrix.
///
/// Row `i` of the lower factor is stored densely from its first structural
/// nonzero column up to the diagonal; fill-in is confined to that envelope,
/// so banded orderings (row-major structured grids) factor in `O(n b^2)`.
#[derive(Debug, Clone)]
pub struct SkylineCholesky<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SkylineCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.n_rows();
        if n != a.n_cols() {
            return Err(Error::Dimension { expected: n, got: a.n_cols() });
        }
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            let (cols, _) = a.row(i);
            let f = cols.first().copied().unwrap_or(i).min(i);
            first.push(f);
            start.push(start[i] + (i - f + 1));
        }
        let mut values = vec![T::zero(); start[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    values[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (ri, rj) = if j < i {
                    let (lo, hi) = values.split_at(start[i]);
                    (&hi[k0 - fi..j - fi], &lo[start[j] + k0 - fj..start[j] + j - fj])
                } else {
                    let row = &values[start[i]..start[i + 1]];
                    (&row[k0 - fi..j - fi], &row[k0 - fi..j - fi])
                };
                let s = values[start[i] + j - fi] - dot(ri, rj);
                if j < i {
                    let djj = values[start[j + 1] - 1];
                    values[start[i] + j - fi] = s / djj;
                } else {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s.as_f64() });
                    }
                    values[start[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self { first, start, values })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let s = x[i] - dot(&row[..i - fi], &x[fi..i]);
            x[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (k, &l) in (fi..i).zip(&row[..i - fi]) {
                x[k] -= l * xi;
            }
        }
        x
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim()).map(|i| two * self.values[self.start[i + 1] - 1].ln()).sum()
    }
}
