use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= n_rows || j >= n_cols {
                return Err(Error::Dimension { expected: n_rows.max(n_cols), got: i.max(j) });
            }
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry present") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    /// Same sparsity pattern, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Dimension { expected: self.values.len(), got: values.len() });
        }
        Ok(Self { values, ..self.clone() })
    }

    /// Whether `other` has exactly the same structure.
    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// Linear combination `sum_k coeffs[k] * mats[k]` of matrices sharing one pattern.
    pub fn linear_combination(mats: &[Self], coeffs: &[T]) -> Result<Self> {
        let first = mats.first().ok_or(Error::Dimension { expected: 1, got: 0 })?;
        if mats.len() != coeffs.len() {
            return Err(Error::Dimension { expected: mats.len(), got: coeffs.len() });
        }
        let mut values = vec![T::zero(); first.values.len()];
        for (m, &c) in mats.iter().zip(coeffs) {
            if !m.same_pattern(first) {
                return Err(Error::Incompatible("matrices do not share a sparsity pattern".into()));
            }
            for (v, &x) in values.iter_mut().zip(&m.values) {
                *v += c * x;
            }
        }
        first.with_values(values)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).fold(T::zero(), |acc, (&j, &v)| acc + v * x[j])
            })
            .collect()
    }

    /// `x^T M x`
    pub fn quad_form(&self, x: &[T]) -> T {
        dot(x, &self.matvec(x))
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// Iterator over stored `(row, col, value)` entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.n_rows == self.n_cols && self.triplets().all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol)
    }

    /// Submatrix on the given (sorted, unique) row/column index set.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let mut map = vec![usize::MAX; self.n_rows.max(self.n_cols)];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let trip: Vec<_> = self
            .triplets()
            .filter(|&(i, j, _)| map[i] != usize::MAX && map[j] != usize::MAX)
            .map(|(i, j, v)| (map[i], map[j], v))
            .collect();
        Self::from_triplets(keep.len(), keep.len(), &trip)
    }
}
