use serde::{Deserialize, Serialize};

use crate::linalg::CsrMatrix;
use crate::scalar::{axpy, dot, Real};
use crate::thermal::InputPoint;

/// Trial basis `V` stored column by column, orthonormal in the `K` inner product.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ReducedBasis<T> {
    pub vectors: Vec<Vec<T>>,
    pub snapshot_inputs: Vec<InputPoint<T>>,
    /// Seed of the random first greedy pick, when greedy-built.
    pub seed: Option<u64>,
}

impl<T: Real> ReducedBasis<T> {
    pub fn empty() -> Self {
        Self { vectors: Vec::new(), snapshot_inputs: Vec::new(), seed: None }
    }

    /// `K`-orthonormalizes the given snapshots, dropping dependent ones.
    pub fn from_snapshots(k: &CsrMatrix<T>, snapshots: Vec<Vec<T>>, inputs: Vec<InputPoint<T>>) -> Self {
        let mut basis = Self::empty();
        for (i, s) in snapshots.into_iter().enumerate() {
            if let Some(v) = k_orthonormalize(k, &basis.vectors, s) {
                basis.vectors.push(v);
                if let Some(mu) = inputs.get(i) {
                    basis.snapshot_inputs.push(mu.clone());
                }
            }
        }
        basis
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn n(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// `V c`
    pub fn reconstruct(&self, coeffs: &[T]) -> Vec<T> {
        let mut u = vec![T::zero(); self.n()];
        for (v, &c) in self.vectors.iter().zip(coeffs) {
            axpy(c, v, &mut u);
        }
        u
    }

    /// `V^T x`
    pub fn project(&self, x: &[T]) -> Vec<T> {
        self.vectors.iter().map(|v| dot(v, x)).collect()
    }

    /// `max |V^T K V - I|`
    pub fn orthonormality_defect(&self, k: &CsrMatrix<T>) -> T {
        let kv: Vec<Vec<T>> = self.vectors.iter().map(|v| k.matvec(v)).collect();
        let mut worst = T::zero();
        for (i, vi) in self.vectors.iter().enumerate() {
            for (j, kvj) in kv.iter().enumerate() {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((dot(vi, kvj) - target).abs());
            }
        }
        worst
    }
}

/// Modified Gram-Schmidt in the `K` inner product, applied twice.
///
/// Returns `None` when the remaining component is below `1e-10` of the
/// input's `K`-norm, i.e. the vector is numerically in the span.
pub fn k_orthonormalize<T: Real>(k: &CsrMatrix<T>, basis: &[Vec<T>], mut v: Vec<T>) -> Option<Vec<T>> {
    let norm0 = k.quad_form(&v).max(T::zero()).sqrt();
    if !(norm0 > T::zero()) {
        return None;
    }
    for _ in 0..2 {
        for psi in basis {
            let kv = k.matvec(&v);
            let c = dot(psi, &kv);
            axpy(-c, psi, &mut v);
        }
    }
    let norm = k.quad_form(&v).max(T::zero()).sqrt();
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(100.0));
    if norm < tol * norm0 {
        return None;
    }
    let inv = T::one() / norm;
    v.iter_mut().for_each(|x| *x *= inv);
    Some(v)
}
