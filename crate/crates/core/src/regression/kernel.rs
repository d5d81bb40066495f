use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::basis::RvmBasis;

/// Covariance kernel of the Gaussian-process regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub enum Kernel<T> {
    /// `exp(-|a - b|^2 / (2 l^2))`
    SquaredExponential,
    /// `sum_k phi_k(a) phi_k(b) / beta_k` over the active basis functions,
    /// the covariance induced by a relevance vector machine.
    Feature {
        basis: RvmBasis<T>,
        active: Vec<usize>,
        precisions: Vec<T>,
    },
}

impl<T: Real> Kernel<T> {
    pub fn has_length_scale(&self) -> bool {
        matches!(self, Self::SquaredExponential)
    }

    pub fn eval(&self, a: &[T], b: &[T], length_sq: T) -> T {
        match self {
            Self::SquaredExponential => (-sq_dist(a, b) / (T::lit(2.0) * length_sq)).exp(),
            Self::Feature { basis, active, precisions } => {
                let (pa, pb) = (basis.eval(a), basis.eval(b));
                active.iter().zip(precisions).map(|(&k, &beta)| pa[k] * pb[k] / beta).sum()
            }
        }
    }

    /// Derivative with respect to `log l^2`.
    pub fn d_log_length_sq(&self, a: &[T], b: &[T], length_sq: T) -> T {
        match self {
            Self::SquaredExponential => {
                let r = sq_dist(a, b) / (T::lit(2.0) * length_sq);
                (-r).exp() * r
            }
            Self::Feature { .. } => T::zero(),
        }
    }
}

pub(crate) fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum()
}
