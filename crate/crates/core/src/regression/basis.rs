use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Legendre polynomial `P_order(x)` by the three-term recurrence.
pub fn legendre<T: Real>(order: usize, x: T) -> T {
    let (mut p0, mut p1) = (T::one(), x);
    match order {
        0 => p0,
        _ => {
            for k in 1..order {
                let kf = T::from_usize_lossy(k);
                let p2 = ((T::lit(2.0) * kf + T::one()) * x * p1 - kf * p0) / (kf + T::one());
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Basis functions `phi_k` of the relevance vector machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub enum RvmBasis<T> {
    /// `P_0` plus `P_1..P_max_order` of every feature (additive, no cross terms).
    Legendre { max_order: usize, n_features: usize },
    /// `exp(-|c_k - x|^2 / r^2)` centered at the training inputs.
    Rbf { centers: Vec<Vec<T>>, width: T },
}

impl<T: Real> RvmBasis<T> {
    pub fn len(&self) -> usize {
        match self {
            Self::Legendre { max_order, n_features } => 1 + max_order * n_features,
            Self::Rbf { centers, .. } => centers.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(feature, order)` of Legendre function `k`; the intercept is `(0, 0)`.
    pub fn legendre_index(&self, k: usize) -> Option<(usize, usize)> {
        match self {
            Self::Legendre { .. } if k == 0 => Some((0, 0)),
            Self::Legendre { max_order, .. } => Some(((k - 1) / max_order, (k - 1) % max_order + 1)),
            Self::Rbf { .. } => None,
        }
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        match self {
            Self::Legendre { max_order, n_features } => {
                let mut out = Vec::with_capacity(self.len());
                out.push(T::one());
                for &xi in x.iter().take(*n_features) {
                    out.extend((1..=*max_order).map(|o| legendre(o, xi)));
                }
                out
            }
            Self::Rbf { centers, width } => centers
                .iter()
                .map(|c| {
                    let d2: T = c.iter().zip(x).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
                    (-d2 / (*width * *width)).exp()
                })
                .collect(),
        }
    }

    /// Legendre inputs outside `[-1, 1]` extrapolate the polynomial basis.
    pub fn is_extrapolation(&self, x: &[T]) -> bool {
        match self {
            Self::Legendre { .. } => x.iter().any(|v| v.abs() > T::one()),
            Self::Rbf { .. } => false,
        }
    }
}
