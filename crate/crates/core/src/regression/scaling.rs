use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// How features are mapped before regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingMode {
    /// `[min - 0.1 D, max + 0.1 D] -> [-1, 1]` with `D = max - min`.
    PaddedRange,
    /// Zero mean, unit (population) standard deviation.
    Standardize,
    Identity,
}

/// Per-feature affine map `x -> (x - offset) * factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FeatureScaling<T> {
    pub mode: ScalingMode,
    pub offset: Vec<T>,
    pub factor: Vec<T>,
}

impl<T: Real> FeatureScaling<T> {
    pub fn fit(x: &[Vec<T>], mode: ScalingMode) -> Result<Self> {
        let q = x.first().map_or(0, Vec::len);
        if q == 0 {
            return Err(Error::InsufficientData("no features".into()));
        }
        if let Some(r) = x.iter().find(|r| r.len() != q) {
            return Err(Error::Dimension { expected: q, got: r.len() });
        }
        let mut offset = Vec::with_capacity(q);
        let mut factor = Vec::with_capacity(q);
        for j in 0..q {
            let col = x.iter().map(|r| r[j]);
            let (lo, hi) = col.clone().fold((T::infinity(), T::neg_infinity()), |(a, b), v| (a.min(v), b.max(v)));
            if mode != ScalingMode::Identity && !(hi > lo) {
                return Err(Error::DegenerateFeature(j));
            }
            match mode {
                ScalingMode::PaddedRange => {
                    let pad = T::lit(0.1) * (hi - lo);
                    let (a, b) = (lo - pad, hi + pad);
                    offset.push((a + b) / T::lit(2.0));
                    factor.push(T::lit(2.0) / (b - a));
                }
                ScalingMode::Standardize => {
                    let n = T::from_usize_lossy(x.len());
                    let mean = col.clone().sum::<T>() / n;
                    let var = col.map(|v| (v - mean) * (v - mean)).sum::<T>() / n;
                    offset.push(mean);
                    factor.push(T::one() / var.sqrt());
                }
                ScalingMode::Identity => {
                    offset.push(T::zero());
                    factor.push(T::one());
                }
            }
        }
        Ok(Self { mode, offset, factor })
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(x.iter().zip(&self.offset).zip(&self.factor).map(|((&v, &o), &f)| (v - o) * f).collect())
    }

    pub fn invert(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: z.len() });
        }
        Ok(z.iter().zip(&self.offset).zip(&self.factor).map(|((&v, &o), &f)| v / f + o).collect())
    }
}
