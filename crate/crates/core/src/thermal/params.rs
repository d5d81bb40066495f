use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of conductivity blocks (and parameters).
pub const N_BLOCKS: usize = 9;

/// Axis-aligned parameter domain `[lower, upper]^9`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ParameterBox {
    fn default() -> Self {
        Self { lower: 0.1, upper: 10.0 }
    }
}

impl ParameterBox {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && upper >= lower && upper.is_finite()) {
            return Err(Error::InvalidInput(format!("parameter box [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains<T: Real>(&self, mu: &InputPoint<T>) -> bool {
        mu.values().iter().all(|&m| {
            let m = m.as_f64();
            m >= self.lower * (1.0 - 1e-12) && m <= self.upper * (1.0 + 1e-12)
        })
    }

    /// Uniform sample on the box (linear scale).
    pub fn sample_uniform<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> InputPoint<T> {
        let v = (0..N_BLOCKS).map(|_| T::lit(rng.gen_range(self.lower..=self.upper))).collect();
        InputPoint(v)
    }

    /// Log-uniform sample on the box.
    pub fn sample_log_uniform<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> InputPoint<T> {
        let (a, b) = (self.lower.ln(), self.upper.ln());
        let v = (0..N_BLOCKS).map(|_| T::lit(rng.gen_range(a..=b).exp())).collect();
        InputPoint(v)
    }
}

/// Block conductivities `mu`, one strictly positive value per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InputPoint<T>(Vec<T>);

impl<T: Real> InputPoint<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() != N_BLOCKS {
            return Err(Error::Dimension { expected: N_BLOCKS, got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(**v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("conductivity {v} must be positive and finite")));
        }
        Ok(Self(values))
    }

    pub fn uniform(value: T) -> Self {
        Self(vec![value; N_BLOCKS])
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self(self.0.iter().map(|&v| v * factor).collect())
    }

    pub fn min(&self) -> T {
        self.0.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::neg_infinity(), T::max)
    }
}
