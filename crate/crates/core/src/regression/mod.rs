//! Stochastic regressors mapping indicator vectors to Normal predictive
//! distributions: the Gaussian-process kernel method and the relevance
//! vector machine.

mod basis;
mod gp;
mod kernel;
mod optimize;
mod rvm;
mod scaling;

pub use basis::{legendre, RvmBasis};
pub use gp::{GpConfig, GpModel};
pub use kernel::Kernel;
pub use optimize::{nelder_mead, NelderMeadOutcome};
pub use rvm::{RvmBasisSpec, RvmConfig, RvmModel};
pub use scaling::{FeatureScaling, ScalingMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Predictive distribution `N(mean, mean_variance + noise_variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NormalPrediction<T> {
    pub mean: T,
    /// Uncertainty of the mean from limited training data.
    pub mean_variance: T,
    /// Inferred noise, the part not explained by the indicators.
    pub noise_variance: T,
}

impl<T: Real> NormalPrediction<T> {
    pub fn total_variance(&self) -> T {
        self.mean_variance + self.noise_variance
    }

    pub fn std_dev(&self) -> T {
        self.total_variance().sqrt()
    }
}

/// Scaled indicator vectors with their targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrainingSet<T> {
    /// Scaled inputs, one row per sample.
    pub x: Vec<Vec<T>>,
    pub y: Vec<T>,
    pub scaling: FeatureScaling<T>,
}

impl<T: Real> TrainingSet<T> {
    /// Fits `mode` on `raw_x` and stores the scaled inputs.
    pub fn new(raw_x: &[Vec<T>], y: Vec<T>, mode: ScalingMode) -> Result<Self> {
        if raw_x.len() != y.len() {
            return Err(Error::Dimension { expected: raw_x.len(), got: y.len() });
        }
        if y.len() < 2 {
            return Err(Error::InsufficientData(format!("{} training samples", y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) || raw_x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite training data".into()));
        }
        let scaling = FeatureScaling::fit(raw_x, mode)?;
        let x = raw_x.iter().map(|r| scaling.apply(r)).collect::<Result<_>>()?;
        Ok(Self { x, y, scaling })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.scaling.dim()
    }
}
