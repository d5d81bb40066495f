use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{GpConfig, GpModel, Kernel, NormalPrediction, RvmConfig, RvmModel, ScalingMode, TrainingSet};

use super::samples::{SampleTable, Split};
use super::spec::{ErrorKind, IndicatorSpec, Transformation, VarianceMode};
use super::ZERO_ERROR;

/// Regressor choice and its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegressorConfig {
    Gp { config: GpConfig, scaling: ScalingMode },
    Rvm { config: RvmConfig, scaling: ScalingMode },
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self::Gp { config: GpConfig::default(), scaling: ScalingMode::PaddedRange }
    }
}

/// The three ingredients of a surrogate plus how it reports variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub indicator: IndicatorSpec,
    pub transformation: Transformation,
    pub error: ErrorKind,
    pub variance: VarianceMode,
    pub regressor: RegressorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regressor {
    Gp(GpModel<f64>),
    Rvm(RvmModel<f64>),
}

impl Regressor {
    pub fn predict(&self, x: &[f64]) -> Result<NormalPrediction<f64>> {
        match self {
            Self::Gp(m) => m.predict(x),
            Self::Rvm(m) => m.predict(x),
        }
    }
}

/// Prediction in transformed space with its back-transformed point summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePrediction {
    pub normal: NormalPrediction<f64>,
    /// Variance selected by the surrogate's [`VarianceMode`].
    pub variance: f64,
    /// Mode of the error distribution: `exp(nu - var)` under log, `nu` otherwise.
    pub mode: f64,
}

impl SurrogatePrediction {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Statistical model of a reduced-model error given an indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSurrogate {
    pub schema_version: u32,
    pub spec: SurrogateSpec,
    pub regressor: Regressor,
    /// Table row indices used for training.
    pub training_rows: Vec<usize>,
    /// Training rows dropped because of a zero error or non-finite indicator.
    pub excluded_rows: Vec<usize>,
}

impl ErrorSurrogate {
    pub const SCHEMA_VERSION: u32 = 1;

    /// Trains on the first `n_train` rows of the training split (all of
    /// them when `None`).
    pub fn train(table: &SampleTable, spec: &SurrogateSpec, n_train: Option<usize>) -> Result<Self> {
        spec.error.check_transformation(spec.transformation)?;
        let mut candidates = table.indices(Split::Train);
        if let Some(n) = n_train {
            if n > candidates.len() {
                return Err(Error::InsufficientData(format!("{n} training rows requested, {} available", candidates.len())));
            }
            candidates.truncate(n);
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut used = Vec::new();
        let mut excluded = Vec::new();
        let mut negative = Vec::new();
        for &i in &candidates {
            let row = &table.rows[i];
            let err = spec.error.value(table, row)?;
            let Some(features) = spec.indicator.features(table, row)? else {
                excluded.push(i);
                continue;
            };
            if spec.transformation == Transformation::Log {
                if err < -ZERO_ERROR {
                    negative.push(i);
                    continue;
                }
                if err <= ZERO_ERROR {
                    excluded.push(i);
                    continue;
                }
            }
            if !err.is_finite() {
                excluded.push(i);
                continue;
            }
            x.push(features);
            y.push(spec.transformation.apply(err));
            used.push(i);
        }
        if !negative.is_empty() {
            return Err(Error::NonPositiveErrors(negative));
        }
        let regressor = match &spec.regressor {
            RegressorConfig::Gp { config, scaling } => {
                let ts = TrainingSet::new(&x, y, *scaling)?;
                Regressor::Gp(GpModel::train(&ts, Kernel::SquaredExponential, config)?)
            }
            RegressorConfig::Rvm { config, scaling } => {
                let ts = TrainingSet::new(&x, y, *scaling)?;
                Regressor::Rvm(RvmModel::train(&ts, config)?)
            }
        };
        Ok(Self {
            schema_version: Self::SCHEMA_VERSION,
            spec: spec.clone(),
            regressor,
            training_rows: used,
            excluded_rows: excluded,
        })
    }

    pub fn n_train(&self) -> usize {
        self.training_rows.len()
    }

    /// Prediction at an indicator vector.
    pub fn predict(&self, features: &[f64]) -> Result<SurrogatePrediction> {
        let normal = self.regressor.predict(features)?;
        let variance = match self.spec.variance {
            VarianceMode::Full => normal.total_variance(),
            VarianceMode::NoiseOnly => normal.noise_variance,
        };
        let mode = match self.spec.transformation {
            Transformation::Log => super::validation::log_normal_mode(normal.mean, variance),
            Transformation::Identity => normal.mean,
        };
        Ok(SurrogatePrediction { normal, variance, mode })
    }

    /// Prediction for a table row; `None` when its indicator is not finite.
    pub fn predict_row(&self, table: &SampleTable, row: usize) -> Result<Option<SurrogatePrediction>> {
        match self.spec.indicator.features(table, &table.rows[row])? {
            Some(f) => Ok(Some(self.predict(&f)?)),
            None => Ok(None),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(u64::from(Self::SCHEMA_VERSION)) {
            return Err(Error::Incompatible(format!("surrogate schema {version:?}, expected {}", Self::SCHEMA_VERSION)));
        }
        Ok(serde_json::from_value(value)?)
    }
}
