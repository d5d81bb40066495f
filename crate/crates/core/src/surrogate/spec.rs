use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduced_basis::DualKey;
use crate::thermal::{COMPLIANT_OUTPUT, N_BLOCKS};

use super::samples::{SampleRow, SampleTable};

/// Cheap quantity the surrogate regresses on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IndicatorSpec {
    /// `log ||r||_2`
    LogResidualEuclid,
    /// `log ||r||_{K^-1}`
    LogResidualRiesz,
    /// `log Delta_u^mu`
    LogEnergyBound,
    /// Dual-weighted residual of one dual basis.
    DualWeightedResidual(DualKey),
    /// The nine conductivities (multifidelity correction).
    SystemInputs,
}

impl IndicatorSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::SystemInputs => N_BLOCKS,
            _ => 1,
        }
    }

    /// Feature vector of `row`; `None` when it is not finite (e.g. `log 0`).
    pub fn features(&self, table: &SampleTable, row: &SampleRow) -> Result<Option<Vec<f64>>> {
        let v = match self {
            Self::LogResidualEuclid => vec![row.residual_euclid.ln()],
            Self::LogResidualRiesz => vec![row.residual_riesz.ln()],
            Self::LogEnergyBound => vec![row.bound_energy.ln()],
            Self::DualWeightedResidual(key) => vec![row.dwr[table.dual_index(key)?]],
            Self::SystemInputs => row.mu.clone(),
        };
        Ok(v.iter().all(|x| x.is_finite()).then_some(v))
    }
}

/// Invertible map applied to errors before regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transformation {
    Log,
    Identity,
}

impl Transformation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Log => x.ln(),
            Self::Identity => x,
        }
    }

    pub fn invert(self, y: f64) -> f64 {
        match self {
            Self::Log => y.exp(),
            Self::Identity => y,
        }
    }
}

/// Which error the surrogate models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    EnergyStateError,
    XStateError,
    CompliantOutputError,
    /// Signed error `s(u) - s_red` of a point output.
    OutputError(String),
}

impl ErrorKind {
    /// Whether the error is nonnegative by construction.
    pub fn is_nonnegative(&self) -> bool {
        !matches!(self, Self::OutputError(_))
    }

    pub fn is_output(&self) -> bool {
        matches!(self, Self::CompliantOutputError | Self::OutputError(_))
    }

    pub fn output_id(&self) -> Option<&str> {
        match self {
            Self::CompliantOutputError => Some(COMPLIANT_OUTPUT),
            Self::OutputError(id) => Some(id),
            _ => None,
        }
    }

    pub fn value(&self, table: &SampleTable, row: &SampleRow) -> Result<f64> {
        Ok(match self {
            Self::EnergyStateError => row.err_energy,
            Self::XStateError => row.err_xnorm,
            Self::CompliantOutputError => row.err_output_compliant,
            Self::OutputError(id) => row.err_outputs[table.output_index(id)?],
        })
    }

    pub fn check_transformation(&self, t: Transformation) -> Result<()> {
        if t == Transformation::Log && !self.is_nonnegative() {
            return Err(Error::Incompatible(format!("log transformation of signed error {self:?}")));
        }
        Ok(())
    }
}

/// Which predictive variance the surrogate reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceMode {
    /// Noise plus uncertainty of the mean.
    Full,
    /// Inferred noise only.
    NoiseOnly,
}
