//! Reduced-basis models of the nine-block thermal problem and statistical
//! surrogates of their errors.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: dense/sparse kernels used everywhere else,
//! * [`thermal`]: the high-fidelity P1 finite-element model,
//! * [`reduced_basis`]: greedy bases, offline/online projection, residual
//!   norms, rigorous bounds and dual-weighted residuals,
//! * [`regression`]: Gaussian-process kernel regression and the relevance
//!   vector machine,
//! * [`surrogate`]: error surrogates built from indicators, their
//!   validation statistics and baselines.
//!
//! Numerical code is generic over [`Real`] (`f32`, `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which is what the pipeline uses.

pub mod error;
pub mod linalg;
pub mod reduced_basis;
pub mod regression;
pub mod scalar;
pub mod surrogate;
pub mod thermal;

pub use error::{Error, Result};
pub use scalar::Real;

pub type InputPoint = thermal::InputPoint<f64>;
pub type AffineOperator = thermal::AffineOperator<f64>;
pub type ReducedBasis = reduced_basis::ReducedBasis<f64>;
pub type ReducedModel = reduced_basis::ReducedModel<f64>;
pub type ProjectedSystem = reduced_basis::ProjectedSystem<f64>;
pub type BoundSet = reduced_basis::BoundSet<f64>;
pub type TrainingSet = regression::TrainingSet<f64>;
pub type GpModel = regression::GpModel<f64>;
pub type RvmModel = regression::RvmModel<f64>;
pub type NormalPrediction = regression::NormalPrediction<f64>;
pub use surrogate::ErrorSurrogate;

/// Single-precision variants.
pub mod f32 {
    pub type InputPoint = crate::thermal::InputPoint<f32>;
    pub type AffineOperator = crate::thermal::AffineOperator<f32>;
    pub type ReducedModel = crate::reduced_basis::ReducedModel<f32>;
    pub type GpModel = crate::regression::GpModel<f32>;
}
