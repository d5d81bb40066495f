//! ROMES error surrogates: indicator and transformation choices, trained
//! regressors, probabilistic rigor and validation statistics.
//!
//! This layer works in `f64` throughout; it consumes sample tables produced
//! by the high-fidelity and reduced models.

mod model;
mod samples;
mod spec;
mod stats;
mod validation;

pub use model::{ErrorSurrogate, Regressor, RegressorConfig, SurrogatePrediction, SurrogateSpec};
pub use samples::{collect_samples, SampleRow, SampleTable, Split};
pub use spec::{ErrorKind, IndicatorSpec, Transformation, VarianceMode};
pub use stats::{histogram, HistogramBin, Stats};
pub use validation::{
    corrected_output, coverage, deviation_samples, effectivity, expected_improvement, log_normal_mode,
    overestimation_frequency, rigor_shift, validate, BaselineSummary, CoverageEntry, RigorEntry, UniformBaseline,
    ValidationReport,
    ValidationSettings,
};

/// Errors at or below this magnitude mark snapshot rows, which carry no
/// information under a log transformation.
pub const ZERO_ERROR: f64 = 1e-14;
