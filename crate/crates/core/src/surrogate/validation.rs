use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;

use crate::error::{Error, Result};

use super::model::{ErrorSurrogate, SurrogatePrediction};
use super::samples::{SampleTable, Split};
use super::spec::{ErrorKind, Transformation};
use super::stats::Stats;
use super::ZERO_ERROR;

/// Mode of a log-normal law whose logarithm is `N(nu, var)`.
pub fn log_normal_mode(nu: f64, var: f64) -> f64 {
    (nu - var).exp()
}

/// Mean shift `sqrt(2) sigma erfinv(2c - 1)` that makes the surrogate
/// overestimate with probability `c`.
pub fn rigor_shift(c: f64, sigma: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::RigorLevel(c));
    }
    if c == 0.5 {
        return Ok(0.0);
    }
    Ok(std::f64::consts::SQRT_2 * sigma * erf_inv(2.0 * c - 1.0))
}

/// Reduced output corrected by the surrogate's point estimate.
pub fn corrected_output(reduced: f64, surrogate_mode: f64) -> f64 {
    reduced + surrogate_mode
}

/// Mode of the back-transformed surrogate after shifting its mean for rigor `c`.
fn shifted_mode(s: &ErrorSurrogate, p: &SurrogatePrediction, c: f64) -> Result<f64> {
    let nu = p.normal.mean + rigor_shift(c, p.std_dev())?;
    Ok(match s.spec.transformation {
        Transformation::Log => log_normal_mode(nu, p.variance),
        Transformation::Identity => nu,
    })
}

/// A validation row the surrogate can be scored on.
struct Scored {
    row: usize,
    error: f64,
    target: f64,
    pred: SurrogatePrediction,
}

/// Validation rows with finite indicators and admissible errors, and the
/// indices of the rows that were skipped.
fn scored_rows(s: &ErrorSurrogate, table: &SampleTable) -> Result<(Vec<Scored>, Vec<usize>)> {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for i in table.indices(Split::Validation) {
        let error = s.spec.error.value(table, &table.rows[i])?;
        let admissible = error.is_finite() && (s.spec.transformation != Transformation::Log || error > ZERO_ERROR);
        match s.predict_row(table, i)? {
            Some(pred) if admissible => {
                out.push(Scored { row: i, error, target: s.spec.transformation.apply(error), pred });
            }
            _ => skipped.push(i),
        }
    }
    if out.is_empty() {
        return Err(Error::InsufficientData("no usable validation rows".into()));
    }
    Ok((out, skipped))
}

/// Observed frequency of the transformed error inside the central
/// `omega` interval, for both variance modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub omega: f64,
    pub observed_full: f64,
    pub observed_noise_only: f64,
    pub count: usize,
}

pub fn coverage(s: &ErrorSurrogate, table: &SampleTable, omegas: &[f64]) -> Result<Vec<CoverageEntry>> {
    let (rows, _) = scored_rows(s, table)?;
    omegas
        .iter()
        .map(|&omega| {
            if !(0.0..=1.0).contains(&omega) {
                return Err(Error::InvalidInput(format!("confidence level {omega}")));
            }
            let z = std::f64::consts::SQRT_2 * erf_inv(omega);
            let inside = |sd: &dyn Fn(&Scored) -> f64| {
                rows.iter().filter(|r| (r.target - r.pred.normal.mean).abs() < z * sd(r)).count() as f64 / rows.len() as f64
            };
            Ok(CoverageEntry {
                omega,
                observed_full: inside(&|r: &Scored| r.pred.normal.std_dev()),
                observed_noise_only: inside(&|r: &Scored| r.pred.normal.noise_variance.sqrt()),
                count: rows.len(),
            })
        })
        .collect()
}

/// `D = d(delta) - nu` on the validation rows.
pub fn deviation_samples(s: &ErrorSurrogate, table: &SampleTable) -> Result<Vec<f64>> {
    Ok(scored_rows(s, table)?.0.iter().map(|r| r.target - r.pred.normal.mean).collect())
}

/// `mode(c-shifted surrogate) / error`; `None` for a zero error or
/// non-finite indicator.
pub fn effectivity(s: &ErrorSurrogate, c: f64, table: &SampleTable, row: usize) -> Result<Option<f64>> {
    let err = s.spec.error.value(table, &table.rows[row])?;
    if !(err.abs() > ZERO_ERROR) {
        return Ok(None);
    }
    match s.predict_row(table, row)? {
        Some(p) => Ok(Some(shifted_mode(s, &p, c)? / err)),
        None => Ok(None),
    }
}

/// `|(delta - mode) / delta|`; below one means the correction helps.
pub fn expected_improvement(s: &ErrorSurrogate, table: &SampleTable, row: usize) -> Result<Option<f64>> {
    let err = s.spec.error.value(table, &table.rows[row])?;
    if !(err.abs() > ZERO_ERROR) {
        return Ok(None);
    }
    match s.predict_row(table, row)? {
        Some(p) => Ok(Some(((err - p.mode) / err).abs())),
        None => Ok(None),
    }
}

/// Fraction of validation rows where the median of the `c`-shifted
/// transformed prediction exceeds the transformed error.
pub fn overestimation_frequency(s: &ErrorSurrogate, c: f64, table: &SampleTable) -> Result<f64> {
    let (rows, _) = scored_rows(s, table)?;
    let mut over = 0;
    for r in &rows {
        if r.pred.normal.mean + rigor_shift(c, r.pred.std_dev())? > r.target {
            over += 1;
        }
    }
    Ok(over as f64 / rows.len() as f64)
}

/// Uniform law on a rigorous two-sided bound interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformBaseline {
    pub lower: f64,
    pub upper: f64,
}

impl UniformBaseline {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::InvertedInterval { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    /// Point summary: the expected value.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn improvement(&self, error: f64) -> f64 {
        ((error - self.midpoint()) / error).abs()
    }

    pub fn effectivity(&self, error: f64) -> f64 {
        self.midpoint() / error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSettings {
    pub omegas: Vec<f64>,
    pub rigor_levels: Vec<f64>,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self { omegas: vec![0.5, 0.8, 0.9, 0.95, 0.99], rigor_levels: vec![0.5, 0.9] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigorEntry {
    pub c: f64,
    /// Effectivity of the shifted mode (nonnegative error kinds only).
    pub effectivity: Option<Stats>,
    pub overestimation_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub improvement: Option<Stats>,
    pub effectivity: Option<Stats>,
    /// Fraction of rows whose error lies inside the interval.
    pub bracketed: f64,
}

/// Everything measured on the validation split for one surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_train: usize,
    pub n_validation: usize,
    pub skipped_rows: Vec<usize>,
    pub coverage: Vec<CoverageEntry>,
    pub deviations: Vec<f64>,
    pub deviation_stats: Option<Stats>,
    /// Mean inferred noise variance over the validation rows.
    pub noise_variance: f64,
    pub rigor: Vec<RigorEntry>,
    /// Output error kinds only.
    pub improvement: Option<Stats>,
    /// Rigorous reduced-basis bound over true error.
    pub bound_effectivity: Option<Stats>,
    /// Compliant output only.
    pub uniform_baseline: Option<BaselineSummary>,
}

pub fn validate(s: &ErrorSurrogate, table: &SampleTable, settings: &ValidationSettings) -> Result<ValidationReport> {
    let (rows, skipped) = scored_rows(s, table)?;
    let coverage = coverage(s, table, &settings.omegas)?;
    let deviations: Vec<f64> = rows.iter().map(|r| r.target - r.pred.normal.mean).collect();
    let noise_variance = rows.iter().map(|r| r.pred.normal.noise_variance).sum::<f64>() / rows.len() as f64;
    let nonzero: Vec<&Scored> = rows.iter().filter(|r| r.error.abs() > ZERO_ERROR).collect();

    let mut rigor = Vec::with_capacity(settings.rigor_levels.len());
    for &c in &settings.rigor_levels {
        let effectivity = if s.spec.error.is_nonnegative() {
            let e = nonzero.iter().map(|r| Ok(shifted_mode(s, &r.pred, c)? / r.error)).collect::<Result<Vec<_>>>()?;
            Stats::of(&e)
        } else {
            None
        };
        rigor.push(RigorEntry { c, effectivity, overestimation_frequency: overestimation_frequency(s, c, table)? });
    }

    let improvement = if s.spec.error.is_output() {
        let v: Vec<f64> = nonzero.iter().map(|r| ((r.error - r.pred.mode) / r.error).abs()).collect();
        Stats::of(&v)
    } else {
        None
    };

    let bound_of = |i: usize| {
        let row = &table.rows[i];
        match s.spec.error {
            ErrorKind::EnergyStateError => Some(row.bound_energy),
            ErrorKind::XStateError => Some(row.bound_xnorm),
            ErrorKind::CompliantOutputError => Some(row.bound_output),
            ErrorKind::OutputError(_) => None,
        }
    };
    let bound_eff: Vec<f64> = nonzero.iter().filter_map(|r| bound_of(r.row).map(|b| b / r.error)).collect();

    let uniform_baseline = if s.spec.error == ErrorKind::CompliantOutputError {
        let mut imp = Vec::new();
        let mut eff = Vec::new();
        let mut inside = 0;
        for r in &nonzero {
            let row = &table.rows[r.row];
            let u = UniformBaseline::new(row.bound_output_lb, row.bound_output)?;
            imp.push(u.improvement(r.error));
            eff.push(u.effectivity(r.error));
            inside += usize::from(u.contains(r.error));
        }
        Some(BaselineSummary {
            improvement: Stats::of(&imp),
            effectivity: Stats::of(&eff),
            bracketed: inside as f64 / nonzero.len().max(1) as f64,
        })
    } else {
        None
    };

    Ok(ValidationReport {
        n_train: s.n_train(),
        n_validation: rows.len(),
        skipped_rows: skipped,
        coverage,
        deviation_stats: Stats::of(&deviations),
        deviations,
        noise_variance,
        rigor,
        improvement,
        bound_effectivity: Stats::of(&bound_eff),
        uniform_baseline,
    })
}
