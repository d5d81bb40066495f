//! Experiment configuration, read from a TOML document.
//!
//! Every table is optional; missing values fall back to the 60x60
//! thermal-block experiment in `configs/thermal_block.toml`.

use std::collections::BTreeSet;
use std::path::Path;

use romes::reduced_basis::DualKey;
use romes::regression::{GpConfig, RvmBasisSpec, RvmConfig, ScalingMode};
use romes::surrogate::{ErrorKind, IndicatorSpec, RegressorConfig, SurrogateSpec, Transformation, VarianceMode};
use romes::thermal::{ParameterBox, TriangularMesh};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::sha256_hex;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Base seed. Greedy candidates use `seed`, sample set `k` uses `seed + 1 + k`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub parameters: ParameterConfig,
    #[serde(default)]
    pub greedy: GreedyConfig,
    #[serde(default)]
    pub duals: DualConfig,
    #[serde(default = "default_sample_sets")]
    pub samples: Vec<SampleSetConfig>,
    #[serde(default = "default_surrogates")]
    pub surrogates: Vec<SurrogateConfig>,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub regression: RegressionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            mesh: MeshConfig::default(),
            parameters: ParameterConfig::default(),
            greedy: GreedyConfig::default(),
            duals: DualConfig::default(),
            samples: default_sample_sets(),
            surrogates: default_surrogates(),
            validation: ValidationConfig::default(),
            regression: RegressionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Elements per side; a multiple of 3.
    pub divisions: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { divisions: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Uniform,
    LogUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterConfig {
    pub lower: f64,
    pub upper: f64,
    pub sampling: Sampling,
}

impl Default for ParameterConfig {
    fn default() -> Self {
        Self { lower: 0.1, upper: 10.0, sampling: Sampling::Uniform }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyConfig {
    pub candidates: usize,
    pub tol: f64,
    pub max_dim: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self { candidates: 100, tol: 1.0, max_dim: 200 }
    }
}

/// Point output location: a mesh node id, or coordinates snapped to the
/// nearest node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

impl PointConfig {
    pub fn at(x: f64, y: f64) -> Self {
        Self { node: None, x: Some(x), y: Some(y) }
    }

    pub fn node(&self, mesh: &TriangularMesh) -> Result<usize> {
        match (self.node, self.x, self.y) {
            (Some(n), None, None) if n < mesh.nodes.len() => Ok(n),
            (Some(n), None, None) => Err(CliError::Config(format!("node {n} out of range"))),
            (None, Some(x), Some(y)) => Ok(mesh.nearest_node(x, y)),
            _ => Err(CliError::Config("a point needs either `node` or both `x` and `y`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualConfig {
    /// Point outputs, registered as `x1`, `x2`, ... in this order.
    pub points: Vec<PointConfig>,
    /// One dual basis per point and tolerance.
    pub tolerances: Vec<f64>,
    pub max_dim: usize,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            points: vec![PointConfig::at(1.0 / 3.0, 1.0 / 3.0), PointConfig::at(2.0 / 3.0, 2.0 / 3.0)],
            tolerances: vec![1.0, 0.5, 0.1],
            max_dim: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSetConfig {
    pub name: String,
    pub total: usize,
    pub train: usize,
    /// Defaults to `total - train`; rows past `train + validation` are not evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<usize>,
}

impl SampleSetConfig {
    pub fn validation(&self) -> usize {
        self.validation.unwrap_or(self.total.saturating_sub(self.train))
    }
}

fn default_sample_sets() -> Vec<SampleSetConfig> {
    vec![
        SampleSetConfig { name: "main".into(), total: 2000, train: 100, validation: None },
        SampleSetConfig { name: "dual".into(), total: 500, train: 100, validation: None },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorName {
    LogResidualEuclid,
    LogResidualRiesz,
    LogEnergyBound,
    DualWeightedResidual,
    SystemInputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorName {
    Energy,
    XNorm,
    CompliantOutput,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformationName {
    Log,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorName {
    Gp,
    Rvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceName {
    Full,
    NoiseOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingName {
    PaddedRange,
    Standardize,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Used in output file names.
    pub name: String,
    /// Sample set to train and validate on; the first set when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    pub indicator: IndicatorName,
    pub error: ErrorName,
    pub transformation: TransformationName,
    #[serde(default = "default_regressor")]
    pub regressor: RegressorName,
    #[serde(default = "default_variance")]
    pub variance: VarianceName,
    #[serde(default = "default_scaling")]
    pub scaling: ScalingName,
    /// Point output id for `error = "output"` and dual-weighted indicators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Dual tolerance selecting the dual basis of a dual-weighted indicator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

fn default_regressor() -> RegressorName {
    RegressorName::Gp
}

fn default_variance() -> VarianceName {
    VarianceName::Full
}

fn default_scaling() -> ScalingName {
    ScalingName::PaddedRange
}

fn surrogate(name: &str, indicator: IndicatorName, error: ErrorName, transformation: TransformationName) -> SurrogateConfig {
    SurrogateConfig {
        name: name.into(),
        table: None,
        indicator,
        error,
        transformation,
        regressor: RegressorName::Gp,
        variance: VarianceName::Full,
        scaling: ScalingName::PaddedRange,
        output: None,
        level: None,
    }
}

fn default_surrogates() -> Vec<SurrogateConfig> {
    use IndicatorName::*;
    let mut out = vec![
        surrogate("energy-gp", LogResidualEuclid, ErrorName::Energy, TransformationName::Log),
        SurrogateConfig { variance: VarianceName::NoiseOnly, ..surrogate("energy-gp-noise", LogResidualEuclid, ErrorName::Energy, TransformationName::Log) },
        SurrogateConfig { regressor: RegressorName::Rvm, ..surrogate("energy-rvm", LogResidualEuclid, ErrorName::Energy, TransformationName::Log) },
        surrogate("compliant-gp", LogResidualEuclid, ErrorName::CompliantOutput, TransformationName::Log),
        surrogate("compliant-multifidelity", SystemInputs, ErrorName::CompliantOutput, TransformationName::Identity),
    ];
    for k in 1..=2 {
        for level in [1.0, 0.5, 0.1] {
            out.push(SurrogateConfig {
                table: Some("dual".into()),
                regressor: RegressorName::Rvm,
                output: Some(format!("x{k}")),
                level: Some(level),
                ..surrogate(&format!("x{k}-dwr-{level}"), DualWeightedResidual, ErrorName::Output, TransformationName::Identity)
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub omegas: Vec<f64>,
    pub rigor_levels: Vec<f64>,
    /// Training sizes; each run uses the first `N` training rows.
    pub sweep: Vec<usize>,
    pub histogram_bins: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            omegas: vec![0.5, 0.8, 0.9, 0.95, 0.99],
            rigor_levels: vec![0.5, 0.9],
            sweep: vec![10, 20, 35, 50, 65, 80, 95, 100],
            histogram_bins: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionConfig {
    pub gp_starts: usize,
    pub gp_max_iter: usize,
    pub rvm_max_order: usize,
    pub rvm_max_sweeps: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self { gp_starts: 5, gp_max_iter: 500, rvm_max_order: 4, rvm_max_sweeps: 1000 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        match value.get("schema_version").and_then(toml::Value::as_integer) {
            Some(v) if v == i64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(CliError::Config(format!("schema_version {v} is not supported (expected {SCHEMA_VERSION})"))),
            None => return Err(CliError::Config("missing schema_version".into())),
        }
        let config: Self = value.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    /// Hash that ignores the training-size sweep, so reports from different
    /// sweeps of one experiment can be merged.
    pub fn experiment_hash(&self) -> String {
        let mut c = self.clone();
        c.validation.sweep.clear();
        c.hash()
    }

    pub fn parameter_box(&self) -> ParameterBox {
        ParameterBox { lower: self.parameters.lower, upper: self.parameters.upper }
    }

    pub fn point_ids(&self) -> Vec<String> {
        (1..=self.duals.points.len()).map(|k| format!("x{k}")).collect()
    }

    pub fn sample_set(&self, name: &str) -> Option<&SampleSetConfig> {
        self.samples.iter().find(|s| s.name == name)
    }

    /// Sample set a surrogate trains on.
    pub fn table_of<'a>(&'a self, s: &'a SurrogateConfig) -> &'a str {
        s.table.as_deref().unwrap_or(&self.samples[0].name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported", self.schema_version));
        }
        if self.mesh.divisions == 0 || !self.mesh.divisions.is_multiple_of(3) {
            return bad(format!("mesh.divisions must be a positive multiple of 3, got {}", self.mesh.divisions));
        }
        ParameterBox::new(self.parameters.lower, self.parameters.upper).map_err(|e| CliError::Config(e.to_string()))?;
        if self.greedy.candidates == 0 || self.greedy.max_dim == 0 || !(self.greedy.tol > 0.0) {
            return bad("greedy needs candidates >= 1, max_dim >= 1 and tol > 0".into());
        }
        if self.duals.tolerances.iter().any(|t| !(*t > 0.0)) || self.duals.max_dim == 0 {
            return bad("dual tolerances must be positive and duals.max_dim >= 1".into());
        }
        for p in &self.duals.points {
            let coords_ok = match (p.x, p.y) {
                (Some(x), Some(y)) => (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y),
                _ => true,
            };
            if !coords_ok || !matches!((p.node, p.x, p.y), (Some(_), None, None) | (None, Some(_), Some(_))) {
                return bad(format!("invalid point {p:?}"));
            }
        }
        if self.samples.is_empty() {
            return bad("at least one sample set is required".into());
        }
        let mut names = BTreeSet::new();
        for s in &self.samples {
            check_name(&s.name)?;
            if !names.insert(&s.name) {
                return bad(format!("duplicate sample set '{}'", s.name));
            }
            if s.train + s.validation() > s.total {
                return bad(format!("sample set '{}': train + validation exceeds total", s.name));
            }
        }
        let v = &self.validation;
        if v.omegas.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return bad("confidence levels must lie in [0, 1]".into());
        }
        if v.rigor_levels.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
            return bad("rigor levels must lie in (0, 1)".into());
        }
        if v.sweep.is_empty() || v.sweep.iter().any(|&n| n < 2) {
            return bad("validation.sweep needs training sizes >= 2".into());
        }
        if v.histogram_bins == 0 {
            return bad("validation.histogram_bins must be positive".into());
        }
        let mut names = BTreeSet::new();
        for s in &self.surrogates {
            check_name(&s.name)?;
            if !names.insert(&s.name) {
                return bad(format!("duplicate surrogate '{}'", s.name));
            }
            let Some(set) = self.sample_set(self.table_of(s)) else {
                return bad(format!("surrogate '{}': unknown sample set '{}'", s.name, self.table_of(s)));
            };
            if let Some(&n) = v.sweep.iter().find(|&&n| n > set.train) {
                return bad(format!("surrogate '{}': sweep size {n} exceeds {} training rows", s.name, set.train));
            }
            self.surrogate_spec(s)?;
        }
        Ok(())
    }

    /// Translates a configured surrogate into the core `SurrogateSpec`.
    pub fn surrogate_spec(&self, s: &SurrogateConfig) -> Result<SurrogateSpec> {
        let err = |msg: &str| CliError::Config(format!("surrogate '{}': {msg}", s.name));
        let output = || -> Result<String> {
            let id = s.output.clone().ok_or_else(|| err("`output` is required"))?;
            if self.point_ids().contains(&id) {
                Ok(id)
            } else {
                Err(err(&format!("unknown point output '{id}'")))
            }
        };
        let indicator = match s.indicator {
            IndicatorName::LogResidualEuclid => IndicatorSpec::LogResidualEuclid,
            IndicatorName::LogResidualRiesz => IndicatorSpec::LogResidualRiesz,
            IndicatorName::LogEnergyBound => IndicatorSpec::LogEnergyBound,
            IndicatorName::SystemInputs => IndicatorSpec::SystemInputs,
            IndicatorName::DualWeightedResidual => {
                let level = s.level.ok_or_else(|| err("`level` is required for dual-weighted residuals"))?;
                if !self.duals.tolerances.contains(&level) {
                    return Err(err(&format!("no dual basis with tolerance {level}")));
                }
                IndicatorSpec::DualWeightedResidual(DualKey { output: output()?, level })
            }
        };
        let error = match s.error {
            ErrorName::Energy => ErrorKind::EnergyStateError,
            ErrorName::XNorm => ErrorKind::XStateError,
            ErrorName::CompliantOutput => ErrorKind::CompliantOutputError,
            ErrorName::Output => ErrorKind::OutputError(output()?),
        };
        let transformation = match s.transformation {
            TransformationName::Log => Transformation::Log,
            TransformationName::Identity => Transformation::Identity,
        };
        error.check_transformation(transformation).map_err(|e| err(&e.to_string()))?;
        let scaling = match s.scaling {
            ScalingName::PaddedRange => ScalingMode::PaddedRange,
            ScalingName::Standardize => ScalingMode::Standardize,
            ScalingName::Identity => ScalingMode::Identity,
        };
        let r = &self.regression;
        let regressor = match s.regressor {
            RegressorName::Gp => RegressorConfig::Gp {
                config: GpConfig { starts: r.gp_starts, max_iter: r.gp_max_iter, seed: self.seed, ..GpConfig::default() },
                scaling,
            },
            RegressorName::Rvm => RegressorConfig::Rvm {
                config: RvmConfig {
                    basis: RvmBasisSpec::Legendre { max_order: r.rvm_max_order },
                    max_sweeps: r.rvm_max_sweeps,
                    ..RvmConfig::default()
                },
                scaling,
            },
        };
        let variance = match s.variance {
            VarianceName::Full => VarianceMode::Full,
            VarianceName::NoiseOnly => VarianceMode::NoiseOnly,
        };
        Ok(SurrogateSpec { indicator, transformation, error, variance, regressor })
    }
}

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("name '{name}' may only contain letters, digits, '-', '_' and '.'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let c = ExperimentConfig::from_toml("schema_version = 1").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn schema_version_is_required_and_checked() {
        assert!(matches!(ExperimentConfig::from_toml("seed = 1"), Err(CliError::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("schema_version = 2"), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_settings_are_rejected() {
        for doc in [
            "schema_version = 1\n[mesh]\ndivisions = 10",
            "schema_version = 1\n[greedy]\ncandidates = 10\ntol = -1.0\nmax_dim = 5",
            "schema_version = 1\n[[samples]]\nname = \"a\"\ntotal = 10\ntrain = 8\nvalidation = 5",
            "schema_version = 1\nunknown = 3",
            "schema_version = 1\n[validation]\nomegas = [1.5]\nrigor_levels = [0.5]\nsweep = [10]\nhistogram_bins = 5",
        ] {
            assert!(matches!(ExperimentConfig::from_toml(doc), Err(CliError::Config(_))), "{doc}");
        }
    }

    #[test]
    fn log_of_signed_output_error_is_a_config_error() {
        let mut c = ExperimentConfig::default();
        c.surrogates[5].transformation = TransformationName::Log;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn experiment_hash_ignores_sweep() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.validation.sweep = vec![20];
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.experiment_hash(), b.experiment_hash());
        b.seed = 4;
        assert_ne!(a.experiment_hash(), b.experiment_hash());
    }
}
