use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DMatrix;
use crate::scalar::{dot, Real};
use crate::thermal::{AffineOperator, InputPoint, ParameterBox, COMPLIANT_OUTPUT};

use super::bounds::{coercivity_lower_bound, BoundSet};
use super::system::{ProjectedSystem, Weighting};

/// Identifies a dual basis: output id and the greedy tolerance it was built to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualKey {
    pub output: String,
    pub level: f64,
}

/// Reduced dual model for one output plus the primal/dual coupling blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DualModel<T> {
    pub key: DualKey,
    /// Projection of `A(mu) y = -g`.
    pub system: ProjectedSystem<T>,
    /// `V_y^T A^q V`, `p_y x p`.
    pub cross: Vec<DMatrix<T>>,
    /// `V_y^T f`
    pub load: Vec<T>,
}

/// Dual quantities at one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DualEstimate<T> {
    /// `y_red^T (A(mu) V c - f)`, a first-order estimate of `s(u) - s_red`.
    pub weighted_residual: T,
    pub residual_riesz: T,
    pub residual_euclid: T,
    /// `r * r_g / alpha_LB` with Riesz residual norms.
    pub output_bound: T,
}

/// Online result of a primal reduced solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ReducedState<T> {
    pub mu: InputPoint<T>,
    pub coeffs: Vec<T>,
    pub bounds: BoundSet<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OutputProjection<T> {
    pub id: String,
    /// `V^T g`
    pub projected: Vec<T>,
}

/// Everything the online stage needs: primal system, projected outputs and
/// the dual models.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ReducedModel<T> {
    pub schema_version: u32,
    pub n_dofs: usize,
    pub mesh_divisions: Option<usize>,
    pub parameter_box: ParameterBox,
    pub primal: ProjectedSystem<T>,
    pub outputs: Vec<OutputProjection<T>>,
    pub duals: Vec<DualModel<T>>,
}

impl<T: Real> ReducedModel<T> {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn new(op: &AffineOperator<T>, primal: ProjectedSystem<T>) -> Result<Self> {
        if primal.basis.dim() > 0 && primal.basis.n() != op.n() {
            return Err(Error::Dimension { expected: op.n(), got: primal.basis.n() });
        }
        let outputs = op
            .outputs
            .iter()
            .map(|o| OutputProjection { id: o.id.clone(), projected: primal.basis.project(&o.vector) })
            .collect();
        Ok(Self {
            schema_version: Self::SCHEMA_VERSION,
            n_dofs: op.n(),
            mesh_divisions: None,
            parameter_box: op.parameter_box,
            primal,
            outputs,
            duals: Vec::new(),
        })
    }

    /// Attaches a dual basis built for `key.output`, replacing one with the same key.
    pub fn add_dual(&mut self, op: &AffineOperator<T>, key: DualKey, system: ProjectedSystem<T>) -> Result<()> {
        op.output(&key.output)?;
        let dual_vecs = &system.basis.vectors;
        let primal_vecs = &self.primal.basis.vectors;
        let mut cross = Vec::with_capacity(op.n_components());
        for a in &op.components {
            let av: Vec<Vec<T>> = primal_vecs.iter().map(|v| a.matvec(v)).collect();
            cross.push(DMatrix::from_fn(dual_vecs.len(), primal_vecs.len(), |i, j| dot(&dual_vecs[i], &av[j])));
        }
        let load = system.basis.project(&op.rhs);
        self.duals.retain(|d| d.key != key);
        self.duals.push(DualModel { key, system, cross, load });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.primal.dim()
    }

    pub fn check_input(&self, mu: &InputPoint<T>) -> Result<()> {
        if !self.parameter_box.contains(mu) {
            return Err(Error::InvalidInput(format!(
                "input outside [{}, {}]^9",
                self.parameter_box.lower, self.parameter_box.upper
            )));
        }
        Ok(())
    }

    /// Reduced solve, residual norms and rigorous bounds at `mu`.
    pub fn evaluate(&self, mu: &InputPoint<T>) -> Result<ReducedState<T>> {
        self.check_input(mu)?;
        let coeffs = self.primal.solve(mu)?;
        let riesz = self.primal.residual_norm(mu, &coeffs, Weighting::Riesz)?;
        let euclid = self.primal.residual_norm(mu, &coeffs, Weighting::Euclid)?;
        Ok(ReducedState { mu: mu.clone(), coeffs, bounds: BoundSet::new(mu, riesz, euclid) })
    }

    pub fn reconstruct(&self, state: &ReducedState<T>) -> Vec<T> {
        self.primal.reconstruct(&state.coeffs)
    }

    /// Reduced output `g^T V c`.
    pub fn output(&self, state: &ReducedState<T>, id: &str) -> Result<T> {
        if id == COMPLIANT_OUTPUT {
            return Ok(dot(&self.primal.reduced_rhs, &state.coeffs));
        }
        let o = self
            .outputs
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::UnknownOutput(id.to_string()))?;
        Ok(dot(&o.projected, &state.coeffs))
    }

    pub fn dual(&self, output: &str, level: f64) -> Result<&DualModel<T>> {
        self.duals
            .iter()
            .find(|d| d.key.output == output && d.key.level == level)
            .ok_or_else(|| Error::UnknownOutput(format!("{output} (dual level {level})")))
    }

    /// Dual-weighted residual, dual residual norms and output bound.
    pub fn evaluate_dual(&self, dual: &DualModel<T>, state: &ReducedState<T>) -> Result<DualEstimate<T>> {
        let mu = &state.mu;
        let y = dual.system.solve(mu)?;
        let mut weighted = -dot(&y, &dual.load);
        for (m, c) in mu.values().iter().zip(&dual.cross) {
            weighted += *m * c.bilinear(&y, &state.coeffs);
        }
        let rg = dual.system.residual_norm(mu, &y, Weighting::Riesz)?;
        let rg_euclid = dual.system.residual_norm(mu, &y, Weighting::Euclid)?;
        Ok(DualEstimate {
            weighted_residual: weighted,
            residual_riesz: rg,
            residual_euclid: rg_euclid,
            output_bound: state.bounds.residual_riesz * rg / coercivity_lower_bound(mu),
        })
    }

    pub fn dual_weighted_residual(&self, dual: &DualModel<T>, state: &ReducedState<T>) -> Result<T> {
        Ok(self.evaluate_dual(dual, state)?.weighted_residual)
    }

    pub fn output_bound_dual(&self, dual: &DualModel<T>, state: &ReducedState<T>) -> Result<T> {
        Ok(self.evaluate_dual(dual, state)?.output_bound)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(u64::from(Self::SCHEMA_VERSION)) {
            return Err(Error::Incompatible(format!(
                "reduced model schema {version:?}, expected {}",
                Self::SCHEMA_VERSION
            )));
        }
        Ok(serde_json::from_value(value)?)
    }
}
