use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DMatrix;
use crate::scalar::{dot, Real};

use super::basis::RvmBasis;
use super::kernel::{sq_dist, Kernel};
use super::scaling::FeatureScaling;
use super::{NormalPrediction, TrainingSet};

/// Which basis to build from the training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RvmBasisSpec {
    Legendre { max_order: usize },
    /// Width `r`; the median pairwise training distance when `None`.
    Rbf { width: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RvmConfig {
    pub basis: RvmBasisSpec,
    pub max_sweeps: usize,
    /// Stop when no hyperparameter changes by more than this (relative).
    pub tol: f64,
    /// Basis functions whose precision exceeds this are removed.
    pub prune: f64,
    /// Noise floor relative to the mean squared target.
    pub noise_floor: f64,
}

impl Default for RvmConfig {
    fn default() -> Self {
        Self { basis: RvmBasisSpec::Legendre { max_order: 4 }, max_sweeps: 1000, tol: 1e-6, prune: 1e12, noise_floor: 1e-12 }
    }
}

/// Relevance vector machine `y = phi(x)^T w + eps`, `w_k ~ N(0, 1/beta_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RvmModel<T> {
    pub schema_version: u32,
    pub basis: RvmBasis<T>,
    pub scaling: FeatureScaling<T>,
    /// Indices into `basis` of the retained functions.
    pub active: Vec<usize>,
    /// `beta_k` of the retained functions.
    pub precisions: Vec<T>,
    pub weight_mean: Vec<T>,
    pub weight_covariance: DMatrix<T>,
    pub noise: T,
    pub sweeps: usize,
    pub converged: bool,
}

struct Posterior<T> {
    mean: Vec<T>,
    cov: DMatrix<T>,
}

fn design<T: Real>(basis: &RvmBasis<T>, x: &[Vec<T>]) -> Vec<Vec<T>> {
    x.iter().map(|r| basis.eval(r)).collect()
}

fn posterior<T: Real>(phi: &[Vec<T>], y: &[T], active: &[usize], beta: &[T], noise: T) -> Result<Posterior<T>> {
    let m = active.len();
    let mut h = DMatrix::zeros(m, m);
    let mut rhs = vec![T::zero(); m];
    for row in phi {
        for (a, &ka) in active.iter().enumerate() {
            for (b, &kb) in active.iter().enumerate().take(a + 1) {
                h[(a, b)] += row[ka] * row[kb];
            }
        }
    }
    for (row, &yi) in phi.iter().zip(y) {
        for (a, &ka) in active.iter().enumerate() {
            rhs[a] += row[ka] * yi;
        }
    }
    for a in 0..m {
        for b in 0..a {
            h[(a, b)] /= noise;
            h[(b, a)] = h[(a, b)];
        }
        h[(a, a)] = h[(a, a)] / noise + beta[a];
        rhs[a] /= noise;
    }
    let chol = h.cholesky()?;
    Ok(Posterior { mean: chol.solve(&rhs), cov: chol.inverse() })
}

fn build_basis<T: Real>(ts: &TrainingSet<T>, spec: RvmBasisSpec) -> Result<RvmBasis<T>> {
    match spec {
        RvmBasisSpec::Legendre { max_order } => Ok(RvmBasis::Legendre { max_order, n_features: ts.dim() }),
        RvmBasisSpec::Rbf { width } => {
            let r = match width {
                Some(w) if w > 0.0 => T::lit(w),
                Some(w) => return Err(Error::InvalidInput(format!("RBF width {w}"))),
                None => {
                    let mut d: Vec<T> = Vec::new();
                    for i in 0..ts.len() {
                        for j in 0..i {
                            d.push(sq_dist(&ts.x[i], &ts.x[j]).sqrt());
                        }
                    }
                    d.retain(|v| *v > T::zero());
                    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                    d.get(d.len() / 2).copied().unwrap_or(T::one())
                }
            };
            Ok(RvmBasis::Rbf { centers: ts.x.clone(), width: r })
        }
    }
}

impl<T: Real> RvmModel<T> {
    pub const SCHEMA_VERSION: u32 = 1;

    /// Evidence maximization by fixed-point re-estimation of `beta` and `sigma^2`.
    pub fn train(ts: &TrainingSet<T>, config: &RvmConfig) -> Result<Self> {
        let basis = build_basis(ts, config.basis)?;
        let phi = design(&basis, &ts.x);
        let y = &ts.y;
        let n = T::from_usize_lossy(ts.len());
        let mean_sq = y.iter().map(|&v| v * v).sum::<T>() / n;
        let floor = (T::lit(config.noise_floor) * mean_sq).max(T::min_positive_value());
        let mean = y.iter().copied().sum::<T>() / n;
        let var = y.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let mut noise = (T::lit(0.1) * var).max(floor);

        let mut active: Vec<usize> = Vec::new();
        let mut beta: Vec<T> = Vec::new();
        for k in 0..basis.len() {
            let pp: T = phi.iter().map(|r| r[k] * r[k]).sum();
            if !(pp > T::zero()) {
                continue;
            }
            let py: T = phi.iter().zip(y).map(|(r, &v)| r[k] * v).sum();
            let w = py / pp;
            active.push(k);
            beta.push(T::one() / (w * w).max(T::lit(1e-12) * mean_sq.max(T::min_positive_value())));
        }
        if active.is_empty() {
            return Err(Error::AllPruned);
        }

        let prune = T::lit(config.prune);
        let tol = T::lit(config.tol);
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < config.max_sweeps {
            sweeps += 1;
            let post = posterior(&phi, y, &active, &beta, noise)?;
            let mut gamma_sum = T::zero();
            let mut change = T::zero();
            let mut next_beta = Vec::with_capacity(active.len());
            for a in 0..active.len() {
                let gamma = (T::one() - beta[a] * post.cov[(a, a)]).max(T::zero());
                gamma_sum += gamma;
                let m2 = post.mean[a] * post.mean[a];
                let b = if m2 > T::zero() { (gamma / m2).max(T::min_positive_value()) } else { T::infinity() };
                change = change.max(((b - beta[a]) / beta[a]).abs());
                next_beta.push(b);
            }
            let resid: T = phi
                .iter()
                .zip(y)
                .map(|(r, &v)| {
                    let f: T = active.iter().zip(&post.mean).map(|(&k, &w)| r[k] * w).sum();
                    (v - f) * (v - f)
                })
                .sum();
            let dof = (n - gamma_sum).max(T::one());
            let next_noise = (resid / dof).max(floor);
            change = change.max(((next_noise - noise) / noise).abs());
            noise = next_noise;

            let keep: Vec<usize> = (0..active.len()).filter(|&a| next_beta[a] <= prune).collect();
            if keep.is_empty() {
                return Err(Error::AllPruned);
            }
            let pruned = keep.len() < active.len();
            active = keep.iter().map(|&a| active[a]).collect();
            beta = keep.iter().map(|&a| next_beta[a]).collect();
            if !pruned && change < tol {
                converged = true;
                break;
            }
        }
        let mut model = Self::with_hyperparameters(ts, basis, active, beta, noise)?;
        model.sweeps = sweeps;
        model.converged = converged;
        Ok(model)
    }

    /// Weight posterior at fixed precisions and noise.
    pub fn with_hyperparameters(
        ts: &TrainingSet<T>,
        basis: RvmBasis<T>,
        active: Vec<usize>,
        precisions: Vec<T>,
        noise: T,
    ) -> Result<Self> {
        if active.len() != precisions.len() {
            return Err(Error::Dimension { expected: active.len(), got: precisions.len() });
        }
        if active.is_empty() {
            return Err(Error::AllPruned);
        }
        if !(noise > T::zero()) || precisions.iter().any(|b| !(*b > T::zero())) {
            return Err(Error::InvalidInput("RVM precisions and noise must be positive".into()));
        }
        let phi = design(&basis, &ts.x);
        let post = posterior(&phi, &ts.y, &active, &precisions, noise)?;
        Ok(Self {
            schema_version: Self::SCHEMA_VERSION,
            basis,
            scaling: ts.scaling.clone(),
            active,
            precisions,
            weight_mean: post.mean,
            weight_covariance: post.cov,
            noise,
            sweeps: 0,
            converged: true,
        })
    }

    /// Covariance kernel of the equivalent Gaussian process.
    pub fn induced_kernel(&self) -> Kernel<T> {
        Kernel::Feature { basis: self.basis.clone(), active: self.active.clone(), precisions: self.precisions.clone() }
    }

    pub fn predict(&self, raw_x: &[T]) -> Result<NormalPrediction<T>> {
        Ok(self.predict_scaled(&self.scaling.apply(raw_x)?))
    }

    pub fn predict_scaled(&self, z: &[T]) -> NormalPrediction<T> {
        let full = self.basis.eval(z);
        let phi: Vec<T> = self.active.iter().map(|&k| full[k]).collect();
        NormalPrediction {
            mean: dot(&phi, &self.weight_mean),
            mean_variance: self.weight_covariance.bilinear(&phi, &phi).max(T::zero()),
            noise_variance: self.noise,
        }
    }

    /// Whether `raw_x` falls outside the Legendre domain after scaling.
    pub fn is_extrapolation(&self, raw_x: &[T]) -> Result<bool> {
        Ok(self.basis.is_extrapolation(&self.scaling.apply(raw_x)?))
    }
}
