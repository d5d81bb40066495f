use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DMatrix};
use crate::scalar::{dot, Real};

use super::kernel::{sq_dist, Kernel};
use super::optimize::nelder_mead;
use super::scaling::FeatureScaling;
use super::{NormalPrediction, TrainingSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    /// Number of optimizer starts (the first is a data-driven guess).
    pub starts: usize,
    /// Simplex iterations per start.
    pub max_iter: usize,
    pub seed: u64,
    /// Subtract the target mean before fitting and add it back when predicting.
    pub center_targets: bool,
    pub noise_floor: f64,
    /// Diagonal jitter relative to `trace(K) / N`.
    pub jitter: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self { starts: 5, max_iter: 500, seed: 0, center_targets: true, noise_floor: 1e-12, jitter: 1e-10 }
    }
}

/// Gaussian-process regressor with hyperparameters `(l^2, sigma^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GpModel<T> {
    pub schema_version: u32,
    pub kernel: Kernel<T>,
    pub length_sq: T,
    pub noise: T,
    pub jitter: T,
    pub y_offset: T,
    pub scaling: FeatureScaling<T>,
    pub log_likelihood: T,
    /// Log-likelihood at each optimizer start point.
    pub start_log_likelihoods: Vec<f64>,
    x: Vec<Vec<T>>,
    alpha: Vec<T>,
    chol: Cholesky<T>,
}

/// Kernel matrix pieces shared by fitting and prediction.
struct Problem<'a, T> {
    x: &'a [Vec<T>],
    y: Vec<T>,
    kernel: &'a Kernel<T>,
    jitter_rel: T,
}

struct Factored<T> {
    chol: Cholesky<T>,
    alpha: Vec<T>,
    jitter: T,
    log_likelihood: T,
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(ts: &'a TrainingSet<T>, kernel: &'a Kernel<T>, config: &GpConfig) -> (Self, T) {
        let n = T::from_usize_lossy(ts.len());
        let offset = if config.center_targets { ts.y.iter().copied().sum::<T>() / n } else { T::zero() };
        let y = ts.y.iter().map(|&v| v - offset).collect();
        (Self { x: &ts.x, y, kernel, jitter_rel: T::lit(config.jitter) }, offset)
    }

    fn kernel_matrix(&self, length_sq: T) -> DMatrix<T> {
        let n = self.x.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.kernel.eval(&self.x[i], &self.x[j], length_sq);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    fn factor(&self, length_sq: T, noise: T) -> Result<Factored<T>> {
        let mut c = self.kernel_matrix(length_sq);
        let n = self.x.len();
        let jitter = self.jitter_rel * c.trace() / T::from_usize_lossy(n);
        for i in 0..n {
            c[(i, i)] += noise + jitter;
        }
        let chol = c.cholesky()?;
        let alpha = chol.solve(&self.y);
        let two_pi = T::lit(2.0 * std::f64::consts::PI);
        let log_likelihood = -T::lit(0.5) * dot(&self.y, &alpha)
            - T::lit(0.5) * chol.log_det()
            - T::lit(0.5) * T::from_usize_lossy(n) * two_pi.ln();
        if !log_likelihood.is_finite() {
            return Err(Error::Optimization("non-finite log-likelihood".into()));
        }
        Ok(Factored { chol, alpha, jitter, log_likelihood })
    }

    /// Gradient of the log-likelihood in `(log l^2, log sigma^2)`, or only
    /// `log sigma^2` for kernels without a length scale.
    fn gradient(&self, f: &Factored<T>, length_sq: T, noise: T) -> Vec<T> {
        let n = self.x.len();
        let cinv = f.chol.inverse();
        let half = T::lit(0.5);
        let mut grad = Vec::with_capacity(2);
        if self.kernel.has_length_scale() {
            let mut quad = T::zero();
            let mut tr = T::zero();
            for i in 0..n {
                for j in 0..n {
                    let d = self.kernel.d_log_length_sq(&self.x[i], &self.x[j], length_sq);
                    quad += f.alpha[i] * d * f.alpha[j];
                    tr += cinv[(j, i)] * d;
                }
            }
            grad.push(half * (quad - tr));
        }
        grad.push(half * noise * (dot(&f.alpha, &f.alpha) - cinv.trace()));
        grad
    }
}

fn median_sq_dist<T: Real>(x: &[Vec<T>]) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..x.len() {
        for j in 0..i {
            d.push(sq_dist(&x[i], &x[j]).as_f64());
        }
    }
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

impl<T: Real> GpModel<T> {
    pub const SCHEMA_VERSION: u32 = 1;

    /// Maximum-likelihood fit by multi-start Nelder-Mead in log-hyperparameter space.
    pub fn train(ts: &TrainingSet<T>, kernel: Kernel<T>, config: &GpConfig) -> Result<Self> {
        if ts.len() < 2 {
            return Err(Error::InsufficientData(format!("{} training samples", ts.len())));
        }
        let (problem, _) = Problem::new(ts, &kernel, config);
        let n = T::from_usize_lossy(ts.len());
        let spread = (problem.y.iter().map(|&v| v * v).sum::<T>() / n).as_f64();
        let floor = config.noise_floor;
        let med = median_sq_dist(&ts.x);
        let with_length = kernel.has_length_scale();

        let noise_hi = (10.0 * spread).max(10.0 * floor).ln();
        let noise_lo = floor.ln();
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        if with_length {
            lower.push((med * 1e-4).ln());
            upper.push((med * 1e4).ln());
        }
        lower.push(noise_lo);
        upper.push(noise_hi);

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut starts = Vec::with_capacity(config.starts.max(1));
        let guess_noise = (0.1 * spread).max(floor).ln();
        starts.push(if with_length { vec![med.ln(), guess_noise] } else { vec![guess_noise] });
        let noise_start_lo = (spread * 1e-6).max(floor).ln();
        for _ in 1..config.starts.max(1) {
            let s = rng.gen_range(noise_start_lo..=noise_hi.max(noise_start_lo));
            if with_length {
                starts.push(vec![rng.gen_range((med * 1e-2).ln()..=(med * 1e2).ln()), s]);
            } else {
                starts.push(vec![s]);
            }
        }

        let unpack = |p: &[f64]| -> (T, T) {
            let (l, ls) = if with_length { (p[0].exp(), p[1]) } else { (1.0, p[0]) };
            // Land exactly on the floor rather than on exp(ln(floor)).
            let s = if ls <= noise_lo { floor } else { ls.exp().max(floor) };
            (T::lit(l), T::lit(s))
        };
        let objective = |p: &[f64]| -> f64 {
            let (l, s) = unpack(p);
            problem.factor(l, s).map_or(f64::INFINITY, |f| -f.log_likelihood.as_f64())
        };
        let runs: Vec<(Vec<f64>, f64, f64)> = starts
            .par_iter()
            .map(|s| {
                let at_start = -objective(s);
                let out = nelder_mead(&objective, s, 1.0, &lower, &upper, config.max_iter);
                (out.x, out.value, at_start)
            })
            .collect();
        let start_log_likelihoods = runs.iter().map(|r| r.2).collect();
        let best = runs
            .iter()
            .filter(|r| r.1.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Optimization("no start produced a positive definite kernel matrix".into()))?;
        let (length_sq, noise) = unpack(&best.0);
        let mut model = Self::with_hyperparameters(ts, kernel, length_sq, noise, config)?;
        model.start_log_likelihoods = start_log_likelihoods;
        Ok(model)
    }

    /// Conditions on the training data at fixed hyperparameters.
    pub fn with_hyperparameters(ts: &TrainingSet<T>, kernel: Kernel<T>, length_sq: T, noise: T, config: &GpConfig) -> Result<Self> {
        if !(length_sq > T::zero()) || !(noise >= T::zero()) {
            return Err(Error::InvalidInput(format!("hyperparameters l^2={length_sq}, sigma^2={noise}")));
        }
        let (problem, y_offset) = Problem::new(ts, &kernel, config);
        let f = problem.factor(length_sq, noise)?;
        Ok(Self {
            schema_version: Self::SCHEMA_VERSION,
            length_sq,
            noise,
            jitter: f.jitter,
            y_offset,
            scaling: ts.scaling.clone(),
            log_likelihood: f.log_likelihood,
            start_log_likelihoods: Vec::new(),
            x: ts.x.clone(),
            alpha: f.alpha,
            chol: f.chol,
            kernel,
        })
    }

    /// Log-likelihood and its gradient in log-hyperparameters at `(l^2, sigma^2)`.
    pub fn log_likelihood_with_gradient(
        ts: &TrainingSet<T>,
        kernel: &Kernel<T>,
        length_sq: T,
        noise: T,
        config: &GpConfig,
    ) -> Result<(T, Vec<T>)> {
        let (problem, _) = Problem::new(ts, kernel, config);
        let f = problem.factor(length_sq, noise)?;
        let g = problem.gradient(&f, length_sq, noise);
        Ok((f.log_likelihood, g))
    }

    pub fn n_train(&self) -> usize {
        self.x.len()
    }

    /// Prediction at an unscaled indicator vector.
    pub fn predict(&self, raw_x: &[T]) -> Result<NormalPrediction<T>> {
        Ok(self.predict_scaled(&self.scaling.apply(raw_x)?))
    }

    /// Prediction at an already-scaled input.
    pub fn predict_scaled(&self, z: &[T]) -> NormalPrediction<T> {
        let ks: Vec<T> = self.x.iter().map(|xi| self.kernel.eval(xi, z, self.length_sq)).collect();
        let mean = dot(&ks, &self.alpha) + self.y_offset;
        let v = self.chol.forward(&ks);
        let prior = self.kernel.eval(z, z, self.length_sq);
        NormalPrediction { mean, mean_variance: (prior - dot(&v, &v)).max(T::zero()), noise_variance: self.noise }
    }
}
