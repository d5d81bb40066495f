use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::thermal::{AffineOperator, InputPoint};

use super::bounds::coercivity_lower_bound;
use super::system::{InnerProductSolver, ProjectedSystem, SystemBuilder, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedySettings {
    /// Stop once the largest energy bound over the candidates is at most this.
    pub tol: f64,
    pub max_dim: usize,
    /// Seeds the random choice of the first snapshot.
    pub seed: u64,
}

/// What happened during a greedy run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GreedyReport<T> {
    /// Candidate indices in the order they entered the basis.
    pub selected: Vec<usize>,
    /// Candidates whose snapshots were numerically dependent.
    pub skipped: Vec<usize>,
    /// Largest energy bound over all candidates after each addition.
    pub max_bound_history: Vec<T>,
    pub converged: bool,
}

/// Greedy basis for the primal problem `A(mu) u = f`.
pub fn greedy_build<T: Real>(
    op: &AffineOperator<T>,
    candidates: &[InputPoint<T>],
    settings: &GreedySettings,
) -> Result<(ProjectedSystem<T>, GreedyReport<T>)> {
    run(op, op.rhs.clone(), candidates, settings)
}

/// Greedy basis for the dual problem `A(mu) y = -g` of output `output_id`.
pub fn greedy_build_dual<T: Real>(
    op: &AffineOperator<T>,
    output_id: &str,
    candidates: &[InputPoint<T>],
    settings: &GreedySettings,
) -> Result<(ProjectedSystem<T>, GreedyReport<T>)> {
    let rhs = op.output(output_id)?.vector.iter().map(|&g| -g).collect();
    run(op, rhs, candidates, settings)
}

fn run<T: Real>(
    op: &AffineOperator<T>,
    rhs: Vec<T>,
    candidates: &[InputPoint<T>],
    settings: &GreedySettings,
) -> Result<(ProjectedSystem<T>, GreedyReport<T>)> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if !(settings.tol >= 0.0) {
        return Err(Error::InvalidInput(format!("greedy tolerance {}", settings.tol)));
    }
    for mu in candidates {
        op.check_input(mu)?;
    }
    let k = InnerProductSolver::new(op)?;
    let mut builder = SystemBuilder::new(op, &k, rhs.clone());
    let mut used = vec![false; candidates.len()];
    let mut report = GreedyReport { selected: Vec::new(), skipped: Vec::new(), max_bound_history: Vec::new(), converged: false };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut next = rng.gen_range(0..candidates.len());
    let tol = T::lit(settings.tol);

    while builder.system().dim() < settings.max_dim {
        used[next] = true;
        let mu = &candidates[next];
        let snapshot = op.solve_with_rhs(mu, &rhs)?;
        if builder.try_add(snapshot, mu.clone()) {
            report.selected.push(next);
        } else {
            report.skipped.push(next);
        }
        let system = builder.system();
        let bounds = candidates
            .par_iter()
            .map(|mu| energy_bound(system, mu))
            .collect::<Result<Vec<T>>>()?;
        let max = bounds.iter().copied().fold(T::zero(), T::max);
        if report.skipped.last() != Some(&next) {
            report.max_bound_history.push(max);
        }
        if max <= tol {
            report.converged = true;
            break;
        }
        let pick = bounds
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal));
        match pick {
            Some((i, _)) => next = i,
            None => break,
        }
    }
    let mut system = builder.into_system();
    system.basis.seed = Some(settings.seed);
    Ok((system, report))
}

fn energy_bound<T: Real>(system: &ProjectedSystem<T>, mu: &InputPoint<T>) -> Result<T> {
    let c = system.solve(mu)?;
    let r = system.residual_norm(mu, &c, Weighting::Riesz)?;
    Ok(r / coercivity_lower_bound(mu).sqrt())
}
