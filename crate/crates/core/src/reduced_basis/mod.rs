//! Reduced-basis construction and online evaluation.
//!
//! A [`ProjectedSystem`] is the Galerkin projection of `A(mu) x = b` onto a
//! `K`-orthonormal basis, together with the parameter-independent blocks
//! needed to evaluate residual norms online. The primal model uses `b = f`;
//! each dual model uses `b = -g` for an output vector `g`.

mod basis;
mod bounds;
mod greedy;
mod model;
mod system;

pub use basis::{k_orthonormalize, ReducedBasis};
pub use bounds::{coercivity_lower_bound, continuity_upper_bound, BoundSet};
pub use greedy::{greedy_build, greedy_build_dual, GreedyReport, GreedySettings};
pub use model::{DualEstimate, DualKey, DualModel, OutputProjection, ReducedModel, ReducedState};
pub use system::{offline_project, Gramians, ProjectedSystem, Weighting};

/// Relative round-off allowance below zero for squared residual norms.
pub const NEGATIVE_ROUNDOFF: f64 = 1e-12;
