//! High-fidelity P1 finite-element model of the nine-block thermal problem.
//!
//! The conductivity is piecewise constant, `mu_q` on block `q`, so the
//! stiffness matrix is affine in the parameters: `A(mu) = sum_q mu_q A^q`.
//! The top edge is held at zero temperature, the bottom edge receives unit
//! flux and the vertical edges are adiabatic.

mod assembly;
mod export;
mod mesh;
mod params;

pub use assembly::{AffineOperator, NormKind, OutputFunctional, COMPLIANT_OUTPUT};
pub use export::OperatorExport;
pub use mesh::{BoundaryEdge, BoundaryTag, TriangularMesh};
pub use params::{InputPoint, ParameterBox, N_BLOCKS};
