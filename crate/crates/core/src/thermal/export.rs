use serde::{Deserialize, Serialize};

use super::assembly::AffineOperator;
use super::mesh::TriangularMesh;

/// JSON debugging container for the mesh and operator (coordinates and
/// sparse matrices as `(row, col, value)` triplets).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorExport {
    pub schema_version: u32,
    pub divisions: usize,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub blocks: Vec<u8>,
    pub n_dofs: usize,
    pub node_of_dof: Vec<usize>,
    pub components: Vec<Vec<(usize, usize, f64)>>,
    pub inner_product: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    pub outputs: Vec<(String, Option<usize>)>,
}

impl OperatorExport {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn new(mesh: &TriangularMesh, op: &AffineOperator<f64>) -> Self {
        let nz = |m: &crate::linalg::CsrMatrix<f64>| m.triplets().filter(|t| t.2 != 0.0).collect::<Vec<_>>();
        Self {
            schema_version: Self::SCHEMA_VERSION,
            divisions: mesh.divisions,
            nodes: mesh.nodes.clone(),
            triangles: mesh.triangles.clone(),
            blocks: mesh.blocks.clone(),
            n_dofs: op.n(),
            node_of_dof: op.node_of_dof.clone(),
            components: op.components.iter().map(nz).collect(),
            inner_product: nz(&op.inner_product),
            rhs: op.rhs.clone(),
            outputs: op.outputs.iter().map(|o| (o.id.clone(), o.node)).collect(),
        }
    }
}
