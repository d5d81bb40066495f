use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary classification of a mesh edge on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// `y = 1`, homogeneous Dirichlet (cooled to zero).
    DirichletTop,
    /// `y = 0`, unit inflow flux.
    NeumannBottom,
    /// `x = 0` and `x = 1`, adiabatic.
    AdiabaticSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Structured triangulation of the unit square split into a 3x3 grid of blocks.
///
/// Nodes are numbered row by row from the bottom (`id = j * (d + 1) + i`), so the
/// top (Dirichlet) row comes last and the free degrees of freedom are exactly the
/// first `d * (d + 1)` node ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangularMesh {
    pub divisions: usize,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Block id in `1..=9` per triangle, numbered left to right, bottom to top.
    pub blocks: Vec<u8>,
    pub boundary: Vec<BoundaryEdge>,
    /// Node id -> dof index, `None` on the Dirichlet boundary.
    pub dof_of_node: Vec<Option<usize>>,
    /// Dof index -> node id.
    pub node_of_dof: Vec<usize>,
}

impl TriangularMesh {
    /// Builds the mesh with `divisions` cells per side; each square cell is cut
    /// along its lower-left to upper-right diagonal.
    pub fn build(divisions: usize) -> Result<Self> {
        if divisions < 3 || divisions % 3 != 0 {
            return Err(Error::MeshAlignment(divisions));
        }
        let d = divisions;
        let h = 1.0 / d as f64;
        let id = |i: usize, j: usize| j * (d + 1) + i;
        let mut nodes = Vec::with_capacity((d + 1) * (d + 1));
        for j in 0..=d {
            for i in 0..=d {
                nodes.push([i as f64 * h, j as f64 * h]);
            }
        }
        let per_block = d / 3;
        let mut triangles = Vec::with_capacity(2 * d * d);
        let mut blocks = Vec::with_capacity(2 * d * d);
        for j in 0..d {
            for i in 0..d {
                let block = (1 + i / per_block + 3 * (j / per_block)) as u8;
                let (a, b, c, e) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, e]);
                blocks.push(block);
                blocks.push(block);
            }
        }
        let mut boundary = Vec::with_capacity(4 * d);
        for i in 0..d {
            boundary.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], tag: BoundaryTag::NeumannBottom });
            boundary.push(BoundaryEdge { nodes: [id(i, d), id(i + 1, d)], tag: BoundaryTag::DirichletTop });
        }
        for j in 0..d {
            boundary.push(BoundaryEdge { nodes: [id(0, j), id(0, j + 1)], tag: BoundaryTag::AdiabaticSide });
            boundary.push(BoundaryEdge { nodes: [id(d, j), id(d, j + 1)], tag: BoundaryTag::AdiabaticSide });
        }
        let mut dof_of_node = vec![None; nodes.len()];
        let mut node_of_dof = Vec::with_capacity(d * (d + 1));
        for (k, p) in nodes.iter().enumerate() {
            if p[1] < 1.0 - 0.5 * h {
                dof_of_node[k] = Some(node_of_dof.len());
                node_of_dof.push(k);
            }
        }
        Ok(Self { divisions, nodes, triangles, blocks, boundary, dof_of_node, node_of_dof })
    }

    pub fn n_dofs(&self) -> usize {
        self.node_of_dof.len()
    }

    /// Node nearest to `(x, y)`; ties resolve to the lowest id.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, p) in self.nodes.iter().enumerate() {
            let d2 = (p[0] - x).powi(2) + (p[1] - y).powi(2);
            if d2 < best.0 {
                best = (d2, k);
            }
        }
        best.1
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }
}
