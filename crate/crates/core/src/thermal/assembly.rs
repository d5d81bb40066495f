use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_spd, CsrMatrix, SOLVE_RTOL};
use crate::scalar::{dot, norm2, Real};

use super::mesh::{BoundaryTag, TriangularMesh};
use super::params::{InputPoint, ParameterBox, N_BLOCKS};

/// Id of the compliant output functional (`g = f`).
pub const COMPLIANT_OUTPUT: &str = "compliant";

/// A linear output functional `s(u) = g^T u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OutputFunctional<T> {
    pub id: String,
    pub vector: Vec<T>,
    /// Mesh node for point evaluations.
    pub node: Option<usize>,
}

/// Which norm [`AffineOperator::norm`] measures.
#[derive(Debug, Clone, Copy)]
pub enum NormKind<'a, T> {
    /// `sqrt(v^T A(mu) v)`
    Energy(&'a InputPoint<T>),
    /// `sqrt(v^T K v)` with `K = A(1, ..., 1)`.
    X,
}

/// Parameter-separable discrete operator `A(mu) = sum_q mu_q A^q`, load `f`,
/// inner-product matrix `K` and registered output functionals.
///
/// All nine components share one sparsity pattern, so linear combinations
/// are entrywise sums over the value arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AffineOperator<T> {
    pub components: Vec<CsrMatrix<T>>,
    pub rhs: Vec<T>,
    pub inner_product: CsrMatrix<T>,
    pub outputs: Vec<OutputFunctional<T>>,
    pub parameter_box: ParameterBox,
    /// Mesh node id of each degree of freedom.
    pub node_of_dof: Vec<usize>,
}

impl<T: Real> AffineOperator<T> {
    /// Assembles the block stiffness components and the Neumann load.
    /// Registers the compliant output and point outputs `x1`, `x2` at the
    /// nodes nearest `(1/3, 1/3)` and `(2/3, 2/3)`.
    pub fn assemble(mesh: &TriangularMesh) -> Result<Self> {
        let n_nodes = mesh.nodes.len();
        let mut local = Vec::with_capacity(mesh.triangles.len());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            local.push((t, p1_stiffness(mesh, t, tri)?));
        }
        let mut components = Vec::with_capacity(N_BLOCKS);
        for q in 1..=N_BLOCKS as u8 {
            let mut trip = Vec::with_capacity(9 * local.len());
            for &(t, ke) in &local {
                let on = mesh.blocks[t] == q;
                let tri = mesh.triangles[t];
                for a in 0..3 {
                    for b in 0..3 {
                        let v = if on { T::lit(ke[a][b]) } else { T::zero() };
                        trip.push((tri[a], tri[b], v));
                    }
                }
            }
            let full = CsrMatrix::from_triplets(n_nodes, n_nodes, &trip)?;
            components.push(full.restrict(&mesh.node_of_dof)?);
        }
        let n = mesh.n_dofs();
        let mut rhs = vec![T::zero(); n];
        for e in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::NeumannBottom) {
            let [a, b] = e.nodes;
            let len = ((mesh.nodes[a][0] - mesh.nodes[b][0]).powi(2) + (mesh.nodes[a][1] - mesh.nodes[b][1]).powi(2)).sqrt();
            for v in [a, b] {
                if let Some(dof) = mesh.dof_of_node[v] {
                    rhs[dof] += T::lit(0.5 * len);
                }
            }
        }
        let ones = vec![T::one(); N_BLOCKS];
        let inner_product = CsrMatrix::linear_combination(&components, &ones)?;
        let mut op = Self {
            components,
            rhs: rhs.clone(),
            inner_product,
            outputs: vec![OutputFunctional { id: COMPLIANT_OUTPUT.into(), vector: rhs, node: None }],
            parameter_box: ParameterBox::default(),
            node_of_dof: mesh.node_of_dof.clone(),
        };
        for (id, (x, y)) in [("x1", (1.0 / 3.0, 1.0 / 3.0)), ("x2", (2.0 / 3.0, 2.0 / 3.0))] {
            op.register_point_output(mesh, id, mesh.nearest_node(x, y))?;
        }
        Ok(op)
    }

    pub fn with_parameter_box(mut self, b: ParameterBox) -> Self {
        self.parameter_box = b;
        self
    }

    /// Registers (or replaces) a point-evaluation output at a mesh node.
    pub fn register_point_output(&mut self, mesh: &TriangularMesh, id: &str, node: usize) -> Result<()> {
        let dof = mesh.dof_of_node.get(node).copied().flatten().ok_or(Error::DirichletNode(node))?;
        let mut vector = vec![T::zero(); self.n()];
        vector[dof] = T::one();
        self.outputs.retain(|o| o.id != id);
        self.outputs.push(OutputFunctional { id: id.into(), vector, node: Some(node) });
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.rhs.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn output(&self, id: &str) -> Result<&OutputFunctional<T>> {
        self.outputs.iter().find(|o| o.id == id).ok_or_else(|| Error::UnknownOutput(id.into()))
    }

    /// Ids of the non-compliant (point) outputs, in registration order.
    pub fn point_output_ids(&self) -> Vec<String> {
        self.outputs.iter().filter(|o| o.node.is_some()).map(|o| o.id.clone()).collect()
    }

    pub fn check_input(&self, mu: &InputPoint<T>) -> Result<()> {
        if mu.values().len() != self.n_components() {
            return Err(Error::Dimension { expected: self.n_components(), got: mu.values().len() });
        }
        if !self.parameter_box.contains(mu) {
            return Err(Error::InvalidInput(format!(
                "mu outside [{}, {}]^9",
                self.parameter_box.lower, self.parameter_box.upper
            )));
        }
        Ok(())
    }

    /// `A(mu) = sum_q mu_q A^q`
    pub fn assemble_full(&self, mu: &InputPoint<T>) -> Result<CsrMatrix<T>> {
        self.check_input(mu)?;
        CsrMatrix::linear_combination(&self.components, mu.values())
    }

    /// `A(mu) v` without forming `A(mu)`.
    pub fn apply(&self, mu: &InputPoint<T>, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n()];
        for (a, &m) in self.components.iter().zip(mu.values()) {
            for (o, x) in out.iter_mut().zip(a.matvec(v)) {
                *o += m * x;
            }
        }
        out
    }

    /// Residual `r(u; mu) = A(mu) u - f`.
    pub fn residual(&self, mu: &InputPoint<T>, u: &[T]) -> Vec<T> {
        let mut r = self.apply(mu, u);
        for (ri, &fi) in r.iter_mut().zip(&self.rhs) {
            *ri -= fi;
        }
        r
    }

    /// High-fidelity solve `A(mu) u = f`.
    pub fn solve(&self, mu: &InputPoint<T>) -> Result<Vec<T>> {
        self.solve_with_rhs(mu, &self.rhs)
    }

    /// `A(mu) x = b` with a residual check at the solver tolerance.
    pub fn solve_with_rhs(&self, mu: &InputPoint<T>, b: &[T]) -> Result<Vec<T>> {
        let a = self.assemble_full(mu)?;
        let x = solve_spd(&a, b)?;
        let mut r = a.matvec(&x);
        for (ri, &bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
        let bnorm = norm2(b);
        let rel = if bnorm > T::zero() { norm2(&r) / bnorm } else { norm2(&r) };
        // f32 cannot reach 1e-10; scale the target with machine precision.
        let target = T::lit(SOLVE_RTOL).max(T::epsilon() * T::lit(1e3));
        if !(rel <= target) {
            return Err(Error::NoConvergence { iterations: 1, residual: rel.as_f64() });
        }
        Ok(x)
    }

    /// Compliant output `f^T u`.
    pub fn compliant_output(&self, u: &[T]) -> T {
        dot(&self.rhs, u)
    }

    /// Temperature at mesh node `node`.
    pub fn point_output(&self, u: &[T], node: usize) -> Result<T> {
        let dof = self.node_of_dof.iter().position(|&k| k == node).ok_or(Error::DirichletNode(node))?;
        Ok(u[dof])
    }

    /// Evaluates a registered output functional.
    pub fn evaluate_output(&self, id: &str, u: &[T]) -> Result<T> {
        Ok(dot(&self.output(id)?.vector, u))
    }

    pub fn norm(&self, kind: NormKind<'_, T>, v: &[T]) -> Result<T> {
        let sq = match kind {
            NormKind::Energy(mu) => {
                self.check_input(mu)?;
                dot(v, &self.apply(mu, v))
            }
            NormKind::X => self.inner_product.quad_form(v),
        };
        let scale = dot(v, v) * T::epsilon() * T::lit(1e3);
        if sq < -scale {
            return Err(Error::NegativeNorm(sq.as_f64()));
        }
        Ok(sq.max(T::zero()).sqrt())
    }
}

/// Local P1 stiffness `|T| grad(phi_a) . grad(phi_b)`.
fn p1_stiffness(mesh: &TriangularMesh, t: usize, tri: &[usize; 3]) -> Result<[[f64; 3]; 3]> {
    let p = tri.map(|v| mesh.nodes[v]);
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    if det.abs() < 1e-14 {
        return Err(Error::DegenerateElement(t));
    }
    let area = 0.5 * det.abs();
    // gradients of barycentric coordinates
    let g = [
        [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
        [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
        [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
    ];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (TriangularMesh, AffineOperator<f64>) {
        let mesh = TriangularMesh::build(3).unwrap();
        let op = AffineOperator::assemble(&mesh).unwrap();
        (mesh, op)
    }

    #[test]
    fn components_symmetric_and_consistent() {
        let mesh = TriangularMesh::build(6).unwrap();
        let op = AffineOperator::<f64>::assemble(&mesh).unwrap();
        for a in &op.components {
            assert!(a.is_symmetric(1e-15));
        }
        // Before Dirichlet elimination the constant vector is in the kernel, so
        // rows of free nodes away from the Dirichlet row sum to zero.
        let ones = vec![1.0; op.n()];
        let k1 = op.inner_product.matvec(&ones);
        let d = mesh.divisions;
        for (dof, &node) in op.node_of_dof.iter().enumerate() {
            let j = node / (d + 1);
            if j + 1 < d {
                assert!(k1[dof].abs() < 1e-13, "row {dof} sums to {}", k1[dof]);
            }
        }
    }

    #[test]
    fn center_block_support() {
        let (mesh, op) = small();
        let a5 = &op.components[4];
        let mut support = vec![false; mesh.nodes.len()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if mesh.blocks[t] == 5 {
                for &v in tri {
                    support[v] = true;
                }
            }
        }
        for (i, j, v) in a5.triplets() {
            if v != 0.0 {
                assert!(support[op.node_of_dof[i]] && support[op.node_of_dof[j]]);
            }
        }
        assert!(a5.values().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn full_assembly_is_affine() {
        let (_, op) = small();
        let k = op.assemble_full(&InputPoint::uniform(1.0)).unwrap();
        assert_eq!(k, op.inner_product);
        let k2 = op.assemble_full(&InputPoint::uniform(2.0)).unwrap();
        for (a, b) in k2.values().iter().zip(op.inner_product.values()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn out_of_box_rejected() {
        let (_, op) = small();
        assert!(op.assemble_full(&InputPoint::uniform(20.0)).is_err());
        assert!(InputPoint::new(vec![1.0; 8]).is_err());
        assert!(InputPoint::new(vec![-1.0; 9]).is_err());
    }

    #[test]
    fn load_integrates_unit_flux() {
        let (_, op) = small();
        let total: f64 = op.rhs.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn point_outputs() {
        let (mesh, op) = small();
        let u = vec![0.0; op.n()];
        assert_eq!(op.point_output(&u, 5).unwrap(), 0.0);
        let mut e = vec![0.0; op.n()];
        e[5] = 1.0;
        assert_eq!(op.point_output(&e, op.node_of_dof[5]).unwrap(), 1.0);
        let top = mesh.nodes.len() - 1;
        assert!(matches!(op.point_output(&e, top), Err(Error::DirichletNode(_))));
        let x1 = op.output("x1").unwrap();
        assert_eq!(x1.node, Some(mesh.nearest_node(1.0 / 3.0, 1.0 / 3.0)));
        assert_eq!(op.evaluate_output("x1", &e).unwrap(), op.point_output(&e, x1.node.unwrap()).unwrap());
        let mut m2 = mesh.clone();
        m2.divisions = 3;
        let mut op2 = op.clone();
        assert!(op2.register_point_output(&m2, "bad", top).is_err());
    }

    #[test]
    fn norms_at_reference_coincide() {
        let (_, op) = small();
        let v: Vec<f64> = (0..op.n()).map(|i| (i as f64 * 0.37).cos()).collect();
        let one = InputPoint::uniform(1.0);
        let e = op.norm(NormKind::Energy(&one), &v).unwrap();
        let x = op.norm(NormKind::X, &v).unwrap();
        assert!((e - x).abs() < 1e-14);
        assert_eq!(op.norm(NormKind::X, &vec![0.0; op.n()]).unwrap(), 0.0);
    }
}
