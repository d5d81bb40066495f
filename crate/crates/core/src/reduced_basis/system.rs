use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{refine, DMatrix, SkylineCholesky};
use crate::scalar::{dot, Real};
use crate::thermal::{AffineOperator, InputPoint};

use super::basis::{k_orthonormalize, ReducedBasis};
use super::NEGATIVE_ROUNDOFF;

/// Inner product in which residual norms are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    /// Dual norm `sqrt(r^T K^{-1} r)`.
    Riesz,
    /// Plain `||r||_2`.
    Euclid,
}

/// Parameter-independent blocks of `||b - A(mu) V c||^2` in a fixed inner
/// product `W`: `aa[q * Q + q'] = (A^q V)^T W (A^q' V)`, `ba[q] = (A^q V)^T W b`,
/// `bb = b^T W b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Gramians<T> {
    pub aa: Vec<DMatrix<T>>,
    pub ba: Vec<Vec<T>>,
    pub bb: T,
}

impl<T: Real> Gramians<T> {
    fn new(q: usize, bb: T) -> Self {
        Self { aa: (0..q * q).map(|_| DMatrix::zeros(0, 0)).collect(), ba: vec![Vec::new(); q], bb }
    }

    /// Squared residual norm; negative round-off beyond the relative
    /// allowance is reported as an error, smaller negatives clamp to zero.
    fn squared_norm(&self, mu: &[T], c: &[T]) -> Result<T> {
        let q = mu.len();
        let mut quad = T::zero();
        let mut quad_mag = T::zero();
        for i in 0..q {
            for j in 0..q {
                let t = mu[i] * mu[j] * self.aa[i * q + j].bilinear(c, c);
                quad += t;
                quad_mag += t.abs();
            }
        }
        let mut lin = T::zero();
        let mut lin_mag = T::zero();
        for (i, m) in mu.iter().enumerate() {
            let t = *m * dot(&self.ba[i], c);
            lin += t;
            lin_mag += t.abs();
        }
        let sq = quad - T::lit(2.0) * lin + self.bb;
        let scale = quad_mag + T::lit(2.0) * lin_mag + self.bb.abs();
        let allowance = T::lit(NEGATIVE_ROUNDOFF).max(T::epsilon() * T::lit(1e4)) * scale;
        if sq < -allowance {
            return Err(Error::NegativeNorm(sq.as_f64()));
        }
        Ok(sq.max(T::zero()))
    }
}

/// Galerkin projection of `A(mu) x = b` onto a `K`-orthonormal basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ProjectedSystem<T> {
    pub basis: ReducedBasis<T>,
    /// `V^T A^q V`
    pub reduced_components: Vec<DMatrix<T>>,
    /// `V^T b`
    pub reduced_rhs: Vec<T>,
    pub riesz: Gramians<T>,
    pub euclid: Gramians<T>,
}

impl<T: Real> ProjectedSystem<T> {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `V^T A(mu) V`
    pub fn reduced_matrix(&self, mu: &InputPoint<T>) -> DMatrix<T> {
        let p = self.dim();
        let mut a = DMatrix::zeros(p, p);
        for (m, aq) in mu.values().iter().zip(&self.reduced_components) {
            a.add_scaled(*m, aq);
        }
        a
    }

    /// Reduced coefficients `c(mu)`.
    pub fn solve(&self, mu: &InputPoint<T>) -> Result<Vec<T>> {
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        Ok(self.reduced_matrix(mu).cholesky()?.solve(&self.reduced_rhs))
    }

    /// `||b - A(mu) V c||` in the chosen inner product.
    pub fn residual_norm(&self, mu: &InputPoint<T>, coeffs: &[T], weighting: Weighting) -> Result<T> {
        if coeffs.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: coeffs.len() });
        }
        let g = match weighting {
            Weighting::Riesz => &self.riesz,
            Weighting::Euclid => &self.euclid,
        };
        Ok(g.squared_norm(mu.values(), coeffs)?.sqrt())
    }

    pub fn reconstruct(&self, coeffs: &[T]) -> Vec<T> {
        self.basis.reconstruct(coeffs)
    }
}

/// `K^{-1}` solves with one refinement step.
pub(crate) struct InnerProductSolver<'a, T> {
    op: &'a AffineOperator<T>,
    chol: SkylineCholesky<T>,
}

impl<'a, T: Real> InnerProductSolver<'a, T> {
    pub fn new(op: &'a AffineOperator<T>) -> Result<Self> {
        Ok(Self { op, chol: SkylineCholesky::factor(&op.inner_product)? })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = self.chol.solve(b);
        refine(&self.op.inner_product, b, &mut x, |r| self.chol.solve(r));
        x
    }
}

/// Grows a [`ProjectedSystem`] one basis vector at a time, updating only the
/// new row and column of every projected block.
pub(crate) struct SystemBuilder<'a, T> {
    op: &'a AffineOperator<T>,
    k: &'a InnerProductSolver<'a, T>,
    rhs: Vec<T>,
    k_rhs: Vec<T>,
    /// `[q][j] = A^q psi_j`
    av: Vec<Vec<Vec<T>>>,
    /// `[q][j] = K^{-1} A^q psi_j`
    zv: Vec<Vec<Vec<T>>>,
    system: ProjectedSystem<T>,
}

impl<'a, T: Real> SystemBuilder<'a, T> {
    pub fn new(op: &'a AffineOperator<T>, k: &'a InnerProductSolver<'a, T>, rhs: Vec<T>) -> Self {
        let q = op.n_components();
        let k_rhs = k.solve(&rhs);
        let riesz = Gramians::new(q, dot(&k_rhs, &rhs));
        let euclid = Gramians::new(q, dot(&rhs, &rhs));
        let system = ProjectedSystem {
            basis: ReducedBasis::empty(),
            reduced_components: (0..q).map(|_| DMatrix::zeros(0, 0)).collect(),
            reduced_rhs: Vec::new(),
            riesz,
            euclid,
        };
        Self { op, k, rhs, k_rhs, av: vec![Vec::new(); q], zv: vec![Vec::new(); q], system }
    }

    pub fn system(&self) -> &ProjectedSystem<T> {
        &self.system
    }

    pub fn into_system(self) -> ProjectedSystem<T> {
        self.system
    }

    /// Orthonormalizes `snapshot` against the current basis and appends it.
    /// Returns `false` when it is numerically dependent.
    pub fn try_add(&mut self, snapshot: Vec<T>, mu: InputPoint<T>) -> bool {
        let Some(psi) = k_orthonormalize(&self.op.inner_product, &self.system.basis.vectors, snapshot) else {
            return false;
        };
        self.push(psi, mu);
        true
    }

    fn push(&mut self, psi: Vec<T>, mu: InputPoint<T>) {
        let nq = self.op.n_components();
        let (ops, k) = (&self.op.components, self.k);
        let fresh: Vec<(Vec<T>, Vec<T>)> = ops
            .par_iter()
            .map(|a| {
                let w = a.matvec(&psi);
                let z = k.solve(&w);
                (w, z)
            })
            .collect();
        for (q, (w, z)) in fresh.into_iter().enumerate() {
            self.av[q].push(w);
            self.zv[q].push(z);
        }
        let p = self.system.basis.dim() + 1;
        let last = p - 1;
        self.system.basis.vectors.push(psi);
        self.system.basis.snapshot_inputs.push(mu);
        let basis = &self.system.basis.vectors;

        for (q, aq) in self.system.reduced_components.iter_mut().enumerate() {
            aq.grow_square();
            for i in 0..p {
                aq[(i, last)] = dot(&basis[i], &self.av[q][last]);
                aq[(last, i)] = dot(&basis[last], &self.av[q][i]);
            }
        }
        self.system.reduced_rhs.push(dot(&basis[last], &self.rhs));

        let (av, zv) = (&self.av, &self.zv);
        let updates: Vec<(Vec<T>, Vec<T>, Vec<T>, Vec<T>)> = (0..nq * nq)
            .into_par_iter()
            .map(|idx| {
                let (a, b) = (idx / nq, idx % nq);
                let mut r_col = Vec::with_capacity(p);
                let mut r_row = Vec::with_capacity(p);
                let mut e_col = Vec::with_capacity(p);
                let mut e_row = Vec::with_capacity(p);
                for i in 0..p {
                    r_col.push(dot(&zv[a][i], &av[b][last]));
                    r_row.push(dot(&zv[a][last], &av[b][i]));
                    e_col.push(dot(&av[a][i], &av[b][last]));
                    e_row.push(dot(&av[a][last], &av[b][i]));
                }
                (r_col, r_row, e_col, e_row)
            })
            .collect();
        for (idx, (r_col, r_row, e_col, e_row)) in updates.into_iter().enumerate() {
            let (gr, ge) = (&mut self.system.riesz.aa[idx], &mut self.system.euclid.aa[idx]);
            gr.grow_square();
            ge.grow_square();
            for i in 0..p {
                gr[(i, last)] = r_col[i];
                gr[(last, i)] = r_row[i];
                ge[(i, last)] = e_col[i];
                ge[(last, i)] = e_row[i];
            }
        }
        for q in 0..nq {
            self.system.riesz.ba[q].push(dot(&self.k_rhs, &self.av[q][last]));
            self.system.euclid.ba[q].push(dot(&self.rhs, &self.av[q][last]));
        }
    }
}

/// Builds the projected system for `A(mu) x = b` from given snapshots.
pub fn offline_project<T: Real>(
    op: &AffineOperator<T>,
    rhs: &[T],
    snapshots: Vec<Vec<T>>,
    inputs: Vec<InputPoint<T>>,
) -> Result<ProjectedSystem<T>> {
    if rhs.len() != op.n() {
        return Err(Error::Dimension { expected: op.n(), got: rhs.len() });
    }
    let k = InnerProductSolver::new(op)?;
    let mut builder = SystemBuilder::new(op, &k, rhs.to_vec());
    for (s, mu) in snapshots.into_iter().zip(inputs) {
        if s.len() != op.n() {
            return Err(Error::Dimension { expected: op.n(), got: s.len() });
        }
        builder.try_add(s, mu);
    }
    Ok(builder.into_system())
}
