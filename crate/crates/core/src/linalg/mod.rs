//! Small self-contained linear algebra: dense row-major matrices with a
//! Cholesky factorization, CSR sparse matrices, an envelope (skyline)
//! sparse Cholesky and preconditioned conjugate gradients.

mod cg;
mod dense;
mod skyline;
mod sparse;

pub use cg::{conjugate_gradient, CgOutcome};
pub use dense::{Cholesky, DMatrix};
pub use skyline::SkylineCholesky;
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::scalar::{norm2, Real};

/// Relative tolerance for iterative fallbacks and post-solve residual checks.
pub const SOLVE_RTOL: f64 = 1e-10;

/// Solves the SPD system `a x = b`, using a direct envelope factorization and
/// falling back to Jacobi-preconditioned CG when the factorization breaks down.
pub fn solve_spd<T: Real>(a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    match SkylineCholesky::factor(a) {
        Ok(chol) => {
            let mut x = chol.solve(b);
            refine(a, b, &mut x, |r| chol.solve(r));
            Ok(x)
        }
        Err(Error::NotPositiveDefinite { .. }) => {
            let max_iter = 10 * a.n_rows().max(100);
            let out = conjugate_gradient(a, b, None, T::lit(SOLVE_RTOL), max_iter);
            if out.converged {
                Ok(out.x)
            } else {
                Err(Error::NoConvergence {
                    iterations: out.iterations,
                    residual: out.relative_residual,
                })
            }
        }
        Err(e) => Err(e),
    }
}

/// One step of iterative refinement when the residual exceeds the target.
pub(crate) fn refine<T: Real, F: Fn(&[T]) -> Vec<T>>(
    a: &CsrMatrix<T>,
    b: &[T],
    x: &mut [T],
    solve: F,
) {
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        return;
    }
    let mut r = a.matvec(x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    if norm2(&r) > T::lit(SOLVE_RTOL) * bnorm * T::lit(1e-2) {
        let dx = solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
}
