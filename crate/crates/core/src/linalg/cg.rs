use crate::scalar::{axpy, dot, norm2, Real};

use super::CsrMatrix;

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for SPD systems.
pub fn conjugate_gradient<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    rtol: T,
    max_iter: usize,
) -> CgOutcome<T> {
    let n = b.len();
    let diag_inv: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();
    let mut x = x0.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); n]);
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        return CgOutcome { x: vec![T::zero(); n], iterations: 0, relative_residual: 0.0, converged: true };
    }
    let ax = a.matvec(&x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let mut z: Vec<T> = r.iter().zip(&diag_inv).map(|(&ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = norm2(&r) / bnorm;
    let mut it = 0;
    while it < max_iter && rel > rtol {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        for ((zi, &ri), &d) in z.iter_mut().zip(&r).zip(&diag_inv) {
            *zi = ri * d;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rel = norm2(&r) / bnorm;
        it += 1;
    }
    CgOutcome { x, iterations: it, relative_residual: rel.as_f64(), converged: rel <= rtol }
}
