use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, LinearOperator};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// `‖H x - rhs‖ / ‖rhs‖` from the recursively updated residual.
    pub relative_residual: T,
    pub converged: bool,
}

/// Conjugate gradient for `H x = rhs` with `H` symmetric positive definite.
pub fn cg_solve<T: Scalar, O: LinearOperator<T>>(hvp: &O, rhs: &[T], settings: CgSettings) -> Result<CgSolution<T>> {
    let n = rhs.len();
    if hvp.dim() != n {
        return Err(crate::error::contract("operator and right-hand side dimensions differ"));
    }
    let rhs_norm = norm(rhs);
    if !rhs_norm.is_finite() {
        return Err(Error::Numerical("non-finite right-hand side".into()));
    }
    let mut x = vec![T::zero(); n];
    if rhs_norm == T::zero() {
        return Ok(CgSolution { x, iterations: 0, relative_residual: T::zero(), converged: true });
    }
    let tol = T::lit(settings.tol);
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut hp = vec![T::zero(); n];
    let mut iterations = 0;
    let mut rel = T::one();
    while iterations < settings.max_iters {
        hvp.apply_into(&p, &mut hp);
        let php = dot(&p, &hp);
        if !php.is_finite() || php <= T::zero() {
            return Err(Error::Numerical(format!(
                "conjugate gradient met non-positive curvature {php} at iteration {iterations}"
            )));
        }
        let alpha = rr / php;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &hp, &mut r);
        iterations += 1;
        let rr_next = dot(&r, &r);
        rel = rr_next.sqrt() / rhs_norm;
        if !rel.is_finite() {
            return Err(Error::Numerical("conjugate gradient diverged".into()));
        }
        if rel <= tol {
            break;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Ok(CgSolution { x, iterations, relative_residual: rel, converged: rel <= tol })
}
