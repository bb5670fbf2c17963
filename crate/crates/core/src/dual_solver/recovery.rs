use super::{CanonicalSubproblem, DualCase, DualSolution, DEGENERACY_EPS};
use crate::error::{contract, Error, Result};
use crate::linalg::{dot, LinearOperator};
use crate::scalar::Scalar;
use crate::trust_region::{cg_solve, CgSettings};

/// Step that maximally decreases the violated linear constraint `b̂ᵀx + c` inside
/// the trust region: `x = -(1/φ) H⁻¹b̂` with `φ = sqrt(b̂ᵀH⁻¹b̂ / 2δ)`.
///
/// `slot` only labels the solution and the error.
pub fn solve_recovery<T: Scalar, O: LinearOperator<T>>(
    bhat: &[T],
    c: T,
    hvp: &O,
    delta: T,
    slot: usize,
    cg: CgSettings,
) -> Result<DualSolution<T>> {
    if !(delta > T::zero()) {
        return Err(contract("trust-region radius delta must be positive"));
    }
    let hinv_b = cg_solve(hvp, bhat, cg)?.x;
    recovery_with_solve(bhat, &hinv_b, c, delta, slot)
}

/// Recovery step for constraint `slot` of a canonical problem, reusing its solves.
pub fn recovery_from_canonical<T: Scalar, O>(p: &CanonicalSubproblem<T, O>, slot: usize) -> Result<DualSolution<T>> {
    let k = p
        .constraints
        .get(slot)
        .and_then(Option::as_ref)
        .ok_or_else(|| contract(format!("constraint slot {slot} is absent")))?;
    recovery_with_solve(&k.bhat, &k.hinv_b, k.c, p.delta, slot)
}

fn recovery_with_solve<T: Scalar>(bhat: &[T], hinv_b: &[T], c: T, delta: T, slot: usize) -> Result<DualSolution<T>> {
    if !(c > T::zero()) {
        return Err(contract("recovery requires a violated constraint (c > 0)"));
    }
    let s = dot(bhat, hinv_b);
    if !(s > T::lit(DEGENERACY_EPS)) {
        return Err(Error::Irrecoverable { constraint: slot, surplus: c.to_f64_lossy() });
    }
    let two_delta = T::lit(2.0) * delta;
    let phi = (s / two_delta).sqrt();
    let x: Vec<T> = hinv_b.iter().map(|&v| -v / phi).collect();
    Ok(DualSolution {
        case: DualCase::Recovery,
        lambda: T::zero(),
        nu0: T::zero(),
        nu1: T::zero(),
        phi,
        recovered: Some(slot),
        unrecoverable: c - (two_delta * s).sqrt() > T::zero(),
        x,
        // -s/(2φ) + c - φδ
        dual_value: c - (two_delta * s).sqrt(),
    })
}

/// Sum of per-constraint recovery steps, shrunk onto the trust region if needed.
pub fn combine_recovery<T: Scalar, O: LinearOperator<T>>(solutions: &[DualSolution<T>], hvp: &O, delta: T) -> Vec<T> {
    let mut x = vec![T::zero(); hvp.dim()];
    for s in solutions {
        crate::linalg::axpy(T::one(), &s.x, &mut x);
    }
    let quad = T::lit(0.5) * hvp.quad_form(&x);
    if quad > delta {
        let shrink = (delta / quad).sqrt();
        x.iter_mut().for_each(|v| *v *= shrink);
    }
    x
}
