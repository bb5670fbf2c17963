//! Closed-form duals of the trust-region subproblems.
//!
//! Everything here works on the canonical minimization form
//!
//! ```text
//! min ĝᵀx  s.t.  b̂0ᵀx + c0 ≤ 0,  b̂1ᵀx + c1 ≤ 0,  ½xᵀHx ≤ δ
//! ```
//!
//! obtained from the policy-update problem by `ĝ = -g`, `b̂0 = -b0`, `b̂1 = b1`.

mod feasible;
mod kkt;
pub mod qp_oracle;
mod recovery;

pub use feasible::{boundary_step, solve_feasible, LAMBDA_MIN};
pub use kkt::{kkt_check, recovery_kkt, KktReport};
pub use recovery::{combine_recovery, recovery_from_canonical, solve_recovery};

use crate::error::{contract, Error, Result};
use crate::linalg::{dot, LinearOperator};
use crate::scalar::Scalar;
use crate::trust_region::{cg_solve, CgSettings, TrustRegionSubproblem};

/// Threshold below which `s_i` or `s0·s1 - t²` count as degenerate.
pub const DEGENERACY_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DualCase {
    BothActive,
    OnlyC0Active,
    OnlyC1Active,
    NoneActive,
    Recovery,
}

impl DualCase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BothActive => "both_active",
            Self::OnlyC0Active => "only_c0_active",
            Self::OnlyC1Active => "only_c1_active",
            Self::NoneActive => "none_active",
            Self::Recovery => "recovery",
        }
    }
}

impl std::fmt::Display for DualCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One linear constraint `b̂ᵀx + c ≤ 0` with its solve `H⁻¹b̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T> {
    pub bhat: Vec<T>,
    pub c: T,
    pub hinv_b: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct CanonicalSubproblem<T, O> {
    pub ghat: Vec<T>,
    pub hinv_g: Vec<T>,
    /// Slot 0 is the task-return constraint, slot 1 the cost constraint.
    pub constraints: [Option<LinearConstraint<T>>; 2],
    pub delta: T,
    pub hvp: O,
    pub q: T,
    pub r0: T,
    pub r1: T,
    pub s0: T,
    pub s1: T,
    pub t: T,
}

impl<T: Scalar, O: LinearOperator<T>> CanonicalSubproblem<T, O> {
    /// Builds the canonical problem directly from canonical data, running one CG
    /// solve per vector.
    pub fn new(
        ghat: Vec<T>,
        constraints: [Option<(Vec<T>, T)>; 2],
        delta: T,
        hvp: O,
        cg: CgSettings,
    ) -> Result<Self> {
        let n = ghat.len();
        if hvp.dim() != n {
            return Err(contract("operator dimension differs from gradient length"));
        }
        if !(delta > T::zero()) {
            return Err(contract("trust-region radius delta must be positive"));
        }
        let solve = |v: &[T]| -> Result<Vec<T>> {
            if v.len() != n {
                return Err(contract("constraint gradient length differs from objective gradient"));
            }
            Ok(cg_solve(&hvp, v, cg)?.x)
        };
        let hinv_g = solve(&ghat)?;
        let mut built: [Option<LinearConstraint<T>>; 2] = [None, None];
        for (slot, c) in built.iter_mut().zip(constraints) {
            if let Some((bhat, c)) = c {
                let hinv_b = solve(&bhat)?;
                *slot = Some(LinearConstraint { bhat, c, hinv_b });
            }
        }
        let q = dot(&ghat, &hinv_g);
        let (r0, s0) = built[0]
            .as_ref()
            .map_or((T::zero(), T::zero()), |k| (dot(&ghat, &k.hinv_b), dot(&k.bhat, &k.hinv_b)));
        let (r1, s1) = built[1]
            .as_ref()
            .map_or((T::zero(), T::zero()), |k| (dot(&ghat, &k.hinv_b), dot(&k.bhat, &k.hinv_b)));
        let t = match (&built[0], &built[1]) {
            (Some(a), Some(b)) => dot(&a.bhat, &b.hinv_b),
            _ => T::zero(),
        };
        let all = [q, r0, r1, s0, s1, t];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite dual scalars".into()));
        }
        Ok(Self { ghat, hinv_g, constraints: built, delta, hvp, q, r0, r1, s0, s1, t })
    }

    pub fn dim(&self) -> usize {
        self.ghat.len()
    }

    pub fn c(&self, slot: usize) -> T {
        self.constraints[slot].as_ref().map_or(T::neg_infinity(), |k| k.c)
    }

    /// Canonical problem with the two constraint slots exchanged.
    pub fn swapped(&self) -> Self
    where
        O: Clone,
    {
        let [a, b] = self.constraints.clone();
        Self {
            constraints: [b, a],
            r0: self.r1,
            r1: self.r0,
            s0: self.s1,
            s1: self.s0,
            hvp: self.hvp.clone(),
            ghat: self.ghat.clone(),
            hinv_g: self.hinv_g.clone(),
            ..*self
        }
    }
}

/// Maps the maximization problem onto the canonical minimization form.
pub fn canonicalize<T: Scalar, O: LinearOperator<T>>(
    sub: TrustRegionSubproblem<T, O>,
    cg: CgSettings,
) -> Result<CanonicalSubproblem<T, O>> {
    let ghat = sub.g.iter().map(|&v| -v).collect();
    let c0 = sub.b0.map(|b| (b.into_iter().map(|v| -v).collect(), sub.c0));
    let c1 = sub.b1.map(|b| (b, sub.c1));
    CanonicalSubproblem::new(ghat, [c0, c1], sub.delta, sub.hvp, cg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution<T> {
    pub case: DualCase,
    pub lambda: T,
    pub nu0: T,
    pub nu1: T,
    /// Recovery multiplier; zero for feasible-case solutions.
    pub phi: T,
    /// Constraint slot targeted by a recovery step.
    pub recovered: Option<usize>,
    /// The constraint cannot be satisfied inside the trust region even by the
    /// full recovery step.
    pub unrecoverable: bool,
    pub x: Vec<T>,
    /// Dual objective at the multipliers (equals `ĝᵀx` for feasible-case solutions
    /// under strong duality).
    pub dual_value: T,
}
