use super::{CanonicalSubproblem, DualCase, DualSolution};
use crate::linalg::{dot, norm, LinearOperator};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport<T> {
    /// `‖ĝ + λHx + ν0 b̂0 + ν1 b̂1‖` (feasible) or `‖b̂ + φHx‖` (recovery).
    pub stationarity: T,
    /// Largest positive part of `b̂_iᵀx + c_i` and `½xᵀHx - δ`.
    pub primal: T,
    /// Largest of `|ν_i (b̂_iᵀx + c_i)|` and `|λ(½xᵀHx - δ)|`.
    pub complementary: T,
    /// `|½xᵀHx - δ|`
    pub boundary_gap: T,
}

impl<T: Scalar> KktReport<T> {
    pub fn max_residual(&self) -> T {
        self.stationarity.max(self.primal).max(self.complementary)
    }

    pub fn within(&self, tol: T) -> bool {
        self.max_residual() <= tol
    }
}

/// Residuals of a feasible-case or recovery solution of `p`.
pub fn kkt_check<T: Scalar, O: LinearOperator<T>>(p: &CanonicalSubproblem<T, O>, sol: &DualSolution<T>) -> KktReport<T> {
    let hx = p.hvp.apply(&sol.x);
    let half_quad = T::lit(0.5) * dot(&sol.x, &hx);
    let gap = half_quad - p.delta;
    if sol.case == DualCase::Recovery {
        let slot = sol.recovered.unwrap_or(0);
        let Some(k) = &p.constraints[slot] else {
            return recovery_kkt(&[], &hx, sol, gap);
        };
        return recovery_kkt(&k.bhat, &hx, sol, gap);
    }
    let mut station: Vec<T> = p.ghat.clone();
    crate::linalg::axpy(sol.lambda, &hx, &mut station);
    let mut primal = gap.max(T::zero());
    let mut comp = (sol.lambda * gap).abs();
    for (k, nu) in p.constraints.iter().zip([sol.nu0, sol.nu1]) {
        let Some(k) = k else { continue };
        crate::linalg::axpy(nu, &k.bhat, &mut station);
        let lin = dot(&k.bhat, &sol.x) + k.c;
        primal = primal.max(lin);
        comp = comp.max((nu * lin).abs());
    }
    KktReport { stationarity: norm(&station), primal, complementary: comp, boundary_gap: gap.abs() }
}

/// Residuals of a recovery step for `b̂` given `H x` and `½xᵀHx - δ`.
pub fn recovery_kkt<T: Scalar>(bhat: &[T], hx: &[T], sol: &DualSolution<T>, gap: T) -> KktReport<T> {
    let station: Vec<T> = if bhat.is_empty() {
        hx.iter().map(|&h| sol.phi * h).collect()
    } else {
        bhat.iter().zip(hx).map(|(&b, &h)| b + sol.phi * h).collect()
    };
    KktReport {
        stationarity: norm(&station),
        primal: gap.max(T::zero()),
        complementary: (sol.phi * gap).abs(),
        boundary_gap: gap.abs(),
    }
}
