use super::{CanonicalSubproblem, DualCase, DualSolution, DEGENERACY_EPS};
use crate::error::{Error, Result};
use crate::linalg::LinearOperator;
use crate::scalar::Scalar;

/// Smallest admissible trust-region multiplier.
pub const LAMBDA_MIN: f64 = 1e-8;

/// Case function `f(λ) = α/λ + βλ + γ` with `ν0(λ) = (a0 λ + k0)`, `ν1(λ) = (a1 λ + k1)`.
#[derive(Debug, Clone, Copy)]
struct CaseFn<T> {
    case: DualCase,
    alpha: T,
    beta: T,
    gamma: T,
    nu0: (T, T),
    nu1: (T, T),
    lo: T,
    hi: T,
}

impl<T: Scalar> CaseFn<T> {
    fn value(&self, lambda: T) -> T {
        if lambda == T::zero() {
            return if self.alpha == T::zero() { self.gamma } else { T::neg_infinity() };
        }
        self.alpha / lambda + self.beta * lambda + self.gamma
    }

    fn nus(&self, lambda: T) -> (T, T) {
        let clip = |(a, k): (T, T)| (a * lambda + k).max(T::zero());
        (clip(self.nu0), clip(self.nu1))
    }

    /// Maximizer over `[lo, hi]`; `Err` when the case is unbounded above.
    fn maximize(&self) -> Result<Option<(T, T)>> {
        if self.lo > self.hi {
            return Ok(None);
        }
        let mut candidates = Vec::with_capacity(3);
        if self.alpha < T::zero() && self.beta < T::zero() {
            candidates.push((self.alpha / self.beta).sqrt().max(self.lo).min(self.hi));
        }
        if self.hi.is_finite() {
            candidates.push(self.hi);
        } else if self.beta > T::zero() {
            return Err(Error::InfeasibleSubproblem(format!(
                "{} dual unbounded: constraints cannot be met inside the trust region",
                self.case
            )));
        }
        if self.lo > T::zero() || self.alpha == T::zero() {
            candidates.push(self.lo);
        }
        Ok(candidates
            .into_iter()
            .map(|l| (l, self.value(l)))
            .filter(|(_, v)| v.is_finite())
            .fold(None, |best: Option<(T, T)>, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            }))
    }
}

/// Restricts `[lo, hi]` to `{λ : λ·a ≥ b}`.
fn restrict<T: Scalar>(lo: &mut T, hi: &mut T, a: T, b: T) {
    if a > T::zero() {
        *lo = lo.max(b / a);
    } else if a < T::zero() {
        *hi = hi.min(b / a);
    } else if b > T::zero() {
        *lo = T::infinity();
    }
}

fn case_functions<T: Scalar, O>(p: &CanonicalSubproblem<T, O>) -> Vec<CaseFn<T>> {
    let (q, r0, r1, s0, s1, t) = (p.q, p.r0, p.r1, p.s0, p.s1, p.t);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let eps = T::lit(DEGENERACY_EPS);
    let delta = p.delta;
    let zero = (T::zero(), T::zero());
    let mut out = Vec::with_capacity(4);

    // f4: no linear constraint active
    out.push(CaseFn {
        case: DualCase::NoneActive,
        alpha: -half * q,
        beta: -delta,
        gamma: T::zero(),
        nu0: zero,
        nu1: zero,
        lo: T::zero(),
        hi: T::infinity(),
    });

    // f2 / f3: one constraint active
    for (slot, case, r, s) in [(0, DualCase::OnlyC0Active, r0, s0), (1, DualCase::OnlyC1Active, r1, s1)] {
        let Some(k) = &p.constraints[slot] else { continue };
        if s <= eps {
            continue;
        }
        let c = k.c;
        let (mut lo, mut hi) = (T::zero(), T::infinity());
        restrict(&mut lo, &mut hi, c, r);
        let nu = (c / s, -r / s);
        out.push(CaseFn {
            case,
            alpha: (half * (r * r / s - q)).min(T::zero()),
            beta: half * (c * c / s - two * delta),
            gamma: -r * c / s,
            nu0: if slot == 0 { nu } else { zero },
            nu1: if slot == 1 { nu } else { zero },
            lo,
            hi,
        });
    }

    // f1: both active
    if let (Some(k0), Some(k1)) = (&p.constraints[0], &p.constraints[1]) {
        let d = s0 * s1 - t * t;
        if s0 > eps && s1 > eps && d > eps * (s0 * s1).max(T::one()) {
            let (c0, c1) = (k0.c, k1.c);
            let (mut lo, mut hi) = (T::zero(), T::infinity());
            restrict(&mut lo, &mut hi, s0 * c1 - t * c0, s0 * r1 - t * r0);
            restrict(&mut lo, &mut hi, s1 * c0 - t * c1, s1 * r0 - t * r1);
            out.push(CaseFn {
                case: DualCase::BothActive,
                alpha: (half * ((s1 * r0 * r0 + s0 * r1 * r1 - two * t * r0 * r1) / d - q)).min(T::zero()),
                beta: half * ((s1 * c0 * c0 + s0 * c1 * c1 - two * t * c0 * c1) / d - two * delta),
                gamma: (t * r1 * c0 + t * r0 * c1 - s1 * r0 * c0 - s0 * r1 * c1) / d,
                nu0: ((s1 * c0 - t * c1) / d, (t * r1 - s1 * r0) / d),
                nu1: ((s0 * c1 - t * c0) / d, (t * r0 - s0 * r1) / d),
                lo,
                hi,
            });
        }
    }
    out
}

/// Analytic solution of the feasible-case dual by maximizing each case function
/// over its admissible multiplier interval and keeping the best.
///
/// Returns [`Error::DegenerateDual`] when the optimal `λ*` falls below
/// [`LAMBDA_MIN`]; callers should fall back to [`boundary_step`].
pub fn solve_feasible<T: Scalar, O: LinearOperator<T>>(p: &CanonicalSubproblem<T, O>) -> Result<DualSolution<T>> {
    let mut best: Option<(CaseFn<T>, T, T)> = None;
    for f in case_functions(p) {
        if let Some((lambda, value)) = f.maximize()? {
            if best.as_ref().is_none_or(|b| value > b.2) {
                best = Some((f, lambda, value));
            }
        }
    }
    let Some((f, lambda, value)) = best else {
        return Err(Error::InfeasibleSubproblem("no admissible dual case".into()));
    };
    if !(lambda >= T::lit(LAMBDA_MIN)) {
        return Err(Error::DegenerateDual { lambda: lambda.to_f64_lossy() });
    }
    let (nu0, nu1) = f.nus(lambda);
    let x = feasible_step(p, lambda, nu0, nu1);
    Ok(DualSolution {
        case: f.case,
        lambda,
        nu0,
        nu1,
        phi: T::zero(),
        recovered: None,
        unrecoverable: false,
        x,
        dual_value: value,
    })
}

/// `x = -(1/λ) H⁻¹(ĝ + ν0 b̂0 + ν1 b̂1)`
fn feasible_step<T: Scalar, O>(p: &CanonicalSubproblem<T, O>, lambda: T, nu0: T, nu1: T) -> Vec<T> {
    let mut dir = p.hinv_g.clone();
    for (k, nu) in p.constraints.iter().zip([nu0, nu1]) {
        if let Some(k) = k {
            if nu != T::zero() {
                crate::linalg::axpy(nu, &k.hinv_b, &mut dir);
            }
        }
    }
    let s = -T::one() / lambda;
    dir.iter_mut().for_each(|v| *v *= s);
    dir
}

/// Plain trust-region step `-sqrt(2δ/q) H⁻¹ĝ` on the boundary, ignoring the
/// linear constraints.
pub fn boundary_step<T: Scalar, O>(p: &CanonicalSubproblem<T, O>) -> Vec<T> {
    if p.q <= T::zero() {
        return vec![T::zero(); p.ghat.len()];
    }
    let s = -(T::lit(2.0) * p.delta / p.q).sqrt();
    p.hinv_g.iter().map(|&v| s * v).collect()
}
