//! Assembly of the local linear-quadratic subproblem around the current policy.

mod cg;

pub use cg::{cg_solve, CgSettings, CgSolution};

use crate::error::{contract, Result};
use crate::linalg::LinearOperator;
use crate::policy::Policy;
use crate::scalar::Scalar;

/// `(1/N) Σ_t ∇θ log π(a_t|s_t) · adv_t`
pub fn policy_gradient<T: Scalar, P: Policy<T>>(
    policy: &P,
    observations: &[Vec<T>],
    actions: &[P::Action],
    advantages: &[T],
) -> Result<Vec<T>> {
    let n = observations.len();
    if actions.len() != n || advantages.len() != n || n == 0 {
        return Err(contract("policy gradient needs equally many (nonzero) states, actions and advantages"));
    }
    let w = T::one() / T::from_usize_lossy(n);
    let mut g = vec![T::zero(); policy.param_count()];
    for ((obs, a), &adv) in observations.iter().zip(actions).zip(advantages) {
        if adv != T::zero() {
            policy.accumulate_grad_log_prob(obs, a, adv * w, &mut g)?;
        }
    }
    Ok(g)
}

/// Importance-weighted surrogate `(1/N) Σ_t exp(log π(a_t|s_t) - old_log_prob_t) · adv_t`.
pub fn surrogate<T: Scalar, P: Policy<T>>(
    policy: &P,
    observations: &[Vec<T>],
    actions: &[P::Action],
    old_log_probs: &[T],
    advantages: &[T],
) -> Result<T> {
    let n = observations.len();
    if actions.len() != n || advantages.len() != n || old_log_probs.len() != n || n == 0 {
        return Err(contract("surrogate inputs must share one nonzero length"));
    }
    let mut total = T::zero();
    for (((obs, a), &lp0), &adv) in observations.iter().zip(actions).zip(old_log_probs).zip(advantages) {
        total += (policy.log_prob(obs, a)? - lp0).exp() * adv;
    }
    Ok(total / T::from_usize_lossy(n))
}

/// `v ↦ (∇²θ D̄_KL) v + damping · v` at the policy's current parameters, averaged
/// over `states`.
pub struct KlHessian<'a, T, P> {
    pub policy: &'a P,
    pub states: &'a [Vec<T>],
    pub damping: T,
}

impl<'a, T: Scalar, P: Policy<T>> KlHessian<'a, T, P> {
    pub fn new(policy: &'a P, states: &'a [Vec<T>], damping: T) -> Result<Self> {
        if states.is_empty() {
            return Err(contract("KL Hessian needs at least one state"));
        }
        Ok(Self { policy, states, damping })
    }
}

impl<T: Scalar, P: Policy<T>> LinearOperator<T> for KlHessian<'_, T, P> {
    fn dim(&self) -> usize {
        self.policy.param_count()
    }

    fn apply_into(&self, v: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        let w = T::one() / T::from_usize_lossy(self.states.len());
        for s in self.states {
            self.policy
                .accumulate_kl_hvp(s, v, w, out)
                .expect("states were validated against the policy");
        }
        for (o, &vi) in out.iter_mut().zip(v) {
            *o += self.damping * vi;
        }
    }
}

/// One-shot `(H + damping·I) v`.
pub fn kl_hessian_vector_product<T: Scalar, P: Policy<T>>(
    policy: &P,
    states: &[Vec<T>],
    v: &[T],
    damping: T,
) -> Result<Vec<T>> {
    if v.len() != policy.param_count() {
        return Err(contract("direction length must equal parameter count"));
    }
    let mut out = vec![T::zero(); v.len()];
    let w = T::one() / T::from_usize_lossy(states.len().max(1));
    for s in states {
        policy.accumulate_kl_hvp(s, v, w, &mut out)?;
    }
    for (o, &vi) in out.iter_mut().zip(v) {
        *o += damping * vi;
    }
    Ok(out)
}

/// Local problem `max gᵀx` s.t. `c0 - b0ᵀx ≤ 0`, `c1 + b1ᵀx ≤ 0`, `½xᵀHx ≤ δ`.
/// An absent gradient removes its constraint.
#[derive(Debug, Clone)]
pub struct TrustRegionSubproblem<T, O> {
    pub g: Vec<T>,
    pub b0: Option<Vec<T>>,
    pub b1: Option<Vec<T>>,
    pub c0: T,
    pub c1: T,
    pub delta: T,
    pub hvp: O,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::seeded_rng;
    use crate::linalg::dot;
    use crate::policy::{mlp::uniform01, GaussianPolicy, SoftmaxPolicy};

    #[test]
    fn zero_advantages_give_zero_gradient() {
        let p = SoftmaxPolicy::<f64>::uniform(2, 3);
        let obs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = policy_gradient(&p, &obs, &[0, 2], &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_transition_gradient_is_scaled_score() {
        let p = GaussianPolicy::<f64>::new(2, 1, &[4], -0.3, &mut seeded_rng(2)).unwrap();
        let obs = vec![vec![0.5, -0.5]];
        let a = vec![vec![0.7]];
        let g = policy_gradient(&p, &obs, &a, &[1.0]).unwrap();
        assert_eq!(g, p.grad_log_prob(&obs[0], &a[0]).unwrap());
    }

    #[test]
    fn damping_is_additive_and_operator_symmetric() {
        let p = GaussianPolicy::<f64>::new(3, 2, &[6, 6], -0.5, &mut seeded_rng(7)).unwrap();
        let states: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.1, -0.2, 0.4]).collect();
        let mut rng = seeded_rng(8);
        let n = p.param_count();
        let u: Vec<f64> = (0..n).map(|_| uniform01(&mut rng) - 0.5).collect();
        let v: Vec<f64> = (0..n).map(|_| uniform01(&mut rng) - 0.5).collect();
        let plain = kl_hessian_vector_product(&p, &states, &v, 0.0).unwrap();
        let damped = kl_hessian_vector_product(&p, &states, &v, 0.1).unwrap();
        for i in 0..n {
            assert!((damped[i] - plain[i] - 0.1 * v[i]).abs() < 1e-15);
        }
        let op = KlHessian::new(&p, &states, 0.1).unwrap();
        let (uhv, vhu) = (dot(&u, &op.apply(&v)), dot(&v, &op.apply(&u)));
        assert!((uhv - vhu).abs() <= 1e-10 * uhv.abs().max(1.0));
        assert!(op.quad_form(&v) > 0.0);
        assert!(kl_hessian_vector_product(&p, &states, &vec![0.0; n], 0.0).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn surrogate_at_old_policy_is_mean_advantage() {
        let p = SoftmaxPolicy::<f64>::uniform(2, 2);
        let obs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let lp = vec![0.5f64.ln(); 2];
        let s = surrogate(&p, &obs, &[0, 1], &lp, &[1.0, 3.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }
}
