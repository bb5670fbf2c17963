use crate::error::{contract, Result};
use crate::scalar::Scalar;

/// `Σ_t γ^t r_t`
pub fn discounted_return<T: Scalar>(rewards: &[T], gamma: T) -> T {
    rewards.iter().rev().fold(T::zero(), |acc, &r| r + gamma * acc)
}

/// Generalized advantage estimates for one reward stream over a flat batch.
///
/// `next_values[t]` is the value of the state reached after step `t`; it is
/// ignored where `dones[t]` (terminal, no bootstrap). `ends[t]` marks the last
/// step of an episode segment, where the recursion restarts; a terminal step
/// must also be an end.
pub fn gae_advantages<T: Scalar>(
    rewards: &[T],
    values: &[T],
    next_values: &[T],
    dones: &[bool],
    ends: &[bool],
    gamma: T,
    lam: T,
) -> Result<Vec<T>> {
    let n = rewards.len();
    if [values.len(), next_values.len(), dones.len(), ends.len()] != [n; 4] {
        return Err(contract("gae inputs must share one length"));
    }
    let mut adv = vec![T::zero(); n];
    let mut running = T::zero();
    for t in (0..n).rev() {
        if ends[t] {
            running = T::zero();
        } else if dones[t] {
            return Err(contract("terminal step must end its episode"));
        }
        let bootstrap = if dones[t] { T::zero() } else { next_values[t] };
        let delta = rewards[t] + gamma * bootstrap - values[t];
        running = delta + gamma * lam * running;
        adv[t] = running;
    }
    Ok(adv)
}

/// Shifts and scales `x` to zero mean and unit (population) variance.
/// A constant input becomes all zeros.
pub fn normalize<T: Scalar>(x: &mut [T]) {
    if x.is_empty() {
        return;
    }
    let n = T::from_usize_lossy(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let std = var.sqrt();
    for v in x.iter_mut() {
        *v = if std > T::epsilon() { (*v - mean) / std } else { T::zero() };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discounted_sums() {
        assert!((discounted_return(&[1.0f64, 1.0, 1.0], 0.9) - 2.71).abs() < 1e-12);
        assert_eq!(discounted_return::<f64>(&[], 0.5), 0.0);
        assert_eq!(discounted_return(&[5.0], 0.99), 5.0);
    }

    #[test]
    fn zero_values_and_unit_lambda_give_reward_to_go() {
        let r = [1.0f64, 2.0, 3.0, 4.0];
        let z = [0.0; 4];
        let ends = [false, true, false, true];
        let dones = [false, true, false, false];
        let adv = gae_advantages(&r, &z, &z, &dones, &ends, 0.9, 1.0).unwrap();
        assert!((adv[0] - (1.0 + 0.9 * 2.0)).abs() < 1e-12);
        assert_eq!(adv[1], 2.0);
        assert!((adv[2] - (3.0 + 0.9 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_gives_td_errors() {
        let r = [1.0f64, -1.0, 0.5];
        let v = [0.3, 0.2, 0.9];
        let nv = [0.2, 0.9, 0.4];
        let dones = [false, false, false];
        let ends = [false, false, true];
        let adv = gae_advantages(&r, &v, &nv, &dones, &ends, 0.99, 0.0).unwrap();
        for t in 0..3 {
            assert!((adv[t] - (r[t] + 0.99 * nv[t] - v[t])).abs() < 1e-15);
        }
    }

    #[test]
    fn terminal_must_end_episode() {
        let z = [0.0; 2];
        assert!(gae_advantages(&z, &z, &z, &[true, false], &[false, true], 0.9, 0.9).is_err());
    }

    #[test]
    fn normalization_moments() {
        let mut x = vec![1.0, 2.0, 3.0, 10.0];
        normalize(&mut x);
        let mean: f64 = x.iter().sum::<f64>() / 4.0;
        let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
        let mut c = vec![2.0; 3];
        normalize(&mut c);
        assert_eq!(c, vec![0.0; 3]);
    }
}
