use rand_distr::{Distribution, StandardNormal};

use super::mlp::Architecture;
use super::{Policy, PolicyKind};
use crate::env::SimRng;
use crate::error::{contract, Result};
use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Diagonal Gaussian whose mean is an MLP of the observation and whose
/// log-standard-deviations are free, state-independent parameters.
///
/// Layout of `theta`: MLP parameters, then one log-std per action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy<T> {
    arch: Architecture,
    theta: Vec<T>,
}

impl<T: Scalar> GaussianPolicy<T> {
    /// `hidden` lists the hidden layer widths (tanh); the mean head is linear.
    pub fn new(obs_dim: usize, action_dim: usize, hidden: &[usize], init_log_std: f64, rng: &mut SimRng) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let arch = Architecture::new(sizes)?;
        let mut theta = arch.init::<T>(rng, 0.01);
        theta.extend(std::iter::repeat_n(T::lit(init_log_std), action_dim));
        Ok(Self { arch, theta })
    }

    pub fn from_params(arch: Architecture, theta: Vec<T>) -> Result<Self> {
        if theta.len() != arch.param_count() + arch.output_dim() {
            return Err(contract(format!(
                "gaussian policy expects {} parameters, got {}",
                arch.param_count() + arch.output_dim(),
                theta.len()
            )));
        }
        Ok(Self { arch, theta })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn action_dim(&self) -> usize {
        self.arch.output_dim()
    }

    fn net_len(&self) -> usize {
        self.arch.param_count()
    }

    fn raw_log_std(&self) -> &[T] {
        &self.theta[self.net_len()..]
    }

    /// Log-stds clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub fn log_std(&self) -> Vec<T> {
        self.raw_log_std()
            .iter()
            .map(|&l| l.max(T::lit(LOG_STD_MIN)).min(T::lit(LOG_STD_MAX)))
            .collect()
    }

    fn log_std_free(&self, j: usize) -> bool {
        let l = self.raw_log_std()[j];
        l > T::lit(LOG_STD_MIN) && l < T::lit(LOG_STD_MAX)
    }

    pub fn mean(&self, obs: &[T]) -> Result<Vec<T>> {
        Ok(self.arch.forward(&self.theta[..self.net_len()], obs)?.output().to_vec())
    }

    fn check_action(&self, action: &[T]) -> Result<()> {
        if action.len() != self.action_dim() {
            return Err(contract(format!(
                "expected action of dimension {}, got {}",
                self.action_dim(),
                action.len()
            )));
        }
        Ok(())
    }

    fn density(mean: &[T], log_std: &[T], action: &[T]) -> T {
        let half_ln_2pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        mean.iter()
            .zip(log_std)
            .zip(action)
            .map(|((&m, &l), &a)| {
                let z = (a - m) / l.exp();
                -T::lit(0.5) * z * z - l - half_ln_2pi
            })
            .sum()
    }
}

impl<T: Scalar> Policy<T> for GaussianPolicy<T> {
    type Action = Vec<T>;

    fn params(&self) -> &[T] {
        &self.theta
    }

    fn set_params(&mut self, theta: &[T]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(contract("parameter vector length mismatch"));
        }
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    fn kind(&self) -> PolicyKind {
        PolicyKind::Gaussian { arch: self.arch.clone() }
    }

    fn obs_dim(&self) -> usize {
        self.arch.input_dim()
    }

    fn sample(&self, obs: &[T], rng: &mut SimRng) -> Result<(Vec<T>, T)> {
        let mean = self.mean(obs)?;
        let log_std = self.log_std();
        let action: Vec<T> = mean
            .iter()
            .zip(&log_std)
            .map(|(&m, &l)| {
                let z: f64 = StandardNormal.sample(rng);
                m + l.exp() * T::lit(z)
            })
            .collect();
        let lp = Self::density(&mean, &log_std, &action);
        Ok((action, lp))
    }

    fn mode(&self, obs: &[T]) -> Result<Vec<T>> {
        self.mean(obs)
    }

    fn log_prob(&self, obs: &[T], action: &Vec<T>) -> Result<T> {
        self.check_action(action)?;
        Ok(Self::density(&self.mean(obs)?, &self.log_std(), action))
    }

    fn accumulate_grad_log_prob(&self, obs: &[T], action: &Vec<T>, weight: T, out: &mut [T]) -> Result<()> {
        self.check_action(action)?;
        let n = self.net_len();
        let trace = self.arch.forward(&self.theta[..n], obs)?;
        let log_std = self.log_std();
        let mean = trace.output();
        let mut d_mean = Vec::with_capacity(mean.len());
        for (j, ((&m, &l), &a)) in mean.iter().zip(&log_std).zip(action).enumerate() {
            let var = (l + l).exp();
            d_mean.push((a - m) / var);
            if self.log_std_free(j) {
                out[n + j] += weight * ((a - m) * (a - m) / var - T::one());
            }
        }
        self.arch.backward(&self.theta[..n], &trace, &d_mean, weight, &mut out[..n]);
        Ok(())
    }

    fn entropy(&self, obs: &[T]) -> Result<T> {
        if obs.len() != self.obs_dim() {
            return Err(contract("observation dimension mismatch"));
        }
        let c = T::lit(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());
        Ok(self.log_std().into_iter().map(|l| l + c).sum())
    }

    fn kl(&self, old: &Self, obs: &[T]) -> Result<T> {
        let (m1, l1) = (self.mean(obs)?, self.log_std());
        let (m0, l0) = (old.mean(obs)?, old.log_std());
        let half = T::lit(0.5);
        Ok((0..m1.len())
            .map(|j| {
                let var0 = (l0[j] + l0[j]).exp();
                let var1 = (l1[j] + l1[j]).exp();
                let dm = m1[j] - m0[j];
                l0[j] - l1[j] + (var1 + dm * dm) / (var0 + var0) - half
            })
            .sum())
    }

    fn accumulate_grad_kl(&self, old: &Self, obs: &[T], weight: T, out: &mut [T]) -> Result<()> {
        let n = self.net_len();
        let trace = self.arch.forward(&self.theta[..n], obs)?;
        let m0 = old.mean(obs)?;
        let (l1, l0) = (self.log_std(), old.log_std());
        let mut d_mean = Vec::with_capacity(m0.len());
        for j in 0..m0.len() {
            let var0 = (l0[j] + l0[j]).exp();
            d_mean.push((trace.output()[j] - m0[j]) / var0);
            if self.log_std_free(j) {
                out[n + j] += weight * ((l1[j] + l1[j]).exp() / var0 - T::one());
            }
        }
        self.arch.backward(&self.theta[..n], &trace, &d_mean, weight, &mut out[..n]);
        Ok(())
    }

    fn accumulate_kl_hvp(&self, obs: &[T], v: &[T], weight: T, out: &mut [T]) -> Result<()> {
        if v.len() != self.theta.len() {
            return Err(contract("direction length must equal parameter count"));
        }
        let n = self.net_len();
        let trace = self.arch.forward(&self.theta[..n], obs)?;
        // At θ = θ_old the KL Hessian is Jᵀ diag(1/σ²) J for the mean block and 2·I for
        // the log-std block; network curvature terms vanish with (μ - μ_old).
        let jv = self.arch.jvp(&self.theta[..n], &trace, &v[..n]);
        let log_std = self.log_std();
        let scaled: Vec<T> = jv
            .iter()
            .zip(&log_std)
            .map(|(&d, &l)| d / (l + l).exp())
            .collect();
        self.arch.backward(&self.theta[..n], &trace, &scaled, weight, &mut out[..n]);
        for j in 0..log_std.len() {
            if self.log_std_free(j) {
                out[n + j] += weight * T::lit(2.0) * v[n + j];
            }
        }
        Ok(())
    }
}
