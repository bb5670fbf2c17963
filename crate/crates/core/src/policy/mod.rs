//! Differentiable stochastic policies over a flat parameter vector.

mod gaussian;
pub mod mlp;
mod softmax;

pub use gaussian::{GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use mlp::{Architecture, Layer};
pub use softmax::SoftmaxPolicy;

use crate::env::SimRng;
use crate::error::Result;
use crate::scalar::Scalar;

/// Flat parameters plus the descriptor needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<T> {
    pub kind: PolicyKind,
    pub theta: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyKind {
    /// Diagonal Gaussian: MLP mean followed by `action_dim` log-standard-deviations.
    Gaussian { arch: Architecture },
    /// Softmax over `actions` with logits linear in the observation features.
    Softmax { features: usize, actions: usize },
}

impl PolicyKind {
    pub fn param_count(&self) -> usize {
        match self {
            Self::Gaussian { arch } => arch.param_count() + arch.output_dim(),
            Self::Softmax { features, actions } => features * actions,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Gaussian { arch } => format!(
                "gaussian sizes={} activation=tanh",
                arch.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x")
            ),
            Self::Softmax { features, actions } => {
                format!("softmax features={features} actions={actions}")
            }
        }
    }

    /// Inverse of [`PolicyKind::describe`].
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || crate::error::Error::Config(format!("unrecognized policy descriptor `{text}`"));
        let mut words = text.split_whitespace();
        let family = words.next().ok_or_else(bad)?;
        let fields: std::collections::HashMap<&str, &str> = words.filter_map(|w| w.split_once('=')).collect();
        match family {
            "gaussian" => {
                let sizes = fields
                    .get("sizes")
                    .ok_or_else(bad)?
                    .split('x')
                    .map(|s| s.parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                if fields.get("activation").is_some_and(|a| *a != "tanh") {
                    return Err(bad());
                }
                Ok(Self::Gaussian { arch: Architecture::new(sizes)? })
            }
            "softmax" => {
                let get = |k: &str| fields.get(k).and_then(|v| v.parse::<usize>().ok()).ok_or_else(bad);
                Ok(Self::Softmax { features: get("features")?, actions: get("actions")? })
            }
            _ => Err(bad()),
        }
    }
}

pub trait Policy<T: Scalar>: Clone + Send + Sync {
    type Action: Clone + Send + Sync + std::fmt::Debug;

    fn params(&self) -> &[T];

    fn set_params(&mut self, theta: &[T]) -> Result<()>;

    fn param_count(&self) -> usize {
        self.params().len()
    }

    fn kind(&self) -> PolicyKind;

    fn obs_dim(&self) -> usize;

    /// Draws an action and returns it with its log-probability.
    fn sample(&self, obs: &[T], rng: &mut SimRng) -> Result<(Self::Action, T)>;

    /// Most likely action (mean or argmax).
    fn mode(&self, obs: &[T]) -> Result<Self::Action>;

    fn log_prob(&self, obs: &[T], action: &Self::Action) -> Result<T>;

    /// Adds `weight * ∇θ log π(action | obs)` to `out`.
    fn accumulate_grad_log_prob(
        &self,
        obs: &[T],
        action: &Self::Action,
        weight: T,
        out: &mut [T],
    ) -> Result<()>;

    fn grad_log_prob(&self, obs: &[T], action: &Self::Action) -> Result<Vec<T>> {
        let mut g = vec![T::zero(); self.param_count()];
        self.accumulate_grad_log_prob(obs, action, T::one(), &mut g)?;
        Ok(g)
    }

    fn entropy(&self, obs: &[T]) -> Result<T>;

    /// `KL(self(·|obs) ‖ old(·|obs))`
    fn kl(&self, old: &Self, obs: &[T]) -> Result<T>;

    /// Adds `weight * ∇θ KL(self ‖ old)` (gradient with respect to `self`) to `out`.
    fn accumulate_grad_kl(&self, old: &Self, obs: &[T], weight: T, out: &mut [T]) -> Result<()>;

    /// Adds `weight * (∇²θ KL(π_θ ‖ self)|θ=self) v` to `out`.
    fn accumulate_kl_hvp(&self, obs: &[T], v: &[T], weight: T, out: &mut [T]) -> Result<()>;

    fn to_params(&self) -> PolicyParams<T> {
        PolicyParams { kind: self.kind(), theta: self.params().to_vec() }
    }
}

/// Mean KL divergence `(1/|S|) Σ_s KL(new(·|s) ‖ old(·|s))`.
pub fn mean_kl<T: Scalar, P: Policy<T>>(new: &P, old: &P, observations: &[Vec<T>]) -> Result<T> {
    if observations.is_empty() {
        return Err(crate::error::contract("mean_kl needs at least one state"));
    }
    let mut total = T::zero();
    for obs in observations {
        total += new.kl(old, obs)?;
    }
    Ok(total / T::from_usize_lossy(observations.len()))
}

/// Gradient of [`mean_kl`] with respect to the parameters of `new`.
pub fn grad_mean_kl<T: Scalar, P: Policy<T>>(
    new: &P,
    old: &P,
    observations: &[Vec<T>],
) -> Result<Vec<T>> {
    if observations.is_empty() {
        return Err(crate::error::contract("mean_kl needs at least one state"));
    }
    let mut g = vec![T::zero(); new.param_count()];
    let w = T::one() / T::from_usize_lossy(observations.len());
    for obs in observations {
        new.accumulate_grad_kl(old, obs, w, &mut g)?;
    }
    Ok(g)
}
