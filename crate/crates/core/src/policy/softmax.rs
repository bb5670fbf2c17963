use super::mlp::uniform01;
use super::{Policy, PolicyKind};
use crate::env::SimRng;
use crate::error::{contract, Result};
use crate::scalar::Scalar;

/// Categorical policy with logits `W x`. With one-hot observations this is the
/// tabular softmax policy (`W[a][s]` is the logit of action `a` in state `s`).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy<T> {
    features: usize,
    actions: usize,
    /// Row-major `actions × features`.
    theta: Vec<T>,
}

impl<T: Scalar> SoftmaxPolicy<T> {
    pub fn uniform(features: usize, actions: usize) -> Self {
        Self { features, actions, theta: vec![T::zero(); features * actions] }
    }

    pub fn from_params(features: usize, actions: usize, theta: Vec<T>) -> Result<Self> {
        if theta.len() != features * actions {
            return Err(contract("softmax parameter count must be features * actions"));
        }
        Ok(Self { features, actions, theta })
    }

    /// Tabular policy from a `[state][action]` logit table.
    pub fn from_logit_table(table: &[Vec<T>]) -> Result<Self> {
        let features = table.len();
        let actions = table.first().map_or(0, Vec::len);
        let mut theta = vec![T::zero(); features * actions];
        for (s, row) in table.iter().enumerate() {
            if row.len() != actions {
                return Err(contract("ragged logit table"));
            }
            for (a, &z) in row.iter().enumerate() {
                theta[a * features + s] = z;
            }
        }
        Ok(Self { features, actions, theta })
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    fn logits(&self, obs: &[T]) -> Result<Vec<T>> {
        if obs.len() != self.features {
            return Err(contract(format!(
                "expected observation of dimension {}, got {}",
                self.features,
                obs.len()
            )));
        }
        Ok((0..self.actions)
            .map(|a| {
                self.theta[a * self.features..(a + 1) * self.features]
                    .iter()
                    .zip(obs)
                    .map(|(&w, &x)| w * x)
                    .sum()
            })
            .collect())
    }

    /// Log-probabilities of all actions.
    pub fn log_probs(&self, obs: &[T]) -> Result<Vec<T>> {
        let z = self.logits(obs)?;
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        Ok(z.into_iter().map(|v| v - lse).collect())
    }

    pub fn probs(&self, obs: &[T]) -> Result<Vec<T>> {
        Ok(self.log_probs(obs)?.into_iter().map(T::exp).collect())
    }

    /// Policy table `[state][action]` assuming one-hot observations.
    pub fn table(&self) -> Vec<Vec<T>> {
        (0..self.features)
            .map(|s| {
                let mut obs = vec![T::zero(); self.features];
                obs[s] = T::one();
                self.probs(&obs).expect("one-hot observation has the right size")
            })
            .collect()
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.actions {
            return Err(contract(format!("action {a} out of range 0..{}", self.actions)));
        }
        Ok(())
    }

    /// Adds `weight * d_logits ⊗ obs` to the parameter gradient.
    fn push_logit_grad(&self, obs: &[T], d_logits: &[T], weight: T, out: &mut [T]) {
        for (a, &d) in d_logits.iter().enumerate() {
            let row = &mut out[a * self.features..(a + 1) * self.features];
            for (g, &x) in row.iter_mut().zip(obs) {
                *g += weight * d * x;
            }
        }
    }
}

impl<T: Scalar> Policy<T> for SoftmaxPolicy<T> {
    type Action = usize;

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
        PolicyKind::Softmax { features: self.features, actions: self.actions }
    }

    fn obs_dim(&self) -> usize {
        self.features
    }

    fn sample(&self, obs: &[T], rng: &mut SimRng) -> Result<(usize, T)> {
        let lp = self.log_probs(obs)?;
        let u = uniform01(rng);
        let mut acc = 0.0;
        for (a, &l) in lp.iter().enumerate() {
            acc += l.exp().to_f64_lossy();
            if u < acc {
                return Ok((a, l));
            }
        }
        let last = self.actions - 1;
        Ok((last, lp[last]))
    }

    fn mode(&self, obs: &[T]) -> Result<usize> {
        let lp = self.log_probs(obs)?;
        Ok(lp
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |best, (a, &l)| if l > best.1 { (a, l) } else { best })
            .0)
    }

    fn log_prob(&self, obs: &[T], action: &usize) -> Result<T> {
        self.check_action(*action)?;
        Ok(self.log_probs(obs)?[*action])
    }

    fn accumulate_grad_log_prob(&self, obs: &[T], action: &usize, weight: T, out: &mut [T]) -> Result<()> {
        self.check_action(*action)?;
        let p = self.probs(obs)?;
        let d: Vec<T> = p
            .iter()
            .enumerate()
            .map(|(b, &pb)| if b == *action { T::one() - pb } else { -pb })
            .collect();
        self.push_logit_grad(obs, &d, weight, out);
        Ok(())
    }

    fn entropy(&self, obs: &[T]) -> Result<T> {
        let lp = self.log_probs(obs)?;
        Ok(-lp.iter().map(|&l| l.exp() * l).sum::<T>())
    }

    fn kl(&self, old: &Self, obs: &[T]) -> Result<T> {
        let (l1, l0) = (self.log_probs(obs)?, old.log_probs(obs)?);
        Ok(l1.iter().zip(&l0).map(|(&a, &b)| a.exp() * (a - b)).sum())
    }

    fn accumulate_grad_kl(&self, old: &Self, obs: &[T], weight: T, out: &mut [T]) -> Result<()> {
        let (l1, l0) = (self.log_probs(obs)?, old.log_probs(obs)?);
        let kl: T = l1.iter().zip(&l0).map(|(&a, &b)| a.exp() * (a - b)).sum();
        let d: Vec<T> = l1
            .iter()
            .zip(&l0)
            .map(|(&a, &b)| a.exp() * (a - b - kl))
            .collect();
        self.push_logit_grad(obs, &d, weight, out);
        Ok(())
    }

    fn accumulate_kl_hvp(&self, obs: &[T], v: &[T], weight: T, out: &mut [T]) -> Result<()> {
        if v.len() != self.theta.len() {
            return Err(contract("direction length must equal parameter count"));
        }
        let p = self.probs(obs)?;
        // logit tangent, then (diag p - p pᵀ) on logits
        let dz: Vec<T> = (0..self.actions)
            .map(|a| {
                v[a * self.features..(a + 1) * self.features]
                    .iter()
                    .zip(obs)
                    .map(|(&w, &x)| w * x)
                    .sum()
            })
            .collect();
        let mean: T = p.iter().zip(&dz).map(|(&pa, &d)| pa * d).sum();
        let h: Vec<T> = p.iter().zip(&dz).map(|(&pa, &d)| pa * (d - mean)).collect();
        self.push_logit_grad(obs, &h, weight, out);
        Ok(())
    }
}
