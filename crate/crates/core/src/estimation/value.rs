use rand::seq::SliceRandom;

use crate::env::SimRng;
use crate::error::{contract, Result};
use crate::policy::Architecture;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub steps: usize,
    pub minibatch: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { hidden: vec![32, 32], learning_rate: 3e-3, steps: 80, minibatch: 64 }
    }
}

/// Scalar MLP regressor `V(s) = scale * net(s)` trained with Adam on squared error.
///
/// `scale` is fixed at the first fit from the magnitude of the targets so the
/// network output stays of order one.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    arch: Architecture,
    theta: Vec<f64>,
    scale: Option<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub loss_before: f64,
    pub loss_after: f64,
    /// The fit increased the loss and was rolled back.
    pub reverted: bool,
}

impl ValueFunction {
    pub fn new(obs_dim: usize, hidden: &[usize], rng: &mut SimRng) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let arch = Architecture::new(sizes)?;
        // zero output layer: an all-zero reward stream yields exactly zero advantages
        let theta = arch.init(rng, 0.0);
        let p = theta.len();
        Ok(Self { arch, theta, scale: None, adam_m: vec![0.0; p], adam_v: vec![0.0; p], adam_t: 0 })
    }

    pub fn predict(&self, obs: &[f64]) -> Result<f64> {
        let out = self.arch.forward(&self.theta, obs)?;
        Ok(self.scale.unwrap_or(1.0) * out.output()[0])
    }

    pub fn predict_all(&self, observations: &[Vec<f64>]) -> Result<Vec<f64>> {
        observations.iter().map(|o| self.predict(o)).collect()
    }

    pub fn loss(&self, observations: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (o, &y) in observations.iter().zip(targets) {
            let e = self.predict(o)? - y;
            total += e * e;
        }
        Ok(total / observations.len().max(1) as f64)
    }

    /// Minibatch Adam on mean squared error; rolled back if the batch loss rises.
    pub fn fit(&mut self, observations: &[Vec<f64>], targets: &[f64], cfg: &FitConfig, rng: &mut SimRng) -> Result<FitReport> {
        if observations.len() != targets.len() || observations.is_empty() {
            return Err(contract("value fit needs equally many observations and targets"));
        }
        let loss_before = self.loss(observations, targets)?;
        let saved = self.clone();
        if self.scale.is_none() {
            let n = targets.len() as f64;
            let rms = (targets.iter().map(|y| y * y).sum::<f64>() / n).sqrt();
            self.scale = Some(rms.max(1.0));
        }
        let scale = self.scale.unwrap_or(1.0);

        let mut order: Vec<usize> = (0..observations.len()).collect();
        let mut cursor = order.len();
        let mb = cfg.minibatch.max(1).min(order.len());
        let mut grad = vec![0.0; self.theta.len()];
        for _ in 0..cfg.steps {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for _ in 0..mb {
                if cursor == order.len() {
                    order.shuffle(rng);
                    cursor = 0;
                }
                let i = order[cursor];
                cursor += 1;
                let trace = self.arch.forward(&self.theta, &observations[i])?;
                let err = trace.output()[0] - targets[i] / scale;
                self.arch.backward(&self.theta, &trace, &[err], 2.0 / mb as f64, &mut grad);
            }
            self.adam_step(&grad, cfg.learning_rate);
        }

        let loss_after = self.loss(observations, targets)?;
        if !(loss_after <= loss_before) {
            *self = saved;
            return Ok(FitReport { loss_before, loss_after: loss_before, reverted: true });
        }
        Ok(FitReport { loss_before, loss_after, reverted: false })
    }

    fn adam_step(&mut self, grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.adam_t += 1;
        let c1 = 1.0 - B1.powi(self.adam_t);
        let c2 = 1.0 - B2.powi(self.adam_t);
        for (((w, m), v), &g) in self.theta.iter_mut().zip(&mut self.adam_m).zip(&mut self.adam_v).zip(grad) {
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
        }
    }
}
