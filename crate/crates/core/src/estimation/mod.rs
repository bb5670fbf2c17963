//! Rollout collection, returns, advantages and value baselines.

mod advantage;
mod batch;
mod value;

pub use advantage::{discounted_return, gae_advantages, normalize};
pub use batch::{
    collect, collect_workers, constraint_surpluses, constraint_surpluses_with, EpisodeRecord,
    ReturnKind, StreamTotals, TrajectoryBatch,
};
pub use value::{FitConfig, FitReport, ValueFunction};

use crate::error::Result;

/// GAE for one stream of `batch`, with values from `v`.
pub fn stream_advantages<A>(
    batch: &TrajectoryBatch<A>,
    rewards: &[f64],
    v: &ValueFunction,
    lam: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let values = v.predict_all(&batch.observations)?;
    let mut next_values = vec![0.0; batch.len()];
    for t in 0..batch.len() {
        next_values[t] = if batch.dones[t] {
            0.0
        } else if let Some(obs) = &batch.bootstrap_observations[t] {
            v.predict(obs)?
        } else {
            values[t + 1]
        };
    }
    let adv = gae_advantages(rewards, &values, &next_values, &batch.dones, &batch.ends, batch.gamma, lam)?;
    Ok((adv, values))
}
