//! Constrained MDP environments.
//!
//! Every environment emits three signal streams per transition: the agent's
//! task reward `R_A`, one or more safety costs `C_i`, and the user's surrogate
//! reward `u_H`. Limits are stored as `[d0, d1, ..., dk]` where `d0` bounds the
//! task return from below and `d_i` (i ≥ 1) bounds cost returns from above.

mod button;
mod hazard;
mod tabular;

pub use button::{ButtonNav, ButtonNavConfig, Gremlin};
pub use hazard::{HazardNav, HazardNavConfig};
pub use tabular::{exact_policy_returns, ExactReturns, TabularCmdp};

use std::fmt::Debug;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Result};

/// Random stream used for every stochastic choice in the simulator stack.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Derives an independent stream for a worker or a sub-task.
pub fn derive_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    /// Box `[low, high]^dim`; out-of-range actions are clipped by the environment.
    Continuous { dim: usize, low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmdpSpec {
    pub state_dim: usize,
    pub action_space: ActionSpace,
    pub gamma: f64,
    pub horizon: usize,
    pub cost_streams: usize,
    /// `[d0, d1, ..., dk]`
    pub limits: Vec<f64>,
}

impl CmdpSpec {
    pub fn new(
        state_dim: usize,
        action_space: ActionSpace,
        gamma: f64,
        horizon: usize,
        limits: Vec<f64>,
    ) -> Result<Self> {
        if state_dim == 0 {
            return Err(contract("state_dim must be positive"));
        }
        match action_space {
            ActionSpace::Discrete(0) => return Err(contract("action count must be positive")),
            ActionSpace::Continuous { dim: 0, .. } => {
                return Err(contract("action dimension must be positive"))
            }
            ActionSpace::Continuous { low, high, .. } if !(low < high) => {
                return Err(contract("action bounds must satisfy low < high"))
            }
            _ => {}
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(contract(format!("gamma must lie in (0,1), got {gamma}")));
        }
        if horizon == 0 {
            return Err(contract("horizon must be positive"));
        }
        if limits.is_empty() {
            return Err(contract("limit list must contain at least d0"));
        }
        Ok(Self {
            state_dim,
            action_space,
            gamma,
            horizon,
            cost_streams: limits.len() - 1,
            limits,
        })
    }

    pub fn d0(&self) -> f64 {
        self.limits[0]
    }

    /// Limit of cost stream `i` (1-based, matching `C_i`).
    pub fn cost_limit(&self, i: usize) -> f64 {
        self.limits[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S, A> {
    pub state: S,
    pub action: A,
    pub next_state: S,
    pub reward_a: f64,
    pub costs: Vec<f64>,
    pub reward_u: f64,
    /// Terminal: the episode ended inside the MDP (no bootstrapping).
    pub done: bool,
}

pub trait Environment: Send + Sync {
    type State: Clone + Debug + Send + Sync;
    type Action: Clone + Debug + Send + Sync;

    fn spec(&self) -> &CmdpSpec;

    fn reset(&self, rng: &mut SimRng) -> Self::State;

    fn step(
        &self,
        state: &Self::State,
        action: &Self::Action,
        rng: &mut SimRng,
    ) -> Result<Transition<Self::State, Self::Action>>;

    /// Feature vector fed to policies and value functions.
    fn observe(&self, state: &Self::State) -> Vec<f64>;

    fn observation_dim(&self) -> usize;
}

/// Planar disk used for hazards, boxes, buttons and gremlins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disk {
    pub const fn new(x: f64, y: f64, radius: f64) -> Self {
        Self { center: [x, y], radius }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        dist(self.center, p) <= self.radius
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn point_from(state: &[f64], dim: usize, what: &str) -> Result<[f64; 2]> {
    if state.len() != dim {
        return Err(contract(format!(
            "{what}: expected state of dimension {dim}, got {}",
            state.len()
        )));
    }
    Ok([state[0], state[1]])
}

pub(crate) fn clipped_action(action: &[f64], low: f64, high: f64) -> Result<[f64; 2]> {
    if action.len() != 2 {
        return Err(contract(format!(
            "expected 2-dimensional action, got {}",
            action.len()
        )));
    }
    if !action.iter().all(|a| a.is_finite()) {
        return Err(contract("action contains non-finite values"));
    }
    Ok([action[0].clamp(low, high), action[1].clamp(low, high)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_rejects_bad_gamma() {
        let bad = CmdpSpec::new(2, ActionSpace::Discrete(2), 1.0, 10, vec![0.0]);
        assert!(bad.is_err());
        let bad = CmdpSpec::new(2, ActionSpace::Discrete(2), 0.0, 10, vec![0.0]);
        assert!(bad.is_err());
    }

    #[test]
    fn cost_stream_count_follows_limits() {
        let spec = CmdpSpec::new(2, ActionSpace::Discrete(2), 0.9, 10, vec![0.0, 2.5]).unwrap();
        assert_eq!(spec.cost_streams, 1);
        assert_eq!(spec.d0(), 0.0);
        assert_eq!(spec.cost_limit(1), 2.5);
    }

    #[test]
    fn derived_streams_differ() {
        use rand::Rng;
        let a: u64 = derive_rng(7, 0).random();
        let b: u64 = derive_rng(7, 1).random();
        assert_ne!(a, b);
    }
}
