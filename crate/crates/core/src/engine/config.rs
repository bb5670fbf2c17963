use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimation::{FitConfig, ReturnKind};
use crate::trust_region::CgSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Maximize `u_H` subject to `J_R ≥ d0` and `J_C1 ≤ d1`.
    Seps,
    /// Maximize `R_A` with no constraints.
    Agt,
    /// Maximize `u_H` with no constraints.
    Hum,
    /// Maximize the reshaped reward `R_A + λ(u_H + w·H_π)` with no constraints.
    Eps,
    /// `u_H` subject to `J_C1 ≤ d1` only.
    SepsNoC0,
    /// `u_H + λ R_A` subject to `J_C1 ≤ d1` only.
    SepsLinNoC0,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Seps,
        Algorithm::Agt,
        Algorithm::Hum,
        Algorithm::Eps,
        Algorithm::SepsNoC0,
        Algorithm::SepsLinNoC0,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Seps => "seps",
            Self::Agt => "agt",
            Self::Hum => "hum",
            Self::Eps => "eps",
            Self::SepsNoC0 => "seps_no_c0",
            Self::SepsLinNoC0 => "seps_lin_no_c0",
        }
    }

    pub fn uses_d0(self) -> bool {
        self == Self::Seps
    }

    pub fn uses_d1(self) -> bool {
        matches!(self, Self::Seps | Self::SepsNoC0 | Self::SepsLinNoC0)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// What to do when both constraints are violated at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecoveryMode {
    /// Sum the per-constraint recovery steps.
    #[default]
    Combined,
    /// Recover the most violated constraint only.
    OneAtATime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub d0: Option<f64>,
    pub d1: Option<f64>,
    /// Mean-KL trust-region radius.
    pub delta: f64,
    /// Reconciliation factor of the `eps` and `seps_lin_no_c0` objectives.
    pub lambda: f64,
    pub entropy_weight: f64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub workers: usize,
    pub backtracks: usize,
    /// Accepted steps need mean KL ≤ `kl_accept_factor · delta`.
    pub kl_accept_factor: f64,
    /// A feasible-branch step may raise a surplus to at most
    /// `max(c, 0) + constraint_tol_rel·|d| + constraint_tol_abs`.
    pub constraint_tol_rel: f64,
    pub constraint_tol_abs: f64,
    pub damping: f64,
    pub cg: CgSettings,
    pub gae_lambda: f64,
    /// Number of batch states used for Hessian-vector products (`None`: all).
    pub hvp_states: Option<usize>,
    pub value_fit: FitConfig,
    pub return_kind: ReturnKind,
    pub recovery_mode: RecoveryMode,
}

impl AlgoConfig {
    /// Defaults for `algorithm`; constraint limits stay unset.
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            d0: None,
            d1: None,
            delta: 0.01,
            lambda: match algorithm {
                Algorithm::SepsLinNoC0 => 3.0,
                _ => 2.0,
            },
            entropy_weight: 0.01,
            epochs: 100,
            steps_per_epoch: 2000,
            workers: 1,
            backtracks: 10,
            kl_accept_factor: 1.5,
            constraint_tol_rel: 0.05,
            constraint_tol_abs: 0.01,
            damping: 0.1,
            cg: CgSettings::default(),
            gae_lambda: 0.95,
            hvp_states: None,
            value_fit: FitConfig::default(),
            return_kind: ReturnKind::Discounted,
            recovery_mode: RecoveryMode::Combined,
        }
    }

    pub fn with_limits(mut self, d0: Option<f64>, d1: Option<f64>) -> Self {
        self.d0 = d0;
        self.d1 = d1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let missing = |key: &str| Err(Error::Config(format!("algorithm {} requires `{key}`", self.algorithm)));
        if self.algorithm.uses_d0() && self.d0.is_none() {
            return missing("d0");
        }
        if self.algorithm.uses_d1() && self.d1.is_none() {
            return missing("d1");
        }
        let positive = [
            ("delta", self.delta),
            ("kl_accept_factor", self.kl_accept_factor),
            ("cg_tol", self.cg.tol),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("`{key}` must be positive, got {v}")));
            }
        }
        if !(self.damping >= 0.0) {
            return Err(Error::Config("`damping` must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("`gae_lambda` must lie in [0, 1]".into()));
        }
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.cg.max_iters == 0 {
            return Err(Error::Config("`epochs`, `steps_per_epoch` and `cg_iters` must be positive".into()));
        }
        if self.hvp_states == Some(0) {
            return Err(Error::Config("`hvp_states` must be positive".into()));
        }
        Ok(())
    }
}

/// Objective stream of an algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    U,
    R,
    /// `u_H + λ R_A`
    ULinR { lambda: f64 },
    /// `R_A + λ(u_H + w·H_π(·|s))`
    Reshaped { lambda: f64, entropy_weight: f64 },
}

/// Which linear constraints an algorithm imposes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wiring {
    pub objective: Objective,
    /// `J_R ≥ d0`
    pub task_floor: Option<f64>,
    /// `J_C1 ≤ d1`
    pub cost_ceiling: Option<f64>,
}

impl Wiring {
    pub fn constraint_count(&self) -> usize {
        usize::from(self.task_floor.is_some()) + usize::from(self.cost_ceiling.is_some())
    }
}

pub fn variant_wiring(algo: &AlgoConfig) -> Result<Wiring> {
    algo.validate()?;
    let (objective, task_floor, cost_ceiling) = match algo.algorithm {
        Algorithm::Seps => (Objective::U, algo.d0, algo.d1),
        Algorithm::SepsNoC0 => (Objective::U, None, algo.d1),
        Algorithm::SepsLinNoC0 => (Objective::ULinR { lambda: algo.lambda }, None, algo.d1),
        Algorithm::Agt => (Objective::R, None, None),
        Algorithm::Hum => (Objective::U, None, None),
        Algorithm::Eps => (
            Objective::Reshaped { lambda: algo.lambda, entropy_weight: algo.entropy_weight },
            None,
            None,
        ),
    };
    Ok(Wiring { objective, task_floor, cost_ceiling })
}
