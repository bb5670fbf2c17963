//! Outer training loop: collect, estimate, assemble, solve, line-search, update.

mod config;

pub use config::{variant_wiring, AlgoConfig, Algorithm, Objective, RecoveryMode, Wiring};

use crate::dual_solver::{
    boundary_step, combine_recovery, recovery_from_canonical, solve_feasible, CanonicalSubproblem,
    DualCase, DualSolution,
};
use crate::env::{derive_rng, Environment};
use crate::error::{Error, Result};
use crate::estimation::{
    collect_workers, normalize, stream_advantages, ReturnKind, StreamTotals, TrajectoryBatch,
    ValueFunction,
};
use crate::linalg::{norm, LinearOperator};
use crate::policy::{mean_kl, Policy};
use crate::trust_region::{policy_gradient, surrogate, KlHessian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Feasible,
    Recovery,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Feasible => "feasible",
            Self::Recovery => "recovery",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean per-episode discounted returns of the policy that collected this epoch's batch.
    pub discounted: StreamTotals,
    pub undiscounted: StreamTotals,
    pub episodes: usize,
    /// Surpluses `[c0, c1]` used this epoch (`None` where the constraint is not imposed).
    pub surpluses: [Option<f64>; 2],
    pub branch: Branch,
    pub case: DualCase,
    /// Mean KL of the accepted step (0 when rejected).
    pub kl: f64,
    pub step_norm: f64,
    pub backtracks: usize,
    pub accepted: bool,
    /// The recovery target cannot be reached inside the trust region.
    pub unrecoverable: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<P> {
    pub policy: P,
    pub reports: Vec<EpochReport>,
    /// Diagnostic of a run that stopped early.
    pub halted: Option<String>,
}

/// Per-step reshaped reward `R_A + λ u_H + λ w H_π(·|s_t)`.
pub fn eps_objective_rewards<A, P: Policy<f64>>(
    batch: &TrajectoryBatch<A>,
    policy: &P,
    lambda: f64,
    entropy_weight: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(batch.len());
    for t in 0..batch.len() {
        let mut r = batch.reward_a[t] + lambda * batch.reward_u[t];
        if lambda != 0.0 && entropy_weight != 0.0 {
            r += lambda * entropy_weight * policy.entropy(&batch.observations[t])?;
        }
        out.push(r);
    }
    Ok(out)
}

fn objective_rewards<A, P: Policy<f64>>(batch: &TrajectoryBatch<A>, policy: &P, objective: Objective) -> Result<Vec<f64>> {
    Ok(match objective {
        Objective::U => batch.reward_u.clone(),
        Objective::R => batch.reward_a.clone(),
        Objective::ULinR { lambda } => batch
            .reward_u
            .iter()
            .zip(&batch.reward_a)
            .map(|(u, r)| u + lambda * r)
            .collect(),
        Objective::Reshaped { lambda, entropy_weight } => eps_objective_rewards(batch, policy, lambda, entropy_weight)?,
    })
}

/// Seed of the collection stream for `epoch`.
fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Evenly strided subsample of at most `m` states.
fn subsample(states: &[Vec<f64>], m: Option<usize>) -> Vec<Vec<f64>> {
    match m {
        Some(m) if m < states.len() => (0..m).map(|i| states[i * states.len() / m].clone()).collect(),
        _ => states.to_vec(),
    }
}

struct ValueSet {
    objective: ValueFunction,
    task: ValueFunction,
    cost: ValueFunction,
}

/// Advantages and fitted value targets for one reward stream.
fn advantages_and_fit<A>(
    batch: &TrajectoryBatch<A>,
    rewards: &[f64],
    v: &mut ValueFunction,
    algo: &AlgoConfig,
    rng: &mut crate::env::SimRng,
) -> Result<Vec<f64>> {
    let (adv, values) = stream_advantages(batch, rewards, v, algo.gae_lambda)?;
    let targets: Vec<f64> = adv.iter().zip(&values).map(|(a, v)| a + v).collect();
    v.fit(&batch.observations, &targets, &algo.value_fit, rng)?;
    Ok(adv)
}

/// Runs `algo` from `policy` for `algo.epochs` epochs.
pub fn train<E, P>(env: &E, policy: P, algo: &AlgoConfig, seed: u64) -> Result<TrainOutcome<P>>
where
    E: Environment,
    P: Policy<f64, Action = E::Action>,
{
    train_with(env, policy, algo, seed, |_, _| Ok(()))
}

/// [`train`] with a callback after every epoch (metrics, checkpoints, exact evaluation).
pub fn train_with<E, P, F>(env: &E, mut policy: P, algo: &AlgoConfig, seed: u64, mut observe: F) -> Result<TrainOutcome<P>>
where
    E: Environment,
    P: Policy<f64, Action = E::Action>,
    F: FnMut(&EpochReport, &P) -> Result<()>,
{
    let wiring = variant_wiring(algo)?;
    let spec = env.spec().clone();
    if spec.cost_streams < 1 && wiring.cost_ceiling.is_some() {
        return Err(Error::Config("environment has no cost stream to constrain".into()));
    }
    let gamma = spec.gamma;
    let horizon_scale = 1.0 / (1.0 - gamma);
    let obs_dim = env.observation_dim();
    let mut init_rng = derive_rng(seed, u64::MAX);
    let hidden = algo.value_fit.hidden.clone();
    let mut values = ValueSet {
        objective: ValueFunction::new(obs_dim, &hidden, &mut init_rng)?,
        task: ValueFunction::new(obs_dim, &hidden, &mut init_rng)?,
        cost: ValueFunction::new(obs_dim, &hidden, &mut init_rng)?,
    };
    let mut fit_rng = derive_rng(seed, u64::MAX - 1);
    let mut reports = Vec::with_capacity(algo.epochs);

    for epoch in 0..algo.epochs {
        let batch = collect_workers(env, &policy, algo.steps_per_epoch, algo.workers, epoch_seed(seed, epoch))?;
        let discounted = batch.mean_discounted()?;
        let undiscounted = batch.mean_undiscounted()?;
        let j = match algo.return_kind {
            ReturnKind::Discounted => &discounted,
            ReturnKind::Undiscounted => &undiscounted,
        };

        let rewards = objective_rewards(&batch, &policy, wiring.objective)?;
        let mut adv_obj = advantages_and_fit(&batch, &rewards, &mut values.objective, algo, &mut fit_rng)?;
        normalize(&mut adv_obj);
        let adv_task = match wiring.task_floor {
            Some(_) => Some(advantages_and_fit(&batch, &batch.reward_a, &mut values.task, algo, &mut fit_rng)?),
            None => None,
        };
        let adv_cost = match wiring.cost_ceiling {
            Some(_) => Some(advantages_and_fit(&batch, &batch.costs[0], &mut values.cost, algo, &mut fit_rng)?),
            None => None,
        };

        let obs = &batch.observations;
        let g = policy_gradient(&policy, obs, &batch.actions, &adv_obj)?;
        let scaled_gradient = |adv: &[f64]| -> Result<Vec<f64>> {
            let mut b = policy_gradient(&policy, obs, &batch.actions, adv)?;
            b.iter_mut().for_each(|v| *v *= horizon_scale);
            Ok(b)
        };
        let b0 = adv_task.as_deref().map(&scaled_gradient).transpose()?;
        let b1 = adv_cost.as_deref().map(&scaled_gradient).transpose()?;
        let c0 = wiring.task_floor.map(|d0| d0 - j.r);
        let c1 = wiring.cost_ceiling.map(|d1| j.c[0] - d1);

        let hvp_states = subsample(obs, algo.hvp_states);
        let hvp = KlHessian::new(&policy, &hvp_states, algo.damping)?;
        let canon = CanonicalSubproblem::new(
            g.iter().map(|v| -v).collect(),
            [
                b0.map(|b| (b.into_iter().map(|v| -v).collect(), c0.unwrap_or(0.0))),
                b1.map(|b| (b, c1.unwrap_or(0.0))),
            ],
            algo.delta,
            &hvp,
            algo.cg,
        )?;

        let violated: Vec<usize> = [c0, c1]
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.filter(|&c| c > 0.0).map(|_| i))
            .collect();
        let (branch, case, step, unrecoverable) = if violated.is_empty() {
            let (case, step) = match solve_feasible(&canon) {
                Ok(sol) => (sol.case, sol.x),
                Err(Error::DegenerateDual { .. }) => (DualCase::NoneActive, boundary_step(&canon)),
                Err(Error::InfeasibleSubproblem(_)) => (DualCase::NoneActive, vec![0.0; canon.ghat.len()]),
                Err(e) => return Err(e),
            };
            (Branch::Feasible, case, step, false)
        } else {
            let targets: Vec<usize> = match algo.recovery_mode {
                RecoveryMode::Combined => violated.clone(),
                RecoveryMode::OneAtATime => {
                    let worst = violated
                        .iter()
                        .copied()
                        .max_by(|&a, &b| {
                            let ratio = |i: usize| {
                                let s = if i == 0 { canon.s0 } else { canon.s1 };
                                canon.c(i) / s.sqrt().max(f64::MIN_POSITIVE)
                            };
                            ratio(a).total_cmp(&ratio(b))
                        })
                        .unwrap_or(violated[0]);
                    vec![worst]
                }
            };
            let mut sols: Vec<DualSolution<f64>> = Vec::with_capacity(targets.len());
            for &m in &targets {
                match recovery_from_canonical(&canon, m) {
                    Ok(s) => sols.push(s),
                    Err(e @ Error::Irrecoverable { .. }) => {
                        return Ok(TrainOutcome {
                            policy,
                            reports,
                            halted: Some(format!("epoch {epoch}: {e}")),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
            let unrecoverable = sols.iter().any(|s| s.unrecoverable);
            let step = combine_recovery(&sols, &canon.hvp, algo.delta);
            (Branch::Recovery, DualCase::Recovery, step, unrecoverable)
        };

        // line search
        let theta_old = policy.params().to_vec();
        let old_policy = policy.clone();
        let lp_old = &batch.log_probs;
        let base_obj = adv_obj.iter().sum::<f64>() / adv_obj.len() as f64;
        let mean = |a: &[f64]| a.iter().sum::<f64>() / a.len() as f64;
        let predicted = |p: &P, adv: &[f64]| -> Result<f64> {
            Ok(horizon_scale * (surrogate(p, obs, &batch.actions, lp_old, adv)? - mean(adv)))
        };
        let tol = |d: f64| algo.constraint_tol_rel * d.abs() + algo.constraint_tol_abs;
        let mut accepted = None;
        let mut tries = 0;
        if norm(&step) > 0.0 && step.iter().all(|v| v.is_finite()) {
            let mut frac = 1.0;
            for attempt in 0..=algo.backtracks {
                tries = attempt;
                let theta: Vec<f64> = theta_old.iter().zip(&step).map(|(t, s)| t + frac * s).collect();
                let mut cand = old_policy.clone();
                cand.set_params(&theta)?;
                let kl = mean_kl(&cand, &old_policy, obs)?;
                let mut ok = kl.is_finite() && kl <= algo.kl_accept_factor * algo.delta;
                if ok {
                    let c0_new = match (&adv_task, c0) {
                        (Some(a), Some(c)) => Some((c, c - predicted(&cand, a)?)),
                        _ => None,
                    };
                    let c1_new = match (&adv_cost, c1) {
                        (Some(a), Some(c)) => Some((c, c + predicted(&cand, a)?)),
                        _ => None,
                    };
                    ok = match branch {
                        Branch::Feasible => {
                            let improved = surrogate(&cand, obs, &batch.actions, lp_old, &adv_obj)? > base_obj;
                            let within = |pair: Option<(f64, f64)>, d: Option<f64>| {
                                pair.zip(d).is_none_or(|((c, c_new), d)| c_new <= c.max(0.0) + tol(d))
                            };
                            improved && within(c0_new, wiring.task_floor) && within(c1_new, wiring.cost_ceiling)
                        }
                        Branch::Recovery => [c0_new, c1_new]
                            .iter()
                            .flatten()
                            .all(|&(c, c_new)| c <= 0.0 || c_new < c),
                    };
                }
                if ok {
                    accepted = Some((theta, kl, frac));
                    break;
                }
                frac *= 0.5;
            }
        }
        let (kl, step_norm, is_accepted) = match accepted {
            Some((theta, kl, frac)) => {
                policy.set_params(&theta)?;
                (kl, frac * norm(&step), true)
            }
            None => (0.0, 0.0, false),
        };
        if is_accepted && kl > algo.kl_accept_factor * algo.delta {
            return Err(Error::Numerical(format!("accepted step violates the KL bound: {kl}")));
        }
        let report = EpochReport {
            epoch,
            discounted,
            undiscounted,
            episodes: batch.episode_count(),
            surpluses: [c0, c1],
            branch,
            case,
            kl,
            step_norm,
            backtracks: tries,
            accepted: is_accepted,
            unrecoverable,
        };
        observe(&report, &policy)?;
        reports.push(report);
    }
    Ok(TrainOutcome { policy, reports, halted: None })
}

/// Mean KL between successive policies never exceeds the accept bound; exposed
/// for suites that audit reports.
pub fn kl_within_bound(reports: &[EpochReport], algo: &AlgoConfig) -> bool {
    reports
        .iter()
        .filter(|r| r.accepted)
        .all(|r| r.kl <= algo.kl_accept_factor * algo.delta)
}

#[allow(dead_code)]
fn assert_operator<O: LinearOperator<f64>>(_: &O) {}
