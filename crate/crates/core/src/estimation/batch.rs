use std::thread;

use super::advantage::discounted_return;
use crate::env::{derive_rng, CmdpSpec, Environment, SimRng};
use crate::error::{contract, Error, Result};
use crate::policy::Policy;

/// Per-stream episode totals: `[u_H, R_A, C_1, ..., C_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamTotals {
    pub u: f64,
    pub r: f64,
    pub c: Vec<f64>,
}

impl StreamTotals {
    fn zero(k: usize) -> Self {
        Self { u: 0.0, r: 0.0, c: vec![0.0; k] }
    }

    fn mean_of<'a>(items: impl ExactSizeIterator<Item = &'a StreamTotals>, k: usize) -> Self {
        let n = items.len().max(1) as f64;
        let mut out = Self::zero(k);
        for s in items {
            out.u += s.u / n;
            out.r += s.r / n;
            for (a, b) in out.c.iter_mut().zip(&s.c) {
                *a += b / n;
            }
        }
        out
    }
}

/// A completed episode: ended in a terminal state or at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub discounted: StreamTotals,
    pub undiscounted: StreamTotals,
    pub length: usize,
    pub terminal: bool,
}

/// On-policy rollout storage. All per-step arrays have length `len()`.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch<A> {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<A>,
    pub log_probs: Vec<f64>,
    /// The step entered a terminal state.
    pub dones: Vec<bool>,
    /// Last step of an episode segment (terminal, horizon, or cut by the batch size).
    pub ends: Vec<bool>,
    /// Observation after the step where a segment ends without termination.
    pub bootstrap_observations: Vec<Option<Vec<f64>>>,
    pub reward_u: Vec<f64>,
    pub reward_a: Vec<f64>,
    /// `costs[i][t]` for stream `C_{i+1}`.
    pub costs: Vec<Vec<f64>>,
    pub episodes: Vec<EpisodeRecord>,
    pub gamma: f64,
}

impl<A> TrajectoryBatch<A> {
    fn empty(cost_streams: usize, gamma: f64) -> Self {
        Self {
            observations: Vec::new(),
            actions: Vec::new(),
            log_probs: Vec::new(),
            dones: Vec::new(),
            ends: Vec::new(),
            bootstrap_observations: Vec::new(),
            reward_u: Vec::new(),
            reward_a: Vec::new(),
            costs: vec![Vec::new(); cost_streams],
            episodes: Vec::new(),
            gamma,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn cost_streams(&self) -> usize {
        self.costs.len()
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    /// Mean per-episode discounted returns over completed episodes.
    pub fn mean_discounted(&self) -> Result<StreamTotals> {
        self.require_episodes()?;
        Ok(StreamTotals::mean_of(self.episodes.iter().map(|e| &e.discounted), self.cost_streams()))
    }

    /// Mean per-episode undiscounted returns over completed episodes.
    pub fn mean_undiscounted(&self) -> Result<StreamTotals> {
        self.require_episodes()?;
        Ok(StreamTotals::mean_of(self.episodes.iter().map(|e| &e.undiscounted), self.cost_streams()))
    }

    fn require_episodes(&self) -> Result<()> {
        if self.episodes.is_empty() {
            return Err(Error::Estimation("batch contains no completed episode".into()));
        }
        Ok(())
    }

    fn append(&mut self, other: Self) {
        self.observations.extend(other.observations);
        self.actions.extend(other.actions);
        self.log_probs.extend(other.log_probs);
        self.dones.extend(other.dones);
        self.ends.extend(other.ends);
        self.bootstrap_observations.extend(other.bootstrap_observations);
        self.reward_u.extend(other.reward_u);
        self.reward_a.extend(other.reward_a);
        for (a, b) in self.costs.iter_mut().zip(other.costs) {
            a.extend(b);
        }
        self.episodes.extend(other.episodes);
    }
}

/// Which per-episode return enters the constraint surpluses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReturnKind {
    #[default]
    Discounted,
    Undiscounted,
}

/// `[c0, c1, ..., ck]` with `c0 = d0 - Ĵ_R` and `c_i = Ĵ_Ci - d_i`.
pub fn constraint_surpluses<A>(batch: &TrajectoryBatch<A>, spec: &CmdpSpec) -> Result<Vec<f64>> {
    constraint_surpluses_with(batch, spec, ReturnKind::Discounted)
}

pub fn constraint_surpluses_with<A>(
    batch: &TrajectoryBatch<A>,
    spec: &CmdpSpec,
    kind: ReturnKind,
) -> Result<Vec<f64>> {
    if spec.cost_streams != batch.cost_streams() {
        return Err(contract("batch and spec disagree on the number of cost streams"));
    }
    let j = match kind {
        ReturnKind::Discounted => batch.mean_discounted()?,
        ReturnKind::Undiscounted => batch.mean_undiscounted()?,
    };
    let mut c = vec![spec.d0() - j.r];
    c.extend(j.c.iter().enumerate().map(|(i, &jc)| jc - spec.cost_limit(i + 1)));
    Ok(c)
}

/// Samples exactly `steps` transitions with the current policy on one RNG stream.
pub fn collect<E, P>(env: &E, policy: &P, steps: usize, rng: &mut SimRng) -> Result<TrajectoryBatch<E::Action>>
where
    E: Environment,
    P: Policy<f64, Action = E::Action>,
{
    let spec = env.spec();
    if steps < spec.horizon {
        return Err(contract(format!(
            "steps per batch ({steps}) must cover one horizon ({})",
            spec.horizon
        )));
    }
    collect_segment(env, policy, steps, rng)
}

/// Splits `steps` across `workers` independent streams derived from `seed` and
/// concatenates the results in worker order.
pub fn collect_workers<E, P>(
    env: &E,
    policy: &P,
    steps: usize,
    workers: usize,
    seed: u64,
) -> Result<TrajectoryBatch<E::Action>>
where
    E: Environment,
    P: Policy<f64, Action = E::Action>,
{
    let workers = workers.max(1);
    let spec = env.spec();
    if steps < spec.horizon * workers {
        return Err(contract(format!(
            "steps per batch ({steps}) must cover one horizon ({}) per worker ({workers})",
            spec.horizon
        )));
    }
    let share = |w: usize| steps / workers + usize::from(w < steps % workers);
    if workers == 1 {
        return collect_segment(env, policy, steps, &mut derive_rng(seed, 0));
    }
    let parts: Vec<Result<TrajectoryBatch<E::Action>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || collect_segment(env, policy, share(w), &mut derive_rng(seed, w as u64)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("collection worker panicked".into()))))
            .collect()
    });
    let mut batch = TrajectoryBatch::empty(spec.cost_streams, spec.gamma);
    for part in parts {
        batch.append(part?);
    }
    Ok(batch)
}

fn collect_segment<E, P>(env: &E, policy: &P, steps: usize, rng: &mut SimRng) -> Result<TrajectoryBatch<E::Action>>
where
    E: Environment,
    P: Policy<f64, Action = E::Action>,
{
    let spec = env.spec();
    let k = spec.cost_streams;
    let mut batch = TrajectoryBatch::empty(k, spec.gamma);
    let mut state = env.reset(rng);
    let mut episode_start = 0;
    for step in 0..steps {
        let obs = env.observe(&state);
        let (action, log_prob) = policy.sample(&obs, rng)?;
        let tr = env.step(&state, &action, rng)?;
        if tr.costs.len() != k {
            return Err(contract("environment emitted the wrong number of cost streams"));
        }
        batch.observations.push(obs);
        batch.actions.push(action);
        batch.log_probs.push(log_prob);
        batch.reward_u.push(tr.reward_u);
        batch.reward_a.push(tr.reward_a);
        for (stream, &c) in batch.costs.iter_mut().zip(&tr.costs) {
            stream.push(c);
        }
        batch.dones.push(tr.done);

        let length = step + 1 - episode_start;
        let at_horizon = length >= spec.horizon;
        let cut = step + 1 == steps;
        let end = tr.done || at_horizon || cut;
        batch.ends.push(end);
        batch
            .bootstrap_observations
            .push((end && !tr.done).then(|| env.observe(&tr.next_state)));
        if end {
            if tr.done || at_horizon {
                batch.episodes.push(episode_record(&batch, episode_start, tr.done, spec.gamma));
            }
            episode_start = step + 1;
            if !cut {
                state = env.reset(rng);
            }
        } else {
            state = tr.next_state;
        }
    }
    Ok(batch)
}

fn episode_record<A>(batch: &TrajectoryBatch<A>, start: usize, terminal: bool, gamma: f64) -> EpisodeRecord {
    let range = start..batch.len();
    let totals = |g: f64| StreamTotals {
        u: discounted_return(&batch.reward_u[range.clone()], g),
        r: discounted_return(&batch.reward_a[range.clone()], g),
        c: batch.costs.iter().map(|s| discounted_return(&s[range.clone()], g)).collect(),
    };
    EpisodeRecord {
        discounted: totals(gamma),
        undiscounted: totals(1.0),
        length: range.len(),
        terminal,
    }
}
