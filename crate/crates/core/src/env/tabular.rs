use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{ActionSpace, CmdpSpec, Environment, SimRng, Transition};
use crate::error::{contract, Error, Result};

/// Finite CMDP with explicit transition and reward tables.
///
/// Reward tables are indexed `[s][a][s']`. Entering a terminal state ends the
/// episode; terminal states contribute no further reward.
#[derive(Debug, Clone)]
pub struct TabularCmdp {
    spec: CmdpSpec,
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    reward_a: Vec<Vec<Vec<f64>>>,
    reward_u: Vec<Vec<Vec<f64>>>,
    /// `costs[i][s][a][s']` for cost stream `C_{i+1}`.
    costs: Vec<Vec<Vec<Vec<f64>>>>,
    initial: Vec<f64>,
    terminal: Vec<bool>,
}

/// Exact discounted returns of a stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactReturns {
    pub j_u: f64,
    pub j_r: f64,
    pub j_c: Vec<f64>,
}

const ROW_TOL: f64 = 1e-12;

impl TabularCmdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        transitions: Vec<Vec<Vec<f64>>>,
        reward_a: Vec<Vec<Vec<f64>>>,
        reward_u: Vec<Vec<Vec<f64>>>,
        costs: Vec<Vec<Vec<Vec<f64>>>>,
        initial: Vec<f64>,
        terminal: Vec<bool>,
        gamma: f64,
        horizon: usize,
        limits: Vec<f64>,
    ) -> Result<Self> {
        let n_states = transitions.len();
        if n_states == 0 {
            return Err(contract("tabular CMDP needs at least one state"));
        }
        let n_actions = transitions[0].len();
        if costs.len() + 1 != limits.len() {
            return Err(contract(format!(
                "{} cost tables but {} cost limits",
                costs.len(),
                limits.len().saturating_sub(1)
            )));
        }
        let shape_ok = |t: &Vec<Vec<Vec<f64>>>| {
            t.len() == n_states
                && t.iter().all(|row| {
                    row.len() == n_actions && row.iter().all(|r| r.len() == n_states)
                })
        };
        if !shape_ok(&transitions) || !shape_ok(&reward_a) || !shape_ok(&reward_u) {
            return Err(contract("table shapes must be [S][A][S]"));
        }
        if !costs.iter().all(shape_ok) {
            return Err(contract("cost table shapes must be [S][A][S]"));
        }
        for (s, rows) in transitions.iter().enumerate() {
            for (a, row) in rows.iter().enumerate() {
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > ROW_TOL || row.iter().any(|&p| p < 0.0) {
                    return Err(contract(format!(
                        "T[{s}][{a}] is not a distribution (sum {total})"
                    )));
                }
            }
        }
        if initial.len() != n_states || ((initial.iter().sum::<f64>()) - 1.0).abs() > ROW_TOL {
            return Err(contract("initial distribution must have S entries summing to 1"));
        }
        if terminal.len() != n_states {
            return Err(contract("terminal flags must have S entries"));
        }
        let spec = CmdpSpec::new(
            n_states,
            ActionSpace::Discrete(n_actions),
            gamma,
            horizon,
            limits,
        )?;
        Ok(Self {
            spec,
            n_states,
            n_actions,
            transitions,
            reward_a,
            reward_u,
            costs,
            initial,
            terminal,
        })
    }

    /// Five-state corridor with one hazard shortcut and one user-preferred detour.
    ///
    /// ```text
    /// s0 --a0--> s1 --a0--> s4 (goal)          direct route
    ///  |          `--a1--> s2 --a0--> s4       detour the user expects (R_A -3)
    ///  `--a1--> s3 --a0--> s4                  shortcut through a hazard (C_1 = 4)
    /// ```
    ///
    /// With `d0 = 0.8`, `d1 = 0.1` the best feasible deterministic policy is the
    /// direct route (`J_u = 0.9`); the detour violates `C0` and the shortcut
    /// violates `C1`, and both are preferred by `u_H`.
    pub fn chain_fixture() -> Self {
        let (s, a) = (5, 2);
        let mut t = vec![vec![vec![0.0; s]; a]; s];
        let mut r = t.clone();
        let mut u = t.clone();
        let mut c = t.clone();
        let mut edge = |from: usize, act: usize, to: usize, ra: f64, cost: f64, ru: f64| {
            t[from][act][to] = 1.0;
            r[from][act][to] = ra;
            c[from][act][to] = cost;
            u[from][act][to] = ru;
        };
        edge(0, 0, 1, 0.0, 0.0, 0.0);
        edge(0, 1, 3, 0.0, 0.0, 0.0);
        edge(1, 0, 4, 1.0, 0.0, 1.0);
        edge(1, 1, 2, -3.0, 0.0, 0.5);
        edge(2, 0, 4, 1.0, 0.0, 1.0);
        edge(2, 1, 2, -0.1, 0.0, 0.0);
        edge(3, 0, 4, 1.0, 4.0, 1.3);
        edge(3, 1, 1, -0.1, 0.0, 0.0);
        edge(4, 0, 4, 0.0, 0.0, 0.0);
        edge(4, 1, 4, 0.0, 0.0, 0.0);
        let mut initial = vec![0.0; s];
        initial[0] = 1.0;
        let mut terminal = vec![false; s];
        terminal[4] = true;
        Self::new(t, r, u, vec![c], initial, terminal, 0.9, 50, vec![0.8, 0.1])
            .expect("chain fixture is well formed")
    }

    /// Dense random CMDP: random transition rows, rewards in [-1, 1], costs in [0, 1],
    /// uniform initial distribution, no terminal states.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, horizon: usize, seed: u64) -> Self {
        let mut rng = super::seeded_rng(seed);
        let mut table = |lo: f64, hi: f64| -> Vec<Vec<Vec<f64>>> {
            (0..n_states)
                .map(|_| {
                    (0..n_actions)
                        .map(|_| (0..n_states).map(|_| rng.random_range(lo..hi)).collect())
                        .collect()
                })
                .collect()
        };
        let mut t = table(0.0, 1.0);
        for rows in &mut t {
            for row in rows.iter_mut() {
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= total);
                // absorb rounding into the last entry so the row sums to 1 tightly
                let rest: f64 = row[..n_states - 1].iter().sum();
                row[n_states - 1] = 1.0 - rest;
            }
        }
        let r = table(-1.0, 1.0);
        let u = table(-1.0, 1.0);
        let c = table(0.0, 1.0);
        let initial = vec![1.0 / n_states as f64; n_states];
        Self::new(
            t,
            r,
            u,
            vec![c],
            initial,
            vec![false; n_states],
            gamma,
            horizon,
            vec![0.0, 1.0],
        )
        .expect("random tabular CMDP is well formed")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        &self.transitions[s][a]
    }

    /// Same CMDP with different limits.
    pub fn with_limits(&self, limits: Vec<f64>) -> Result<Self> {
        if limits.len() != self.spec.limits.len() {
            return Err(contract("limit count must not change"));
        }
        let mut out = self.clone();
        out.spec.limits = limits;
        Ok(out)
    }

    /// Same CMDP with a different discount and episode cap.
    pub fn with_timing(&self, gamma: f64, horizon: usize) -> Result<Self> {
        let mut out = self.clone();
        out.spec = CmdpSpec::new(
            self.spec.state_dim,
            self.spec.action_space.clone(),
            gamma,
            horizon,
            self.spec.limits.clone(),
        )?;
        Ok(out)
    }

    /// Same CMDP with a different initial distribution.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != self.n_states || ((initial.iter().sum::<f64>()) - 1.0).abs() > ROW_TOL {
            return Err(contract("initial distribution must have S entries summing to 1"));
        }
        let mut out = self.clone();
        out.initial = initial;
        Ok(out)
    }

    fn sample_index(probs: &[f64], rng: &mut SimRng) -> usize {
        let x: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if x < acc {
                return i;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }
}

impl Environment for TabularCmdp {
    type State = usize;
    type Action = usize;

    fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut SimRng) -> usize {
        Self::sample_index(&self.initial, rng)
    }

    fn step(&self, state: &usize, action: &usize, rng: &mut SimRng) -> Result<Transition<usize, usize>> {
        let (s, a) = (*state, *action);
        if s >= self.n_states {
            return Err(contract(format!("state {s} out of range 0..{}", self.n_states)));
        }
        if a >= self.n_actions {
            return Err(contract(format!("action {a} out of range 0..{}", self.n_actions)));
        }
        let next = Self::sample_index(&self.transitions[s][a], rng);
        Ok(Transition {
            state: s,
            action: a,
            next_state: next,
            reward_a: self.reward_a[s][a][next],
            costs: self.costs.iter().map(|c| c[s][a][next]).collect(),
            reward_u: self.reward_u[s][a][next],
            done: self.terminal[next],
        })
    }

    fn observe(&self, state: &usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states];
        v[*state] = 1.0;
        v
    }

    fn observation_dim(&self) -> usize {
        self.n_states
    }
}

/// Exact infinite-horizon discounted returns of `policy[s][a]` for all streams,
/// obtained by solving `(I - γ P_π) V = r_π` once per stream.
pub fn exact_policy_returns(env: &TabularCmdp, policy: &[Vec<f64>]) -> Result<ExactReturns> {
    let (n, m) = (env.n_states, env.n_actions);
    if policy.len() != n || policy.iter().any(|row| row.len() != m) {
        return Err(contract("policy table must be [S][A]"));
    }
    for (s, row) in policy.iter().enumerate() {
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
            return Err(contract(format!("policy row {s} is not a distribution")));
        }
    }
    let gamma = env.spec.gamma;
    let mut system = DMatrix::<f64>::identity(n, n);
    let mut r_a = DVector::zeros(n);
    let mut r_u = DVector::zeros(n);
    let mut r_c = vec![DVector::<f64>::zeros(n); env.costs.len()];
    for s in 0..n {
        if env.terminal[s] {
            continue;
        }
        for a in 0..m {
            let pa = policy[s][a];
            if pa == 0.0 {
                continue;
            }
            for sp in 0..n {
                let p = pa * env.transitions[s][a][sp];
                if p == 0.0 {
                    continue;
                }
                system[(s, sp)] -= gamma * p;
                r_a[s] += p * env.reward_a[s][a][sp];
                r_u[s] += p * env.reward_u[s][a][sp];
                for (acc, table) in r_c.iter_mut().zip(&env.costs) {
                    acc[s] += p * table[s][a][sp];
                }
            }
        }
    }
    let lu = system.lu();
    let solve = |rhs: &DVector<f64>| -> Result<f64> {
        let v = lu
            .solve(rhs)
            .ok_or_else(|| Error::Numerical("singular Bellman system".into()))?;
        Ok(env.initial.iter().zip(v.iter()).map(|(p, x)| p * x).sum())
    };
    Ok(ExactReturns {
        j_u: solve(&r_u)?,
        j_r: solve(&r_a)?,
        j_c: r_c.iter().map(solve).collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::seeded_rng;

    fn uniform(env: &TabularCmdp) -> Vec<Vec<f64>> {
        vec![vec![1.0 / env.n_actions() as f64; env.n_actions()]; env.n_states()]
    }

    fn self_loop(reward: f64, gamma: f64) -> TabularCmdp {
        TabularCmdp::new(
            vec![vec![vec![1.0]]],
            vec![vec![vec![reward]]],
            vec![vec![vec![0.0]]],
            vec![vec![vec![vec![0.0]]]],
            vec![1.0],
            vec![false],
            gamma,
            100,
            vec![0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn geometric_series_for_self_loop() {
        let env = self_loop(1.0, 0.9);
        let j = exact_policy_returns(&env, &[vec![1.0]]).unwrap();
        assert!((j.j_r - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_tables_give_zero_returns() {
        let env = self_loop(0.0, 0.5);
        let j = exact_policy_returns(&env, &[vec![1.0]]).unwrap();
        assert_eq!((j.j_u, j.j_r, j.j_c[0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rows_sum_to_one_after_construction() {
        for seed in 0..20 {
            let env = TabularCmdp::random(5, 3, 0.9, 100, seed);
            for s in 0..5 {
                for a in 0..3 {
                    let total: f64 = env.transition_row(s, a).iter().sum();
                    assert!((total - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn chain_reset_is_point_mass_on_start() {
        let env = TabularCmdp::chain_fixture();
        let mut rng = seeded_rng(3);
        for _ in 0..10 {
            assert_eq!(env.reset(&mut rng), 0);
        }
    }

    #[test]
    fn chain_moves_deterministically() {
        let env = TabularCmdp::chain_fixture();
        let mut rng = seeded_rng(0);
        for _ in 0..10 {
            let tr = env.step(&1, &1, &mut rng).unwrap();
            assert_eq!(tr.next_state, 2);
            assert!(!tr.done);
        }
        let tr = env.step(&3, &0, &mut rng).unwrap();
        assert_eq!((tr.next_state, tr.costs[0], tr.done), (4, 4.0, true));
    }

    #[test]
    fn out_of_range_inputs_are_contract_errors() {
        let env = TabularCmdp::chain_fixture();
        let mut rng = seeded_rng(0);
        assert!(matches!(env.step(&9, &0, &mut rng), Err(Error::Contract(_))));
        assert!(matches!(env.step(&0, &2, &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn chain_route_values() {
        let env = TabularCmdp::chain_fixture();
        let direct = vec![vec![1.0, 0.0]; 5];
        let j = exact_policy_returns(&env, &direct).unwrap();
        assert!((j.j_u - 0.9).abs() < 1e-12);
        assert!((j.j_r - 0.9).abs() < 1e-12);
        assert_eq!(j.j_c[0], 0.0);

        let mut shortcut = direct.clone();
        shortcut[0] = vec![0.0, 1.0];
        let j = exact_policy_returns(&env, &shortcut).unwrap();
        assert!((j.j_c[0] - 3.6).abs() < 1e-12);
        assert!((j.j_u - 1.17).abs() < 1e-12);
    }

    #[test]
    fn uniform_policy_matches_monte_carlo() {
        let env = TabularCmdp::random(5, 2, 0.9, 200, 11);
        let pi = uniform(&env);
        let exact = exact_policy_returns(&env, &pi).unwrap();
        let mut rng = seeded_rng(99);
        let episodes = 100_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..episodes {
            let mut s = env.reset(&mut rng);
            let (mut ret, mut disc) = (0.0, 1.0);
            for _ in 0..env.spec().horizon {
                let a = rng.random_range(0..2);
                let tr = env.step(&s, &a, &mut rng).unwrap();
                ret += disc * tr.reward_a;
                disc *= env.spec().gamma;
                s = tr.next_state;
            }
            sum += ret;
            sum_sq += ret * ret;
        }
        let mean = sum / episodes as f64;
        let se = ((sum_sq / episodes as f64 - mean * mean) / episodes as f64).sqrt();
        assert!(
            (mean - exact.j_r).abs() <= 3.0 * se,
            "mc {mean} exact {} se {se}",
            exact.j_r
        );
    }
}
