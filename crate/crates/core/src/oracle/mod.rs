//! Exact ground truth on small tabular instances: brute-force search over all
//! deterministic policies, each evaluated in closed form.

use std::cmp::Ordering;
use std::fmt;
use std::thread;

use crate::env::{exact_policy_returns, Environment, ExactReturns, TabularCmdp};
use crate::error::{Error, Result};

/// Largest number of deterministic policies the oracle will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// `choice[s]` is the action taken in state `s`; `None` when nothing is feasible.
    pub best: Option<Vec<usize>>,
    pub returns: Option<ExactReturns>,
    /// `[J_R ≥ d0, J_C1 ≤ d1]` for the returned policy.
    pub feasible: [bool; 2],
    pub enumerated: u64,
}

impl OracleResult {
    pub fn is_infeasible(&self) -> bool {
        self.best.is_none()
    }

    /// Probability table `[s][a]` of the returned policy.
    pub fn table(&self, n_actions: usize) -> Option<Vec<Vec<f64>>> {
        self.best.as_ref().map(|b| one_hot_table(b, n_actions))
    }

    pub const CSV_HEADER: &'static str = "feasible,j_u,j_r,j_c1,policy,enumerated";

    pub fn csv_row(&self) -> String {
        match (&self.best, &self.returns) {
            (Some(b), Some(j)) => format!(
                "true,{},{},{},{},{}",
                j.j_u,
                j.j_r,
                j.j_c[0],
                b.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
                self.enumerated
            ),
            _ => format!("false,,,,,{}", self.enumerated),
        }
    }
}

impl fmt::Display for OracleResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "policies enumerated: {}", self.enumerated)?;
        match (&self.best, &self.returns) {
            (Some(b), Some(j)) => {
                writeln!(f, "status: optimal")?;
                writeln!(f, "policy: {b:?}")?;
                writeln!(f, "J_u:  {:.6}", j.j_u)?;
                writeln!(f, "J_R:  {:.6} (floor satisfied: {})", j.j_r, self.feasible[0])?;
                write!(f, "J_C1: {:.6} (ceiling satisfied: {})", j.j_c[0], self.feasible[1])
            }
            _ => write!(f, "status: infeasible (no deterministic policy meets both limits)"),
        }
    }
}

pub fn one_hot_table(choice: &[usize], n_actions: usize) -> Vec<Vec<f64>> {
    choice
        .iter()
        .map(|&a| {
            let mut row = vec![0.0; n_actions];
            row[a] = 1.0;
            row
        })
        .collect()
}

fn decode(mut index: u64, n_states: usize, n_actions: usize) -> Vec<usize> {
    // state 0 is the most significant digit, so increasing index is lexicographic order
    let mut choice = vec![0; n_states];
    for slot in choice.iter_mut().rev() {
        *slot = (index % n_actions as u64) as usize;
        index /= n_actions as u64;
    }
    choice
}

struct Candidate {
    choice: Vec<usize>,
    returns: ExactReturns,
}

/// `Greater` means `a` should win.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    a.returns
        .j_u
        .total_cmp(&b.returns.j_u)
        .then(a.returns.j_r.total_cmp(&b.returns.j_r))
        .then_with(|| b.choice.cmp(&a.choice))
}

fn better(current: Option<Candidate>, next: Candidate) -> Option<Candidate> {
    match current {
        Some(c) if rank(&c, &next) != Ordering::Less => Some(c),
        _ => Some(next),
    }
}

/// Best deterministic policy by `J_u` among those with `J_R ≥ d0` and `J_C1 ≤ d1`.
/// Pass `f64::NEG_INFINITY` / `f64::INFINITY` to drop a constraint.
pub fn enumerate_constrained_optimum(env: &TabularCmdp, d0: f64, d1: f64) -> Result<OracleResult> {
    let (n, m) = (env.n_states(), env.n_actions());
    let total = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(total));
    }
    if env.spec().cost_streams < 1 {
        return Err(Error::Config("oracle needs a cost stream".into()));
    }
    let total = total as u64;
    let workers = thread::available_parallelism().map_or(1, |w| w.get()).min(total as usize).max(1) as u64;
    let chunk = total.div_ceil(workers);
    let partials: Vec<Result<Option<Candidate>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut best = None;
                    for index in w * chunk..((w + 1) * chunk).min(total) {
                        let choice = decode(index, n, m);
                        let returns = exact_policy_returns(env, &one_hot_table(&choice, m))?;
                        if returns.j_r >= d0 && returns.j_c[0] <= d1 {
                            best = better(best, Candidate { choice, returns });
                        }
                    }
                    Ok(best)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("oracle worker panicked")).collect()
    });
    let mut best = None;
    for partial in partials {
        if let Some(c) = partial? {
            best = better(best, c);
        }
    }
    Ok(match best {
        Some(c) => OracleResult {
            feasible: [c.returns.j_r >= d0, c.returns.j_c[0] <= d1],
            best: Some(c.choice),
            returns: Some(c.returns),
            enumerated: total,
        },
        None => OracleResult { best: None, returns: None, feasible: [false, false], enumerated: total },
    })
}
