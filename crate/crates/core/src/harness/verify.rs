//! Self-check suites with pass/fail reports and residual statistics.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{EnvName, RunConfig};
use super::run::chain_env;
use crate::dual_solver::qp_oracle::{random_feasible_instance, solve_qp, QpSettings};
use crate::dual_solver::{boundary_step, kkt_check, solve_feasible, CanonicalSubproblem, DualCase};
use crate::engine::{train, Algorithm};
use crate::env::{derive_rng, exact_policy_returns, seeded_rng, Environment};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, DenseMatrix, LinearOperator};
use crate::oracle::enumerate_constrained_optimum;
use crate::policy::{grad_mean_kl, GaussianPolicy, Policy, SoftmaxPolicy};
use crate::trust_region::{cg_solve, kl_hessian_vector_product, CgSettings, KlHessian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    DualSweep,
    GradCheck,
    TabularOracle,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::DualSweep, Suite::GradCheck, Suite::TabularOracle];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DualSweep => "dual-sweep",
            Self::GradCheck => "grad-check",
            Self::TabularOracle => "tabular-oracle",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}` (expected dual-sweep, grad-check or tabular-oracle)")))
    }
}

/// One thresholded statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `value ≤ limit` passes unless `at_least` is set.
    pub at_least: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, at_least: false }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, at_least: true }
    }

    pub fn passed(&self) -> bool {
        if self.at_least {
            self.value >= self.limit
        } else {
            self.value <= self.limit
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    /// Per-item detail table; the first entry is the header.
    pub table: Vec<String>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> String {
        let mut out = format!("suite: {}\nresult: {}\n", self.suite, if self.passed() { "PASS" } else { "FAIL" });
        for c in &self.checks {
            out.push_str(&format!(
                "{} {} = {:.3e} ({} {:.3e})\n",
                if c.passed() { "ok  " } else { "FAIL" },
                c.name,
                c.value,
                if c.at_least { ">=" } else { "<=" },
                c.limit
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSweepOptions {
    pub instances: usize,
    pub seed: u64,
    pub min_dim: usize,
    pub max_dim: usize,
}

impl Default for DualSweepOptions {
    fn default() -> Self {
        Self { instances: 1000, seed: 0, min_dim: 5, max_dim: 50 }
    }
}

/// Analytic dual vs the projected-gradient oracle on random feasible instances.
pub fn dual_sweep(opts: DualSweepOptions) -> Result<VerifyReport> {
    let start = Instant::now();
    let cg = CgSettings { max_iters: 500, tol: 1e-13 };
    let mut table = vec!["instance,dim,case,lambda,analytic,oracle,rel_gap,kkt,oracle_iterations".to_string()];
    let (mut worst_gap, mut worst_kkt, mut worst_trust) = (0.0f64, 0.0f64, 0.0f64);
    let mut counts = [0usize; 4];
    for i in 0..opts.instances {
        let mut rng = derive_rng(opts.seed, i as u64);
        let dim = rng.random_range(opts.min_dim..=opts.max_dim);
        let inst = random_feasible_instance(&mut rng, dim);
        let cons = [Some(inst.constraints[0].clone()), Some(inst.constraints[1].clone())];
        let p = CanonicalSubproblem::new(inst.ghat.clone(), cons, inst.delta, inst.h.clone(), cg)?;
        let (case, lambda, x, kkt) = match solve_feasible(&p) {
            Ok(sol) => {
                let kkt = kkt_check(&p, &sol).max_residual();
                (sol.case, sol.lambda, sol.x, kkt)
            }
            Err(Error::DegenerateDual { lambda }) => (DualCase::NoneActive, lambda, boundary_step(&p), f64::NAN),
            Err(e) => return Err(e),
        };
        counts[match case {
            DualCase::BothActive => 0,
            DualCase::OnlyC0Active => 1,
            DualCase::OnlyC1Active => 2,
            _ => 3,
        }] += 1;
        let ours = dot(&p.ghat, &x);
        let oracle = solve_qp(&inst, QpSettings::default())?;
        let gap = (ours - oracle.objective).abs() / oracle.objective.abs().max(1e-12);
        worst_gap = worst_gap.max(gap);
        worst_kkt = worst_kkt.max(if kkt.is_nan() { f64::INFINITY } else { kkt });
        worst_trust = worst_trust.max(0.5 * inst.h.quad_form(&x) / inst.delta - 1.0);
        table.push(format!(
            "{i},{dim},{case},{lambda:e},{ours:e},{:e},{gap:e},{kkt:e},{}",
            oracle.objective, oracle.iterations
        ));
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(VerifyReport {
        suite: Suite::DualSweep,
        checks: vec![
            Check::at_most("max relative objective gap", worst_gap, 1e-4),
            Check::at_most("max KKT residual", worst_kkt, 1e-6),
            Check::at_most("max relative trust-region excess", worst_trust, 1e-8),
            Check::at_most("runtime seconds", seconds, 60.0),
        ],
        table,
        notes: vec![format!(
            "{} instances: both_active {}, only_c0_active {}, only_c1_active {}, none_active {}",
            opts.instances, counts[0], counts[1], counts[2], counts[3]
        )],
    })
}

/// `|a - b| / max(|a|, |b|, floor)`
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Step of the fourth-order central stencil used for gradient checks.
const FD_STEP: f64 = 1e-4;
/// Denominator floor for coordinate-wise relative errors; below it central
/// differences are dominated by rounding.
pub const GRAD_REL_FLOOR: f64 = 1e-6;

fn sample_normal(rng: &mut crate::env::SimRng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_vec(rng: &mut crate::env::SimRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * sample_normal(rng)).collect()
}

/// Largest coordinate-wise relative error of `grad_log_prob` over 64 evenly spaced coordinates.
fn grad_log_prob_error<P: Policy<f64>>(policy: &P, obs: &[f64], action: &P::Action) -> Result<f64> {
    let g = policy.grad_log_prob(obs, action)?;
    let theta = policy.params().to_vec();
    let n = theta.len();
    let mut worst = 0.0f64;
    for k in 0..64.min(n) {
        let i = k * n / 64.min(n);
        let eval = |d: f64| -> Result<f64> {
            let mut p = policy.clone();
            let mut t = theta.clone();
            t[i] += d;
            p.set_params(&t)?;
            p.log_prob(obs, action)
        };
        let h = FD_STEP;
        let fd = (8.0 * (eval(h)? - eval(-h)?) - (eval(2.0 * h)? - eval(-2.0 * h)?)) / (12.0 * h);
        worst = worst.max(relative_error(g[i], fd, GRAD_REL_FLOOR));
    }
    Ok(worst)
}

/// `‖Hv - FD‖ / ‖FD‖` with the finite difference of the mean-KL gradient along `v`.
fn hvp_error<P: Policy<f64>>(policy: &P, states: &[Vec<f64>], v: &[f64]) -> Result<f64> {
    let hv = kl_hessian_vector_product(policy, states, v, 0.0)?;
    let h = 1e-5;
    let shifted = |s: f64| -> Result<Vec<f64>> {
        let mut p = policy.clone();
        let t: Vec<f64> = policy.params().iter().zip(v).map(|(a, b)| a + s * b).collect();
        p.set_params(&t)?;
        grad_mean_kl(&p, policy, states)
    };
    let (gp, gm) = (shifted(h)?, shifted(-h)?);
    let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    let diff: Vec<f64> = hv.iter().zip(&fd).map(|(a, b)| a - b).collect();
    Ok(norm(&diff) / norm(&fd).max(1e-300))
}

/// True relative residual of a CG solve with a 200-iteration budget.
fn cg_residual<O: LinearOperator<f64>>(op: &O, rhs: &[f64]) -> Result<(f64, usize)> {
    let sol = cg_solve(op, rhs, CgSettings { max_iters: 200, tol: 1e-8 })?;
    let r: Vec<f64> = op.apply(&sol.x).iter().zip(rhs).map(|(a, b)| a - b).collect();
    Ok((norm(&r) / norm(rhs), sol.iterations))
}

/// Finite-difference checks of policy gradients and KL curvature, plus CG accuracy.
pub fn grad_check(seeds: u64) -> Result<VerifyReport> {
    let mut table = vec!["fixture,seed,grad_rel_err,hvp_rel_err,cg_residual,cg_iterations".to_string()];
    let (mut worst_grad, mut worst_hvp, mut worst_cg, mut max_iters) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for seed in 0..seeds {
        let mut rng = seeded_rng(seed);
        // Gaussian MLP policy of the navigation tasks (5 inputs, 2 actions)
        let g = GaussianPolicy::<f64>::new(5, 2, &[32, 32], -0.5, &mut rng)?;
        let mut g = g.clone();
        let perturbed: Vec<f64> = g.params().iter().map(|t| t + 0.1 * sample_normal(&mut rng)).collect();
        g.set_params(&perturbed)?;
        let states: Vec<Vec<f64>> = (0..64).map(|_| random_vec(&mut rng, 5, 1.0)).collect();
        let (action, _) = g.sample(&states[0], &mut rng)?;
        let ge = grad_log_prob_error(&g, &states[0], &action)?;
        let v = random_vec(&mut rng, g.param_count(), 1.0);
        let he = hvp_error(&g, &states, &v)?;
        let rhs = random_vec(&mut rng, g.param_count(), 1.0);
        let (cr, ci) = cg_residual(&KlHessian::new(&g, &states, 0.1)?, &rhs)?;
        table.push(format!("gaussian,{seed},{ge:e},{he:e},{cr:e},{ci}"));
        (worst_grad, worst_hvp, worst_cg, max_iters) = (worst_grad.max(ge), worst_hvp.max(he), worst_cg.max(cr), max_iters.max(ci));

        // softmax policy over dense features and one-hot tabular states
        let theta = random_vec(&mut rng, 8 * 4, 1.0);
        let s = SoftmaxPolicy::from_params(8, 4, theta)?;
        let states: Vec<Vec<f64>> = (0..32).map(|_| random_vec(&mut rng, 8, 1.0)).collect();
        let (action, _) = s.sample(&states[0], &mut rng)?;
        let ge = grad_log_prob_error(&s, &states[0], &action)?;
        let v = random_vec(&mut rng, s.param_count(), 1.0);
        let he = hvp_error(&s, &states, &v)?;
        let rhs = random_vec(&mut rng, s.param_count(), 1.0);
        let (cr, ci) = cg_residual(&KlHessian::new(&s, &states, 0.1)?, &rhs)?;
        table.push(format!("softmax,{seed},{ge:e},{he:e},{cr:e},{ci}"));
        (worst_grad, worst_hvp, worst_cg, max_iters) = (worst_grad.max(ge), worst_hvp.max(he), worst_cg.max(cr), max_iters.max(ci));

        // dense SPD matrix
        let n = rng.random_range(5..=50);
        let a = random_vec(&mut rng, n * n, 1.0);
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                h[i * n + j] = (0..n).map(|k| a[k * n + i] * a[k * n + j]).sum::<f64>() / n as f64 + if i == j { 0.5 } else { 0.0 };
            }
        }
        let rhs = random_vec(&mut rng, n, 1.0);
        let (cr, ci) = cg_residual(&DenseMatrix::from_row_major(n, h), &rhs)?;
        table.push(format!("dense{n},{seed},,,{cr:e},{ci}"));
        (worst_cg, max_iters) = (worst_cg.max(cr), max_iters.max(ci));
    }
    Ok(VerifyReport {
        suite: Suite::GradCheck,
        checks: vec![
            Check::at_most("max grad_log_prob relative error", worst_grad, 1e-4),
            Check::at_most("max KL Hessian-vector relative error", worst_hvp, 1e-3),
            Check::at_most("max CG relative residual", worst_cg, 1e-8),
            Check::at_most("max CG iterations", max_iters as f64, 200.0),
        ],
        table,
        notes: vec![format!("{seeds} seeds, 64 coordinates per gradient, step {FD_STEP:e}")],
    })
}

/// SEPS on the chain fixture against the enumeration oracle, judged by exact evaluation.
pub fn tabular_oracle(seed: u64) -> Result<VerifyReport> {
    let cfg = RunConfig::parse("env = chain\nalgorithm = seps\nd0 = 0.8\nd1 = 0.1\n", &[])?;
    debug_assert_eq!(cfg.env.name, EnvName::Chain);
    debug_assert_eq!(cfg.algo.algorithm, Algorithm::Seps);
    let env = chain_env(&cfg.env, &cfg.algo)?;
    let (d0, d1) = (cfg.algo.d0.unwrap_or(0.0), cfg.algo.d1.unwrap_or(0.0));
    let oracle = enumerate_constrained_optimum(&env, d0, d1)?;
    let best = oracle.returns.clone().ok_or_else(|| Error::Numerical("chain fixture has no feasible policy".into()))?;
    let start = Instant::now();
    let out = train(&env, SoftmaxPolicy::uniform(env.n_states(), env.n_actions()), &cfg.algo, seed)?;
    let seconds = start.elapsed().as_secs_f64();
    let j = exact_policy_returns(&env, &out.policy.table())?;
    let gap = (best.j_u - j.j_u).abs() / best.j_u.abs();
    let mut table = vec!["source,j_u,j_r,j_c1".to_string()];
    table.push(format!("oracle,{},{},{}", best.j_u, best.j_r, best.j_c[0]));
    table.push(format!("seps,{},{},{}", j.j_u, j.j_r, j.j_c[0]));
    let mut notes = vec![format!("oracle policy {:?} from {} candidates", oracle.best.unwrap_or_default(), oracle.enumerated)];
    if let Some(h) = out.halted {
        notes.push(format!("training halted: {h}"));
    }
    let spec = env.spec();
    notes.push(format!("{} epochs x {} steps, gamma {}", cfg.algo.epochs, cfg.algo.steps_per_epoch, spec.gamma));
    Ok(VerifyReport {
        suite: Suite::TabularOracle,
        checks: vec![
            Check::at_most("relative J_u gap to oracle", gap, 0.05),
            Check::at_least("exact J_R minus (d0 - 0.02)", j.j_r - (d0 - 0.02), 0.0),
            Check::at_most("exact J_C1 minus (d1 + 0.02)", j.j_c[0] - (d1 + 0.02), 0.0),
            Check::at_most("runtime seconds", seconds, 300.0),
        ],
        table,
        notes,
    })
}

pub fn run_suite(suite: Suite) -> Result<VerifyReport> {
    match suite {
        Suite::DualSweep => dual_sweep(DualSweepOptions::default()),
        Suite::GradCheck => grad_check(10),
        Suite::TabularOracle => tabular_oracle(0),
    }
}

/// Runs `suite`, writing `verify-<suite>.txt` and `verify-<suite>.csv` into `out_dir`.
pub fn cmd_verify(suite: Suite, out_dir: &Path) -> Result<(VerifyReport, Vec<PathBuf>)> {
    let report = run_suite(suite)?;
    fs::create_dir_all(out_dir)?;
    let txt = out_dir.join(format!("verify-{suite}.txt"));
    let csv = out_dir.join(format!("verify-{suite}.csv"));
    fs::write(&txt, report.summary())?;
    fs::write(&csv, report.table.join("\n") + "\n")?;
    Ok((report, vec![txt, csv]))
}
