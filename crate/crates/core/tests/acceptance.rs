//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! `SEPS_ACCEPTANCE=1,4` restricts the run to the listed criteria.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use seps::dual_solver::qp_oracle::{random_feasible_instance, solve_qp, QpInstance, QpSettings};
use seps::dual_solver::{solve_feasible, solve_recovery, CanonicalSubproblem, DualCase};
use seps::engine::{train_with, Branch};
use seps::env::{derive_rng, seeded_rng, SimRng, TabularCmdp};
use seps::harness::{chain_env, cmd_train, read_checkpoint, read_metrics, MetricsRow, RunConfig};
use seps::linalg::{DenseMatrix, LinearOperator};
use seps::oracle::enumerate_constrained_optimum;
use seps::policy::{grad_mean_kl, GaussianPolicy, Policy, SoftmaxPolicy};
use seps::trust_region::{cg_solve, kl_hessian_vector_product, CgSettings, KlHessian};

// tolerances pinned from the acceptance criteria
const SWEEP_INSTANCES: usize = 1000;
const SWEEP_REL_GAP: f64 = 1e-4;
const SWEEP_KKT: f64 = 1e-6;
const SWEEP_SECONDS: f64 = 60.0;
const CLOSED_FORM_TOL: f64 = 1e-9;
const HOMOGENEITY_TOL: f64 = 1e-12;
const GRAD_REL: f64 = 1e-4;
const GRAD_COORDS: usize = 64;
const GRAD_SEEDS: u64 = 10;
const HVP_REL: f64 = 1e-3;
const CG_RESIDUAL: f64 = 1e-8;
const CG_MAX_ITERS: usize = 200;
const ORACLE_GAP: f64 = 0.05;
const TABULAR_SLACK: f64 = 0.02;
const TABULAR_SECONDS: f64 = 300.0;
const HAZARD_SECONDS: f64 = 1200.0;
const FINAL_WINDOW: usize = 10;
const KL_FACTOR: f64 = 1.5;
const SEEDS: u64 = 3;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn workspace(rel: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn dense(m: &DenseMatrix<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, m.as_slice())
}

fn normal(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}

// ---------------------------------------------------------------- criterion 1

/// KKT residuals of `min ĝᵀx s.t. bᵢᵀx + cᵢ ≤ 0, ½xᵀHx ≤ δ` computed with dense algebra.
fn kkt_residual(inst: &QpInstance, h: &DMatrix<f64>, x: &DVector<f64>, lambda: f64, nu: [f64; 2]) -> f64 {
    let g = DVector::from_column_slice(&inst.ghat);
    let mut station = &g + h * x * lambda;
    let quad = 0.5 * x.dot(&(h * x)) - inst.delta;
    let mut primal = quad.max(0.0);
    let mut comp = (lambda * quad).abs();
    let mut dual = (-lambda).max(0.0);
    for ((b, c), &n) in inst.constraints.iter().zip(&nu) {
        let b = DVector::from_column_slice(b);
        station += &b * n;
        let lin = b.dot(x) + c;
        primal = primal.max(lin);
        comp = comp.max((n * lin).abs());
        dual = dual.max(-n);
    }
    station.norm().max(primal).max(comp).max(dual)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let cg = CgSettings { max_iters: 500, tol: 1e-13 };
    let (mut worst_gap, mut worst_kkt) = (0.0f64, 0.0f64);
    let mut cases = std::collections::BTreeMap::new();
    for i in 0..SWEEP_INSTANCES {
        let mut rng = derive_rng(1, i as u64);
        let dim = rng.random_range(5..=50);
        let inst = random_feasible_instance(&mut rng, dim);
        let cons = [Some(inst.constraints[0].clone()), Some(inst.constraints[1].clone())];
        let p = match CanonicalSubproblem::new(inst.ghat.clone(), cons, inst.delta, inst.h.clone(), cg) {
            Ok(p) => p,
            Err(e) => return verdict(false, format!("instance {i}: {e}")),
        };
        let sol = match solve_feasible(&p) {
            Ok(s) => s,
            Err(e) => return verdict(false, format!("instance {i}: {e}")),
        };
        *cases.entry(sol.case.as_str()).or_insert(0) += 1;
        let h = dense(&inst.h, dim);
        let x = DVector::from_column_slice(&sol.x);
        let ours = DVector::from_column_slice(&inst.ghat).dot(&x);
        let oracle = match solve_qp(&inst, QpSettings::default()) {
            Ok(o) => o,
            Err(e) => return verdict(false, format!("oracle failed on instance {i}: {e}")),
        };
        worst_gap = worst_gap.max((ours - oracle.objective).abs() / oracle.objective.abs().max(1e-12));
        worst_kkt = worst_kkt.max(kkt_residual(&inst, &h, &x, sol.lambda, [sol.nu0, sol.nu1]));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_gap <= SWEEP_REL_GAP && worst_kkt <= SWEEP_KKT && secs <= SWEEP_SECONDS,
        format!("{SWEEP_INSTANCES} instances, worst rel gap {worst_gap:.2e}, worst KKT {worst_kkt:.2e}, {secs:.1}s, cases {cases:?}"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn spd(rng: &mut SimRng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| normal(rng));
    a.transpose() * &a / n as f64 + DMatrix::identity(n, n) * 0.5
}

fn to_dense_op(h: &DMatrix<f64>) -> DenseMatrix<f64> {
    let n = h.nrows();
    DenseMatrix::from_row_major(n, (0..n * n).map(|k| h[(k / n, k % n)]).collect())
}

fn criterion_2() -> Verdict {
    let cg = CgSettings { max_iters: 500, tol: 1e-14 };
    let (mut lam_err, mut boundary_err, mut step_err, mut rec_err, mut homog_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..10 {
        let mut rng = seeded_rng(100 + seed);
        let n = 5 + 4 * seed as usize;
        let h = spd(&mut rng, n);
        let hinv = h.clone().try_inverse().expect("SPD");
        let g: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let delta = 0.01 + 0.1 * seed as f64;
        let gv = DVector::from_column_slice(&g);
        let q = gv.dot(&(&hinv * &gv));

        // both constraints far from binding
        let slack: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let p = CanonicalSubproblem::new(g.clone(), [Some((slack.clone(), -1e6)), Some((slack, -1e6))], delta, to_dense_op(&h), cg).unwrap();
        let sol = solve_feasible(&p).unwrap();
        if sol.case != DualCase::NoneActive {
            return verdict(false, format!("seed {seed}: expected none_active, got {}", sol.case));
        }
        let lambda = (q / (2.0 * delta)).sqrt();
        lam_err = lam_err.max((sol.lambda - lambda).abs() / lambda);
        let x = DVector::from_column_slice(&sol.x);
        let want = -(&hinv * &gv) / lambda;
        step_err = step_err.max((&x - &want).norm() / want.norm());
        boundary_err = boundary_err.max((0.5 * x.dot(&(&h * &x)) - delta).abs() / delta);

        // recovery step and its invariance to rescaling b
        let b: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let rec = solve_recovery(&b, 0.3, &to_dense_op(&h), delta, 1, cg).unwrap();
        let xr = DVector::from_column_slice(&rec.x);
        rec_err = rec_err.max((0.5 * xr.dot(&(&h * &xr)) - delta).abs() / delta);
        for k in [1e-3, 0.37, 12.5] {
            let bk: Vec<f64> = b.iter().map(|v| v * k).collect();
            let other = solve_recovery(&bk, 0.3, &to_dense_op(&h), delta, 1, cg).unwrap();
            let d = rec.x.iter().zip(&other.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            homog_err = homog_err.max(d / xr.amax().max(1.0));
        }
    }
    verdict(
        lam_err <= CLOSED_FORM_TOL && boundary_err <= CLOSED_FORM_TOL && rec_err <= CLOSED_FORM_TOL && homog_err <= HOMOGENEITY_TOL,
        format!(
            "lambda rel err {lam_err:.1e}, step rel err {step_err:.1e}, boundary residual {boundary_err:.1e}, recovery boundary {rec_err:.1e}, homogeneity {homog_err:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 3

fn fd_grad_error<P: Policy<f64>>(policy: &P, obs: &[f64], action: &P::Action) -> f64 {
    let g = policy.grad_log_prob(obs, action).unwrap();
    let theta = policy.params().to_vec();
    let n = theta.len();
    let h = 1e-4;
    let mut worst = 0.0f64;
    for k in 0..GRAD_COORDS.min(n) {
        let i = k * n / GRAD_COORDS.min(n);
        let f = |d: f64| {
            let mut p = policy.clone();
            let mut t = theta.clone();
            t[i] += d;
            p.set_params(&t).unwrap();
            p.log_prob(obs, action).unwrap()
        };
        let fd = (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h);
        worst = worst.max((g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6));
    }
    worst
}

fn fd_hvp_error<P: Policy<f64>>(policy: &P, states: &[Vec<f64>], v: &[f64]) -> f64 {
    let hv = kl_hessian_vector_product(policy, states, v, 0.0).unwrap();
    let eps = 1e-5;
    let grad_at = |s: f64| {
        let mut p = policy.clone();
        let t: Vec<f64> = policy.params().iter().zip(v).map(|(a, b)| a + s * b).collect();
        p.set_params(&t).unwrap();
        DVector::from_vec(grad_mean_kl(&p, policy, states).unwrap())
    };
    let fd = (grad_at(eps) - grad_at(-eps)) / (2.0 * eps);
    (DVector::from_vec(hv) - &fd).norm() / fd.norm()
}

fn cg_check<O: LinearOperator<f64>>(op: &O, rhs: &[f64]) -> (f64, usize) {
    let sol = cg_solve(op, rhs, CgSettings { max_iters: CG_MAX_ITERS, tol: CG_RESIDUAL }).unwrap();
    let r = DVector::from_vec(op.apply(&sol.x)) - DVector::from_column_slice(rhs);
    (r.norm() / DVector::from_column_slice(rhs).norm(), sol.iterations)
}

fn criterion_3() -> Verdict {
    let (mut grad, mut hvp, mut cg, mut iters) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    let vec_of = |rng: &mut SimRng, n: usize| -> Vec<f64> { (0..n).map(|_| normal(rng)).collect() };
    for seed in 0..GRAD_SEEDS {
        let mut rng = seeded_rng(500 + seed);
        let mut g = GaussianPolicy::<f64>::new(5, 2, &[32, 32], -0.5, &mut rng).unwrap();
        let jitter: Vec<f64> = g.params().iter().map(|t| t + 0.1 * normal(&mut rng)).collect();
        g.set_params(&jitter).unwrap();
        let states: Vec<Vec<f64>> = (0..64).map(|_| vec_of(&mut rng, 5)).collect();
        let (a, _) = g.sample(&states[0], &mut rng).unwrap();
        grad = grad.max(fd_grad_error(&g, &states[0], &a));
        let v = vec_of(&mut rng, g.param_count());
        hvp = hvp.max(fd_hvp_error(&g, &states, &v));
        let rhs = vec_of(&mut rng, g.param_count());
        let (r, k) = cg_check(&KlHessian::new(&g, &states, 0.1).unwrap(), &rhs);
        (cg, iters) = (cg.max(r), iters.max(k));

        let table: Vec<Vec<f64>> = (0..5).map(|_| vec_of(&mut rng, 2)).collect();
        let s = SoftmaxPolicy::from_logit_table(&table).unwrap();
        let onehots: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let (a, _) = s.sample(&onehots[seed as usize % 5], &mut rng).unwrap();
        grad = grad.max(fd_grad_error(&s, &onehots[seed as usize % 5], &a));
        let v = vec_of(&mut rng, s.param_count());
        hvp = hvp.max(fd_hvp_error(&s, &onehots, &v));
        let rhs = vec_of(&mut rng, s.param_count());
        let (r, k) = cg_check(&KlHessian::new(&s, &onehots, 0.1).unwrap(), &rhs);
        (cg, iters) = (cg.max(r), iters.max(k));

        let n = 5 + 5 * seed as usize;
        let h = spd(&mut rng, n);
        let rhs = vec_of(&mut rng, n);
        let (r, k) = cg_check(&to_dense_op(&h), &rhs);
        (cg, iters) = (cg.max(r), iters.max(k));
    }
    verdict(
        grad <= GRAD_REL && hvp <= HVP_REL && cg <= CG_RESIDUAL && iters <= CG_MAX_ITERS,
        format!("grad_log_prob rel err {grad:.1e}, KL HVP rel err {hvp:.1e}, CG residual {cg:.1e} in at most {iters} iterations"),
    )
}

// ---------------------------------------------------------------- criteria 4 and 8

/// The chain fixture rebuilt from its documented edges: (from, action, to, R_A, C_1, u_H).
const CHAIN_EDGES: [(usize, usize, usize, f64, f64, f64); 10] = [
    (0, 0, 1, 0.0, 0.0, 0.0),
    (0, 1, 3, 0.0, 0.0, 0.0),
    (1, 0, 4, 1.0, 0.0, 1.0),
    (1, 1, 2, -3.0, 0.0, 0.5),
    (2, 0, 4, 1.0, 0.0, 1.0),
    (2, 1, 2, -0.1, 0.0, 0.0),
    (3, 0, 4, 1.0, 4.0, 1.3),
    (3, 1, 1, -0.1, 0.0, 0.0),
    (4, 0, 4, 0.0, 0.0, 0.0),
    (4, 1, 4, 0.0, 0.0, 0.0),
];
const CHAIN_GAMMA: f64 = 0.9;

/// `(J_u, J_R, J_C1)` of `pi[s][a]` by fixed-point iteration from state 0; state 4 is absorbing.
fn chain_returns(pi: &[Vec<f64>]) -> [f64; 3] {
    let mut v = [[0.0f64; 5]; 3];
    for _ in 0..2000 {
        let mut next = [[0.0f64; 5]; 3];
        for &(s, a, t, r, c, u) in &CHAIN_EDGES {
            if s == 4 {
                continue;
            }
            for (k, reward) in [u, r, c].into_iter().enumerate() {
                next[k][s] += pi[s][a] * (reward + CHAIN_GAMMA * v[k][t]);
            }
        }
        v = next;
    }
    [v[0][0], v[1][0], v[2][0]]
}

/// Best deterministic `J_u` subject to the limits, by enumeration.
fn chain_oracle(d0: f64, d1: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for code in 0..32u32 {
        let pi: Vec<Vec<f64>> = (0..5).map(|s| if code >> s & 1 == 1 { vec![0.0, 1.0] } else { vec![1.0, 0.0] }).collect();
        let [u, r, c] = chain_returns(&pi);
        if r >= d0 && c <= d1 {
            best = best.max(u);
        }
    }
    best
}

struct ChainRun {
    j: [f64; 3],
    metrics: Vec<u8>,
    rows: Vec<MetricsRow>,
    secs: f64,
}

fn chain_run(root: &Path) -> Result<ChainRun, String> {
    let cfg = RunConfig::load(Some(&workspace("configs/chain.conf")), &[("output".into(), root.display().to_string())])
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let summary = cmd_train(&cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let ckpt = read_checkpoint(&summary.outcomes[0].final_checkpoint).map_err(|e| e.to_string())?;
    let policy = SoftmaxPolicy::from_params(5, 2, ckpt.params.theta).map_err(|e| e.to_string())?;
    Ok(ChainRun {
        j: chain_returns(&policy.table()),
        metrics: std::fs::read(&summary.metrics).map_err(|e| e.to_string())?,
        rows: read_metrics(&summary.metrics).map_err(|e| e.to_string())?,
        secs,
    })
}

fn criterion_4(run: &Result<ChainRun, String>) -> Verdict {
    let run = match run {
        Ok(r) => r,
        Err(e) => return verdict(false, e.clone()),
    };
    let (d0, d1) = (0.8, 0.1);
    let oracle = chain_oracle(d0, d1);
    let lib = enumerate_constrained_optimum(&TabularCmdp::chain_fixture(), d0, d1).unwrap();
    let lib_u = lib.returns.map_or(f64::NAN, |j| j.j_u);
    let [u, r, c] = run.j;
    let gap = (u - oracle).abs() / oracle.abs();
    verdict(
        gap <= ORACLE_GAP && r >= d0 - TABULAR_SLACK && c <= d1 + TABULAR_SLACK && run.secs < TABULAR_SECONDS && (lib_u - oracle).abs() < 1e-9,
        format!(
            "oracle J_u {oracle:.4} (library {lib_u:.4}); trained exact J_u {u:.4} (gap {:.2}%), J_R {r:.4}, J_C1 {c:.4}, {} epochs in {:.0}s",
            100.0 * gap,
            run.rows.len(),
            run.secs
        ),
    )
}

fn criterion_8(first: &Result<ChainRun, String>, second: &Result<ChainRun, String>) -> Verdict {
    match (first, second) {
        (Ok(a), Ok(b)) => verdict(
            a.metrics == b.metrics,
            format!("two runs of the tabular config: {} and {} bytes, identical: {}", a.metrics.len(), b.metrics.len(), a.metrics == b.metrics),
        ),
        (Err(e), _) | (_, Err(e)) => verdict(false, e.clone()),
    }
}

// ---------------------------------------------------------------- criteria 5 and 6

/// Mean over seeds of the last-window mean of `column`.
fn final_average(rows: &[MetricsRow], column: &str) -> f64 {
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.dedup();
    let per_seed: Vec<f64> = seeds
        .iter()
        .map(|&s| {
            let series: Vec<f64> = rows.iter().filter(|r| r.seed == s).map(|r| r.metric(column).unwrap()).collect();
            let tail = &series[series.len().saturating_sub(FINAL_WINDOW)..];
            tail.iter().sum::<f64>() / tail.len() as f64
        })
        .collect();
    per_seed.iter().sum::<f64>() / per_seed.len() as f64
}

fn nav_runs(conf: &str, algos: &[&str], root: &Path) -> Result<Vec<(String, Vec<MetricsRow>)>, String> {
    algos
        .iter()
        .map(|algo| {
            let cfg = RunConfig::load(
                Some(&workspace(conf)),
                &[
                    ("algorithm".into(), algo.to_string()),
                    ("seeds".into(), SEEDS.to_string()),
                    ("output".into(), root.display().to_string()),
                ],
            )
            .map_err(|e| e.to_string())?;
            let summary = cmd_train(&cfg).map_err(|e| format!("{algo}: {e}"))?;
            Ok((algo.to_string(), read_metrics(&summary.metrics).map_err(|e| e.to_string())?))
        })
        .collect()
}

fn lookup<'a>(runs: &'a [(String, Vec<MetricsRow>)], algo: &str) -> &'a [MetricsRow] {
    &runs.iter().find(|(a, _)| a == algo).expect("algorithm was run").1
}

fn criterion_5(runs: &Result<Vec<(String, Vec<MetricsRow>)>, String>, secs: f64) -> Verdict {
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return verdict(false, e.clone()),
    };
    let d1 = 1.0;
    let c = |a: &str| final_average(lookup(runs, a), "j_c1");
    let u = |a: &str| final_average(lookup(runs, a), "j_u");
    let pass = c("seps") <= 1.1 * d1 && c("hum") > 1.5 * d1 && c("eps") > 1.1 * d1 && u("seps") > u("agt") && secs <= HAZARD_SECONDS;
    verdict(
        pass,
        format!(
            "J_C1 seps {:.3} hum {:.3} eps {:.3} (d1 {d1}); J_u seps {:.3} agt {:.3}; {secs:.0}s",
            c("seps"),
            c("hum"),
            c("eps"),
            u("seps"),
            u("agt")
        ),
    )
}

fn criterion_6(runs: &Result<Vec<(String, Vec<MetricsRow>)>, String>) -> Verdict {
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return verdict(false, e.clone()),
    };
    let (d0, d1) = (0.0, 2.5);
    let r = |a: &str| final_average(lookup(runs, a), "j_r");
    let c = |a: &str| final_average(lookup(runs, a), "j_c1");
    let variants = ["seps", "seps_no_c0", "seps_lin_no_c0"];
    let pass = r("seps") >= d0 && r("seps_no_c0") < r("seps") && variants.iter().all(|a| c(a) <= 1.1 * d1);
    verdict(
        pass,
        format!(
            "J_R seps {:.3} seps_no_c0 {:.3}; J_C1 seps {:.3} seps_no_c0 {:.3} seps_lin_no_c0 {:.3} (d0 {d0}, d1 {d1})",
            r("seps"),
            r("seps_no_c0"),
            c("seps"),
            c("seps_no_c0"),
            c("seps_lin_no_c0")
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

/// Moving average over the last three entries ending at `i`.
fn moving_average(series: &[f64], i: usize) -> f64 {
    let lo = i.saturating_sub(2);
    series[lo..=i].iter().sum::<f64>() / (i - lo + 1) as f64
}

fn criterion_7(other_kls: &[f64]) -> Verdict {
    let (d0, d1) = (0.8, 0.1);
    let cfg = RunConfig::load(Some(&workspace("configs/chain.conf")), &[("epochs".into(), "150".into())]).unwrap();
    let env = chain_env(&cfg.env, &cfg.algo).unwrap();
    let mut failures = Vec::new();
    let mut kls: Vec<f64> = other_kls.to_vec();
    let mut reached = Vec::new();
    let mut checked = 0usize;
    for seed in 0..SEEDS {
        // pretrained to cut through the hazard
        let mut table = vec![vec![0.0, 0.0]; 5];
        table[0] = vec![-2.0, 2.0];
        let policy = SoftmaxPolicy::from_logit_table(&table).unwrap();
        // exact surpluses `d0 - J_R` and `J_C1 - d1`, one entry per epoch plus the initial policy
        let surplus = |pi: &[Vec<f64>]| {
            let [_, r, c] = chain_returns(pi);
            [d0 - r, c - d1]
        };
        let mut exact: [Vec<f64>; 2] = {
            let s = surplus(&policy.table());
            [vec![s[0]], vec![s[1]]]
        };
        let mut feasible_at = None;
        let mut violations = Vec::new();
        let out = train_with(&env, policy, &cfg.algo, seed, |report, p| {
            if report.accepted {
                kls.push(report.kl);
            }
            let s = surplus(&p.table());
            exact[0].push(s[0]);
            exact[1].push(s[1]);
            let k = exact[0].len() - 1;
            if feasible_at.is_none() {
                if report.branch == Branch::Recovery {
                    for (i, series) in exact.iter().enumerate() {
                        if report.surpluses[i].is_some_and(|c| c > 0.0) {
                            checked += 1;
                            if moving_average(series, k) >= moving_average(series, k - 1) {
                                violations.push((report.epoch, i));
                            }
                        }
                    }
                }
                if s[1] <= 0.0 {
                    feasible_at = Some(report.epoch);
                }
            }
            Ok(())
        })
        .unwrap();
        if out.halted.is_some() {
            failures.push(format!("seed {seed} halted"));
        }
        match feasible_at {
            Some(e) => reached.push(e),
            None => failures.push(format!("seed {seed} never reached J_C1 <= {d1}")),
        }
        if !violations.is_empty() {
            failures.push(format!("seed {seed}: moving average rose at (epoch, constraint) {violations:?}"));
        }
    }
    let max_kl = kls.iter().copied().fold(0.0, f64::max);
    let kl_ok = max_kl <= KL_FACTOR * cfg.algo.delta;
    verdict(
        failures.is_empty() && kl_ok,
        format!(
            "J_C1 <= d1 after epochs {reached:?}; {checked} violated-constraint checks; max accepted KL {max_kl:.4} over {} steps (bound {}){}",
            kls.len(),
            KL_FACTOR * cfg.algo.delta,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn main() {
    // `cargo test` passes harness flags; `--list` must not run anything
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let only: Option<Vec<usize>> = std::env::var("SEPS_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut results: Vec<(usize, Verdict)> = Vec::new();
    let root = tempfile::tempdir().expect("temp dir");
    let mut kls: Vec<f64> = Vec::new();
    let mut gather = |rows: &[MetricsRow]| kls.extend(rows.iter().filter(|r| r.accepted).map(|r| r.kl));

    if wanted(1) {
        results.push((1, criterion_1()));
    }
    if wanted(2) {
        results.push((2, criterion_2()));
    }
    if wanted(3) {
        results.push((3, criterion_3()));
    }
    if wanted(4) || wanted(8) {
        let first = chain_run(&root.path().join("first"));
        if let Ok(r) = &first {
            gather(&r.rows);
        }
        if wanted(4) {
            results.push((4, criterion_4(&first)));
        }
        if wanted(8) {
            let second = chain_run(&root.path().join("second"));
            results.push((8, criterion_8(&first, &second)));
        }
    }
    if wanted(5) {
        let start = Instant::now();
        let runs = nav_runs("configs/hazard-nav.conf", &["seps", "hum", "eps", "agt"], &root.path().join("hazard"));
        let secs = start.elapsed().as_secs_f64();
        if let Ok(r) = &runs {
            r.iter().for_each(|(_, rows)| gather(rows));
        }
        results.push((5, criterion_5(&runs, secs)));
    }
    if wanted(6) {
        let runs = nav_runs("configs/button-nav.conf", &["seps", "seps_no_c0", "seps_lin_no_c0"], &root.path().join("button"));
        if let Ok(r) = &runs {
            r.iter().for_each(|(_, rows)| gather(rows));
        }
        results.push((6, criterion_6(&runs)));
    }
    if wanted(7) {
        results.push((7, criterion_7(&kls)));
    }

    results.sort_by_key(|(n, _)| *n);
    let mut failed = false;
    for (n, v) in &results {
        println!("criterion {n}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed |= !v.pass;
    }
    if failed {
        std::process::exit(1);
    }
}
