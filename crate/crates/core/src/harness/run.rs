//! Training orchestration: one run directory per config, one series per seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use super::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use super::config::{EnvName, EnvParams, RunConfig};
use super::metrics::{merge_metrics, MetricsRow, MetricsWriter};
use crate::engine::{train_with, AlgoConfig, EpochReport};
use crate::env::{derive_rng, ButtonNav, ButtonNavConfig, Environment, HazardNav, HazardNavConfig, TabularCmdp};
use crate::error::{Error, Result};
use crate::policy::{GaussianPolicy, Policy, PolicyKind, SoftmaxPolicy};

/// Stream index reserved for policy initialization.
const POLICY_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub reports: Vec<EpochReport>,
    pub halted: Option<String>,
    pub final_checkpoint: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub metrics: PathBuf,
    pub outcomes: Vec<SeedOutcome>,
}

pub fn hazard_env(p: &EnvParams, algo: &AlgoConfig) -> Result<HazardNav> {
    let mut c = HazardNavConfig::default();
    c.horizon = p.horizon.unwrap_or(c.horizon);
    c.gamma = p.gamma.unwrap_or(c.gamma);
    c.step_scale = p.step_scale.unwrap_or(c.step_scale);
    c.d0 = algo.d0.unwrap_or(c.d0);
    c.d1 = algo.d1.unwrap_or(c.d1);
    HazardNav::new(c)
}

pub fn button_env(p: &EnvParams, algo: &AlgoConfig) -> Result<ButtonNav> {
    let mut c = ButtonNavConfig::default();
    c.horizon = p.horizon.unwrap_or(c.horizon);
    c.gamma = p.gamma.unwrap_or(c.gamma);
    c.step_scale = p.step_scale.unwrap_or(c.step_scale);
    c.d0 = algo.d0.unwrap_or(c.d0);
    c.d1 = algo.d1.unwrap_or(c.d1);
    ButtonNav::new(c)
}

pub fn chain_env(p: &EnvParams, algo: &AlgoConfig) -> Result<TabularCmdp> {
    if p.step_scale.is_some() {
        return Err(Error::Config("`env.step_scale` does not apply to chain".into()));
    }
    let base = TabularCmdp::chain_fixture();
    let spec = base.spec().clone();
    let mut env = base.with_limits(vec![algo.d0.unwrap_or(spec.limits[0]), algo.d1.unwrap_or(spec.limits[1])])?;
    if p.horizon.is_some() || p.gamma.is_some() {
        env = env.with_timing(p.gamma.unwrap_or(spec.gamma), p.horizon.unwrap_or(spec.horizon))?;
    }
    Ok(env)
}

fn initial_checkpoint(cfg: &RunConfig) -> Result<Option<Checkpoint>> {
    cfg.init_checkpoint.as_deref().map(read_checkpoint).transpose()
}

fn gaussian_factory(cfg: &RunConfig, obs_dim: usize, action_dim: usize) -> Result<impl Fn(u64) -> Result<GaussianPolicy<f64>> + Sync + '_> {
    let init = initial_checkpoint(cfg)?;
    if let Some(c) = &init {
        match &c.params.kind {
            PolicyKind::Gaussian { arch } if arch.input_dim() == obs_dim && arch.output_dim() == action_dim => {}
            other => return Err(Error::Config(format!("checkpoint policy `{}` does not fit this environment", other.describe()))),
        }
    }
    Ok(move |seed: u64| match &init {
        Some(c) => {
            let PolicyKind::Gaussian { arch } = &c.params.kind else { unreachable!("checked above") };
            GaussianPolicy::from_params(arch.clone(), c.params.theta.clone())
        }
        None => GaussianPolicy::new(obs_dim, action_dim, &cfg.policy_hidden, cfg.init_log_std, &mut derive_rng(seed, POLICY_STREAM)),
    })
}

fn softmax_factory(cfg: &RunConfig, features: usize, actions: usize) -> Result<impl Fn(u64) -> Result<SoftmaxPolicy<f64>> + Sync> {
    let init = initial_checkpoint(cfg)?;
    if let Some(c) = &init {
        if c.params.kind != (PolicyKind::Softmax { features, actions }) {
            return Err(Error::Config(format!("checkpoint policy `{}` does not fit this environment", c.params.kind.describe())));
        }
    }
    Ok(move |_seed: u64| match &init {
        Some(c) => SoftmaxPolicy::from_params(features, actions, c.params.theta.clone()),
        None => Ok(SoftmaxPolicy::uniform(features, actions)),
    })
}

fn part_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("metrics.seed{seed}.part.csv"))
}

fn train_seed<E, P>(env: &E, policy: P, cfg: &RunConfig, seed: u64, dir: &Path) -> Result<SeedOutcome>
where
    E: Environment,
    P: Policy<f64, Action = E::Action>,
{
    let mut writer = MetricsWriter::create(&part_path(dir, seed))?;
    let ckpt_dir = dir.join("checkpoints");
    let algorithm = cfg.algo.algorithm.as_str();
    let every = cfg.checkpoint_every;
    let outcome = train_with(env, policy, &cfg.algo, seed, |report, policy| {
        writer.write(&MetricsRow::from_report(&cfg.run_id, algorithm, seed, report))?;
        if every > 0 && (report.epoch + 1) % every == 0 {
            let path = ckpt_dir.join(format!("seed{seed}_epoch{}.ckpt", report.epoch));
            write_checkpoint(&path, &Checkpoint { params: policy.to_params(), seed, epoch: report.epoch })?;
        }
        Ok(())
    })?;
    let final_checkpoint = ckpt_dir.join(format!("seed{seed}_final.ckpt"));
    let epoch = outcome.reports.last().map_or(0, |r| r.epoch);
    write_checkpoint(&final_checkpoint, &Checkpoint { params: outcome.policy.to_params(), seed, epoch })?;
    Ok(SeedOutcome { seed, reports: outcome.reports, halted: outcome.halted, final_checkpoint })
}

fn train_seeds<E, P, F>(env: &E, make: F, cfg: &RunConfig, dir: &Path) -> Result<Vec<SeedOutcome>>
where
    E: Environment,
    P: Policy<f64, Action = E::Action>,
    F: Fn(u64) -> Result<P> + Sync,
{
    let one = |seed: u64| train_seed(env, make(seed)?, cfg, seed, dir);
    if cfg.parallel_seeds {
        thread::scope(|scope| {
            let handles: Vec<_> = cfg.seed_list().into_iter().map(|s| scope.spawn(move || one(s))).collect();
            handles.into_iter().map(|h| h.join().expect("seed worker panicked")).collect()
        })
    } else {
        cfg.seed_list().into_iter().map(one).collect()
    }
}

/// Trains every seed of `cfg`, writing `config.txt`, `metrics.csv` and checkpoints
/// under `output/run_id`. A halted seed still gets its metrics written, then the
/// run reports [`Error::Halted`].
pub fn cmd_train(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.run_dir();
    fs::create_dir_all(dir.join("checkpoints"))?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    let outcomes = match cfg.env.name {
        EnvName::HazardNav => {
            let env = hazard_env(&cfg.env, &cfg.algo)?;
            train_seeds(&env, gaussian_factory(cfg, env.observation_dim(), 2)?, cfg, &dir)
        }
        EnvName::ButtonNav => {
            let env = button_env(&cfg.env, &cfg.algo)?;
            train_seeds(&env, gaussian_factory(cfg, env.observation_dim(), 2)?, cfg, &dir)
        }
        EnvName::Chain => {
            let env = chain_env(&cfg.env, &cfg.algo)?;
            train_seeds(&env, softmax_factory(cfg, env.n_states(), env.n_actions())?, cfg, &dir)
        }
    };
    let parts: Vec<PathBuf> = cfg.seed_list().into_iter().map(|s| part_path(&dir, s)).collect();
    let outcomes = outcomes?;
    let metrics = dir.join("metrics.csv");
    merge_metrics(&parts, &metrics)?;
    for p in &parts {
        fs::remove_file(p)?;
    }
    let halted: Vec<String> = outcomes
        .iter()
        .filter_map(|o| o.halted.as_ref().map(|h| format!("seed {}: {h}", o.seed)))
        .collect();
    if !halted.is_empty() {
        return Err(Error::Halted(halted.join("; ")));
    }
    Ok(RunSummary { dir, metrics, outcomes })
}
