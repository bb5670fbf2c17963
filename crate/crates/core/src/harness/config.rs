//! Plain-text `key = value` run configuration with `--key value` overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::engine::{AlgoConfig, Algorithm, RecoveryMode};
use crate::error::{Error, Result};
use crate::estimation::ReturnKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvName {
    HazardNav,
    ButtonNav,
    /// Five-state tabular corridor with an exact oracle.
    Chain,
}

impl EnvName {
    pub const ALL: [EnvName; 3] = [EnvName::HazardNav, EnvName::ButtonNav, EnvName::Chain];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::HazardNav => "hazard-nav",
            Self::ButtonNav => "button-nav",
            Self::Chain => "chain",
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown environment `{s}`")))
    }
}

/// Environment tag plus optional overrides of its built-in parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    pub name: EnvName,
    pub horizon: Option<usize>,
    pub gamma: Option<f64>,
    /// Navigation tasks only.
    pub step_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvParams,
    pub algo: AlgoConfig,
    pub seed: u64,
    /// Seeds `seed, seed + 1, ..., seed + seeds - 1`.
    pub seeds: usize,
    pub parallel_seeds: bool,
    pub output: PathBuf,
    pub run_id: String,
    /// Write a checkpoint every this many epochs (0: final only).
    pub checkpoint_every: usize,
    /// Hidden layers of the Gaussian policy (navigation tasks).
    pub policy_hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Start from a saved policy instead of a fresh one.
    pub init_checkpoint: Option<PathBuf>,
}

impl RunConfig {
    /// Tuned defaults for `env`; constraint limits stay unset.
    pub fn preset(env: EnvName, algorithm: Algorithm) -> Self {
        let mut algo = AlgoConfig::new(algorithm);
        match env {
            EnvName::Chain => {
                algo.epochs = 500;
                algo.steps_per_epoch = 1000;
            }
            EnvName::HazardNav | EnvName::ButtonNav => {
                algo.epochs = if env == EnvName::HazardNav { 100 } else { 200 };
                algo.steps_per_epoch = 2000;
                algo.hvp_states = Some(256);
                algo.cg.max_iters = 10;
            }
        }
        Self {
            env: EnvParams { name: env, horizon: None, gamma: None, step_scale: None },
            algo,
            seed: 0,
            seeds: 1,
            parallel_seeds: false,
            output: PathBuf::from("runs"),
            run_id: format!("{algorithm}-{env}"),
            checkpoint_every: 50,
            policy_hidden: vec![32, 32],
            init_log_std: -0.5,
            init_checkpoint: None,
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed + i).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output.join(&self.run_id)
    }

    /// Parses a config file and applies `--key value` overrides on top.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        Self::load_layered(path, &[], overrides)
    }

    /// Like [`RunConfig::load`] with `defaults` applied beneath the file.
    pub fn load_layered(path: Option<&Path>, defaults: &[(String, String)], overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse_layered(&text, defaults, overrides)
    }

    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        Self::parse_layered(text, &[], overrides)
    }

    fn parse_layered(text: &str, defaults: &[(String, String)], overrides: &[(String, String)]) -> Result<Self> {
        let mut entries: BTreeMap<String, (String, String)> = BTreeMap::new();
        let mut from_file = std::collections::BTreeSet::new();
        for (k, v) in defaults {
            entries.insert(canonical_key(k), (format!("default {k}"), v.clone()));
        }
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = format!("line {}", n + 1);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}: expected `key = value`, got `{line}`")))?;
            let key = canonical_key(k.trim());
            if !from_file.insert(key.clone()) {
                return Err(Error::Config(format!("{origin}: duplicate key `{key}`")));
            }
            entries.insert(key, (origin, v.trim().to_string()));
        }
        for (k, v) in overrides {
            let key = canonical_key(k.trim_start_matches('-'));
            entries.insert(key.clone(), (format!("override --{key}"), v.trim().to_string()));
        }

        let take = |entries: &mut BTreeMap<String, (String, String)>, key: &str| -> Result<(String, String)> {
            entries
                .remove(key)
                .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
        };
        let (origin, env) = take(&mut entries, "env")?;
        let env: EnvName = env.parse().map_err(|e| at(&origin, e))?;
        let (origin, algo) = take(&mut entries, "algorithm")?;
        let algorithm: Algorithm = algo.parse().map_err(|e| at(&origin, e))?;
        let mut cfg = Self::preset(env, algorithm);
        let explicit_run_id = entries.contains_key("run_id");
        for (key, (origin, value)) in &entries {
            cfg.set(key, value).map_err(|e| at(origin, e))?;
        }
        if !explicit_run_id {
            cfg.run_id = format!("{algorithm}-{env}");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let a = &mut self.algo;
        match key {
            "d0" => a.d0 = Some(num(key, value)?),
            "d1" => a.d1 = Some(num(key, value)?),
            "delta" => a.delta = num(key, value)?,
            "lambda" => a.lambda = num(key, value)?,
            "entropy_weight" => a.entropy_weight = num(key, value)?,
            "epochs" => a.epochs = num(key, value)?,
            "steps_per_epoch" => a.steps_per_epoch = num(key, value)?,
            "workers" => a.workers = num(key, value)?,
            "backtracks" => a.backtracks = num(key, value)?,
            "kl_accept_factor" => a.kl_accept_factor = num(key, value)?,
            "constraint_tol_rel" => a.constraint_tol_rel = num(key, value)?,
            "constraint_tol_abs" => a.constraint_tol_abs = num(key, value)?,
            "damping" => a.damping = num(key, value)?,
            "cg_iters" => a.cg.max_iters = num(key, value)?,
            "cg_tol" => a.cg.tol = num(key, value)?,
            "gae_lambda" => a.gae_lambda = num(key, value)?,
            "hvp_states" => a.hvp_states = if value == "all" { None } else { Some(num(key, value)?) },
            "value_hidden" => a.value_fit.hidden = list(key, value)?,
            "value_lr" => a.value_fit.learning_rate = num(key, value)?,
            "value_steps" => a.value_fit.steps = num(key, value)?,
            "value_minibatch" => a.value_fit.minibatch = num(key, value)?,
            "return_kind" => {
                a.return_kind = match value {
                    "discounted" => ReturnKind::Discounted,
                    "undiscounted" => ReturnKind::Undiscounted,
                    _ => return Err(Error::Config(format!("`return_kind` must be discounted or undiscounted, got `{value}`"))),
                }
            }
            "recovery_mode" => {
                a.recovery_mode = match value {
                    "combined" => RecoveryMode::Combined,
                    "one_at_a_time" => RecoveryMode::OneAtATime,
                    _ => return Err(Error::Config(format!("`recovery_mode` must be combined or one_at_a_time, got `{value}`"))),
                }
            }
            "env.horizon" => self.env.horizon = Some(num(key, value)?),
            "env.gamma" => self.env.gamma = Some(num(key, value)?),
            "env.step_scale" => self.env.step_scale = Some(num(key, value)?),
            "seed" => self.seed = num(key, value)?,
            "seeds" => self.seeds = num(key, value)?,
            "parallel_seeds" => self.parallel_seeds = num(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "run_id" => self.run_id = value.to_string(),
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "policy_hidden" => self.policy_hidden = list(key, value)?,
            "init_log_std" => self.init_log_std = num(key, value)?,
            "init_checkpoint" => self.init_checkpoint = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.algo.validate()?;
        if self.seeds == 0 {
            return Err(Error::Config("`seeds` must be positive".into()));
        }
        if self.algo.workers == 0 {
            return Err(Error::Config("`workers` must be positive".into()));
        }
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(Error::Config(format!("`run_id` must be a plain name, got `{}`", self.run_id)));
        }
        Ok(())
    }

    /// Fully resolved config; [`RunConfig::parse`] of this text gives `self` back.
    pub fn to_text(&self) -> String {
        let a = &self.algo;
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut lines = vec![
            format!("env = {}", self.env.name),
            format!("algorithm = {}", a.algorithm),
        ];
        let mut opt = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                lines.push(format!("{key} = {v}"));
            }
        };
        opt("d0", a.d0.map(|v| v.to_string()));
        opt("d1", a.d1.map(|v| v.to_string()));
        opt("env.horizon", self.env.horizon.map(|v| v.to_string()));
        opt("env.gamma", self.env.gamma.map(|v| v.to_string()));
        opt("env.step_scale", self.env.step_scale.map(|v| v.to_string()));
        opt("init_checkpoint", self.init_checkpoint.as_ref().map(|p| p.display().to_string()));
        lines.extend([
            format!("delta = {}", a.delta),
            format!("lambda = {}", a.lambda),
            format!("entropy_weight = {}", a.entropy_weight),
            format!("epochs = {}", a.epochs),
            format!("steps_per_epoch = {}", a.steps_per_epoch),
            format!("workers = {}", a.workers),
            format!("backtracks = {}", a.backtracks),
            format!("kl_accept_factor = {}", a.kl_accept_factor),
            format!("constraint_tol_rel = {}", a.constraint_tol_rel),
            format!("constraint_tol_abs = {}", a.constraint_tol_abs),
            format!("damping = {}", a.damping),
            format!("cg_iters = {}", a.cg.max_iters),
            format!("cg_tol = {}", a.cg.tol),
            format!("gae_lambda = {}", a.gae_lambda),
            format!("hvp_states = {}", a.hvp_states.map_or("all".to_string(), |v| v.to_string())),
            format!("value_hidden = {}", join(&a.value_fit.hidden)),
            format!("value_lr = {}", a.value_fit.learning_rate),
            format!("value_steps = {}", a.value_fit.steps),
            format!("value_minibatch = {}", a.value_fit.minibatch),
            format!(
                "return_kind = {}",
                match a.return_kind {
                    ReturnKind::Discounted => "discounted",
                    ReturnKind::Undiscounted => "undiscounted",
                }
            ),
            format!(
                "recovery_mode = {}",
                match a.recovery_mode {
                    RecoveryMode::Combined => "combined",
                    RecoveryMode::OneAtATime => "one_at_a_time",
                }
            ),
            format!("seed = {}", self.seed),
            format!("seeds = {}", self.seeds),
            format!("parallel_seeds = {}", self.parallel_seeds),
            format!("output = {}", self.output.display()),
            format!("run_id = {}", self.run_id),
            format!("checkpoint_every = {}", self.checkpoint_every),
            format!("policy_hidden = {}", join(&self.policy_hidden)),
            format!("init_log_std = {}", self.init_log_std),
        ]);
        lines.push(String::new());
        lines.join("\n")
    }
}

fn canonical_key(k: &str) -> String {
    let k = k.replace('-', "_");
    match k.as_str() {
        "algo" => "algorithm".into(),
        _ => k,
    }
}

fn at(origin: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{origin}: {msg}")),
        other => Error::Config(format!("{origin}: {other}")),
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

/// Splits `--key value` pairs; a flag without a value is an error.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected `--key`, got `{flag}`")))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            continue;
        }
        let value = it
            .next()
            .ok_or_else(|| Error::Config(format!("flag `--{key}` needs a value")))?;
        out.push((key.to_string(), value.clone()));
    }
    Ok(out)
}
