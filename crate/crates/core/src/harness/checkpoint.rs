//! Text checkpoints: a policy descriptor line followed by the flat parameters.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::policy::{PolicyKind, PolicyParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams<f64>,
    pub seed: u64,
    /// Last completed epoch.
    pub epoch: usize,
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut text = format!(
        "kind = {}\nseed = {}\nepoch = {}\nparams = {}\n",
        ckpt.params.kind.describe(),
        ckpt.seed,
        ckpt.epoch,
        ckpt.params.theta.len()
    );
    for v in &ckpt.params.theta {
        text.push_str(&format!("{v:?}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bad = |what: &str| Error::Config(format!("{}: {what}", path.display()));
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut header = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad("truncated header"))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(" = "))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("expected `{key} = ...`")))
    };
    let kind = PolicyKind::parse(&header("kind")?)?;
    let seed = header("seed")?.parse().map_err(|_| bad("bad seed"))?;
    let epoch = header("epoch")?.parse().map_err(|_| bad("bad epoch"))?;
    let count: usize = header("params")?.parse().map_err(|_| bad("bad parameter count"))?;
    let theta = lines
        .map(|l| l.trim().parse::<f64>().map_err(|_| bad(&format!("bad parameter `{l}`"))))
        .collect::<Result<Vec<_>>>()?;
    if theta.len() != count || count != kind.param_count() {
        return Err(bad(&format!(
            "expected {} parameters, header says {count}, found {}",
            kind.param_count(),
            theta.len()
        )));
    }
    Ok(Checkpoint { params: PolicyParams { kind, theta }, seed, epoch })
}
