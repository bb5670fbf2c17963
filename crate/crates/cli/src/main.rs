use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use seps::env::{Environment, TabularCmdp};
use seps::harness::{cmd_plot, cmd_train, cmd_verify, parse_overrides, RunConfig, Suite};
use seps::oracle::{enumerate_constrained_optimum, OracleResult};

/// Environment variable holding the default output root.
const OUTPUT_ROOT_VAR: &str = "SEPS_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "seps", version, about = "Constrained trust-region policy search with explicability constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm on one environment for every configured seed.
    ///
    /// Any config key can be given as `--key value` after the options,
    /// e.g. `seps train --config configs/hazard-nav.conf --algo eps --lambda 2 --seeds 3`.
    #[command(allow_hyphen_values = true)]
    Train {
        /// Key-value config file; overrides take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// Draw return curves (mean and min-max band over seeds) from run directories.
    Plot {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Directory receiving the SVG charts.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a self-check suite: dual-sweep, grad-check or tabular-oracle.
    Verify {
        suite: String,
        /// Report directory (default: `<output root>/verify`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustively search deterministic policies of a tabular instance.
    Oracle {
        /// Random instance `STATES,ACTIONS` instead of the chain fixture.
        #[arg(long, value_name = "STATES,ACTIONS")]
        random: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        /// Floor on the task return (default: the instance's own limit).
        #[arg(long, allow_hyphen_values = true)]
        d0: Option<f64>,
        /// Ceiling on the cost return (default: the instance's own limit).
        #[arg(long, allow_hyphen_values = true)]
        d1: Option<f64>,
    },
}

fn output_root() -> Vec<(String, String)> {
    std::env::var(OUTPUT_ROOT_VAR)
        .ok()
        .filter(|v| !v.is_empty())
        .map(|v| vec![("output".to_string(), v)])
        .unwrap_or_default()
}

fn train(config: Option<PathBuf>, overrides: &[String]) -> Result<()> {
    let overrides = parse_overrides(overrides)?;
    let cfg = RunConfig::load_layered(config.as_deref(), &output_root(), &overrides)?;
    let summary = cmd_train(&cfg)?;
    for o in &summary.outcomes {
        if let Some(last) = o.reports.last() {
            eprintln!(
                "seed {}: {} epochs, final J_u {:.4} J_R {:.4} J_C1 {:.4}",
                o.seed,
                o.reports.len(),
                last.discounted.u,
                last.discounted.r,
                last.discounted.c.first().copied().unwrap_or(0.0)
            );
        }
    }
    println!("{}", summary.dir.display());
    Ok(())
}

fn oracle(random: Option<String>, seed: u64, gamma: f64, d0: Option<f64>, d1: Option<f64>) -> Result<()> {
    let env = match random {
        Some(shape) => {
            let (s, a) = shape.split_once(',').context("--random expects STATES,ACTIONS")?;
            let (s, a): (usize, usize) = (s.trim().parse()?, a.trim().parse()?);
            if s == 0 || a == 0 {
                bail!("--random needs positive sizes");
            }
            TabularCmdp::random(s, a, gamma, 100, seed)
        }
        None => TabularCmdp::chain_fixture(),
    };
    let limits = &env.spec().limits;
    let (d0, d1) = (d0.unwrap_or(limits[0]), d1.unwrap_or(limits[1]));
    let result: OracleResult = enumerate_constrained_optimum(&env, d0, d1)?;
    println!("d0: {d0}\nd1: {d1}\n{result}\n");
    println!("{}", OracleResult::CSV_HEADER);
    println!("{}", result.csv_row());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config, overrides } => train(config, &overrides).map(|_| true),
        Command::Plot { runs, out } => {
            let report = cmd_plot(&runs, &out)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.files {
                println!("{}", f.display());
            }
            Ok(true)
        }
        Command::Verify { suite, out } => {
            let suite: Suite = suite.parse()?;
            let out = out.unwrap_or_else(|| {
                PathBuf::from(std::env::var(OUTPUT_ROOT_VAR).unwrap_or_else(|_| "runs".into())).join("verify")
            });
            let (report, files) = cmd_verify(suite, &out)?;
            print!("{}", report.summary());
            for f in &files {
                println!("wrote {}", f.display());
            }
            Ok(report.passed())
        }
        Command::Oracle { random, seed, gamma, d0, d1 } => oracle(random, seed, gamma, d0, d1).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
