//! Experiment plumbing behind the command-line front end: configuration,
//! orchestration across seeds, metrics, checkpoints, charts and self-checks.

mod checkpoint;
mod config;
mod metrics;
mod plot;
mod run;
pub mod verify;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use config::{parse_overrides, EnvName, EnvParams, RunConfig};
pub use metrics::{merge_metrics, read_metrics, MetricsRow, MetricsWriter, METRICS_HEADER};
pub use plot::{band, cmd_plot, Band, PlotReport};
pub use run::{button_env, chain_env, cmd_train, hazard_env, RunSummary, SeedOutcome};
pub use verify::{cmd_verify, Suite, VerifyReport};
