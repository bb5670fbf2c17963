//! Fixed-schema metrics CSV.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::EpochReport;
use crate::error::{Error, Result};

/// Column order of `metrics.csv`. Returns are per-episode means; the plain
/// columns are discounted (the quantities the constraints act on) and the
/// `_undiscounted` columns are raw sums.
pub const METRICS_HEADER: [&str; 16] = [
    "run_id",
    "algorithm",
    "seed",
    "epoch",
    "j_u",
    "j_r",
    "j_c1",
    "j_u_undiscounted",
    "j_r_undiscounted",
    "j_c1_undiscounted",
    "branch",
    "dual_case",
    "kl",
    "step_norm",
    "backtracks",
    "accepted",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub algorithm: String,
    pub seed: u64,
    pub epoch: usize,
    pub j_u: f64,
    pub j_r: f64,
    pub j_c1: f64,
    pub j_u_undiscounted: f64,
    pub j_r_undiscounted: f64,
    pub j_c1_undiscounted: f64,
    pub branch: String,
    pub dual_case: String,
    pub kl: f64,
    pub step_norm: f64,
    pub backtracks: usize,
    pub accepted: bool,
}

impl MetricsRow {
    pub fn from_report(run_id: &str, algorithm: &str, seed: u64, r: &EpochReport) -> Self {
        let c1 = |c: &[f64]| c.first().copied().unwrap_or(0.0);
        Self {
            run_id: run_id.to_string(),
            algorithm: algorithm.to_string(),
            seed,
            epoch: r.epoch,
            j_u: r.discounted.u,
            j_r: r.discounted.r,
            j_c1: c1(&r.discounted.c),
            j_u_undiscounted: r.undiscounted.u,
            j_r_undiscounted: r.undiscounted.r,
            j_c1_undiscounted: c1(&r.undiscounted.c),
            branch: r.branch.as_str().to_string(),
            dual_case: r.case.as_str().to_string(),
            kl: r.kl,
            step_norm: r.step_norm,
            backtracks: r.backtracks,
            accepted: r.accepted,
        }
    }

    /// Value of a numeric return column by name.
    pub fn metric(&self, column: &str) -> Option<f64> {
        Some(match column {
            "j_u" => self.j_u,
            "j_r" => self.j_r,
            "j_c1" => self.j_c1,
            "j_u_undiscounted" => self.j_u_undiscounted,
            "j_r_undiscounted" => self.j_r_undiscounted,
            "j_c1_undiscounted" => self.j_c1_undiscounted,
            _ => return None,
        })
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

/// Streaming writer; every row is flushed so a crashed run keeps its history.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        // header written up front so a run that stops before its first row still
        // leaves a well-formed file
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        inner.write_record(METRICS_HEADER).map_err(|e| csv_err(path, e))?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner
            .serialize(row)
            .map_err(|e| Error::Config(format!("writing metrics: {e}")))?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Config(format!("{}: unexpected metrics header", path.display())));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_err(path, e)))
        .collect()
}

/// Concatenates per-seed files in order into `out` with a single header.
pub fn merge_metrics(parts: &[impl AsRef<Path>], out: &Path) -> Result<usize> {
    let mut writer = MetricsWriter::create(out)?;
    let mut n = 0;
    for part in parts {
        for row in read_metrics(part.as_ref())? {
            writer.write(&row)?;
            n += 1;
        }
    }
    Ok(n)
}
