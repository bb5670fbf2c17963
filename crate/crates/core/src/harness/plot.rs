//! Self-contained SVG line charts: per-run mean over seeds, a min-max band and
//! dashed reference lines at the configured limits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::metrics::{read_metrics, MetricsRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Limit {
    D0,
    D1,
}

struct Chart {
    column: &'static str,
    title: &'static str,
    limit: Option<Limit>,
}

const CHARTS: [Chart; 6] = [
    Chart { column: "j_u", title: "Returns under u_H (discounted)", limit: None },
    Chart { column: "j_r", title: "Returns under R_A (discounted)", limit: Some(Limit::D0) },
    Chart { column: "j_c1", title: "Returns under C_1 (discounted)", limit: Some(Limit::D1) },
    Chart { column: "j_u_undiscounted", title: "Returns under u_H (undiscounted)", limit: None },
    Chart { column: "j_r_undiscounted", title: "Returns under R_A (undiscounted)", limit: None },
    Chart { column: "j_c1_undiscounted", title: "Returns under C_1 (undiscounted)", limit: None },
];

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotReport {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// One legend entry: all seeds of one run id.
#[derive(Debug, Clone)]
struct Group {
    label: String,
    /// `seeds[k]` holds that seed's rows in epoch order, truncated to the common prefix.
    seeds: Vec<Vec<MetricsRow>>,
    d0: Option<f64>,
    d1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub epochs: Vec<usize>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Mean and min-max envelope across equally long series.
pub fn band(epochs: &[usize], series: &[Vec<f64>]) -> Band {
    let n = epochs.len();
    let mut b = Band { epochs: epochs.to_vec(), mean: vec![0.0; n], lo: vec![f64::INFINITY; n], hi: vec![f64::NEG_INFINITY; n] };
    for s in series {
        for i in 0..n {
            b.mean[i] += s[i] / series.len() as f64;
            b.lo[i] = b.lo[i].min(s[i]);
            b.hi[i] = b.hi[i].max(s[i]);
        }
    }
    b
}

fn load_groups(run_dirs: &[PathBuf], warnings: &mut Vec<String>) -> Result<Vec<Group>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_run: BTreeMap<String, (BTreeMap<u64, Vec<MetricsRow>>, Option<f64>, Option<f64>)> = BTreeMap::new();
    for dir in run_dirs {
        let path = dir.join("metrics.csv");
        let rows = read_metrics(&path)?;
        if rows.is_empty() {
            return Err(Error::Config(format!("{}: metrics file has no rows", path.display())));
        }
        let (d0, d1) = match RunConfig::load(Some(&dir.join("config.txt")), &[]) {
            Ok(cfg) => (cfg.algo.d0, cfg.algo.d1),
            Err(e) => {
                warnings.push(format!("{}: no usable config.txt ({e}); limit lines omitted", dir.display()));
                (None, None)
            }
        };
        for row in rows {
            let entry = by_run.entry(row.run_id.clone()).or_insert_with(|| {
                order.push(row.run_id.clone());
                (BTreeMap::new(), d0, d1)
            });
            entry.0.entry(row.seed).or_default().push(row);
        }
    }
    let mut groups = Vec::new();
    for label in order {
        let (seeds, d0, d1) = by_run.remove(&label).expect("label recorded on insert");
        let mut series: Vec<Vec<MetricsRow>> = seeds.into_values().collect();
        for s in &series {
            if s.windows(2).any(|w| w[1].epoch <= w[0].epoch) {
                return Err(Error::Config(format!("{label}: epochs not strictly increasing for seed {}", s[0].seed)));
            }
        }
        let lens: Vec<usize> = series.iter().map(Vec::len).collect();
        let common = *lens.iter().min().expect("groups are non-empty");
        if lens.iter().any(|&l| l != common) {
            warnings.push(format!("{label}: seeds have {lens:?} epochs; truncating to the common prefix of {common}"));
        }
        for s in &mut series {
            s.truncate(common);
        }
        for s in &series[1..] {
            if s.iter().zip(&series[0]).any(|(a, b)| a.epoch != b.epoch) {
                return Err(Error::Config(format!("{label}: seeds disagree on epoch numbering")));
            }
        }
        groups.push(Group { label, seeds: series, d0, d1 });
    }
    Ok(groups)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render(chart: &Chart, groups: &[Group]) -> String {
    const W: f64 = 760.0;
    const H: f64 = 420.0;
    const L: f64 = 70.0;
    const R: f64 = 200.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;
    let bands: Vec<Band> = groups
        .iter()
        .map(|g| {
            let epochs: Vec<usize> = g.seeds[0].iter().map(|r| r.epoch).collect();
            let series: Vec<Vec<f64>> = g
                .seeds
                .iter()
                .map(|s| s.iter().map(|r| r.metric(chart.column).expect("known column")).collect())
                .collect();
            band(&epochs, &series)
        })
        .collect();
    let mut limits: Vec<f64> = groups
        .iter()
        .filter_map(|g| match chart.limit {
            Some(Limit::D0) => g.d0,
            Some(Limit::D1) => g.d1,
            None => None,
        })
        .collect();
    limits.sort_by(f64::total_cmp);
    limits.dedup();

    let values = bands.iter().flat_map(|b| b.lo.iter().chain(&b.hi)).chain(&limits).copied().filter(|v| v.is_finite());
    let (mut y0, mut y1) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(y0 < y1) {
        let c = if y0.is_finite() { y0 } else { 0.0 };
        (y0, y1) = (c - 1.0, c + 1.0);
    }
    let pad = 0.05 * (y1 - y0);
    (y0, y1) = (y0 - pad, y1 + pad);
    let x1 = bands.iter().flat_map(|b| b.epochs.last()).copied().max().unwrap_or(0).max(1) as f64;
    let px = |e: f64| L + (W - L - R) * e / x1;
    let py = |v: f64| T + (H - T - B) * (y1 - v) / (y1 - y0);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#, (L + W - R) / 2.0, escape(chart.title));
    // axes and ticks
    let _ = writeln!(svg, r#"<path d="M{L:.2},{T:.2} V{:.2} H{:.2}" stroke="black" fill="none"/>"#, H - B, W - R);
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(svg, r##"<line x1="{L:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, W - R);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, L - 6.0, y + 4.0);
        let e = x1 * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, px(e), H - B + 18.0, e.round());
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">epoch</text>"#, (L + W - R) / 2.0, H - 10.0);
    for (i, b) in bands.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band_pts: Vec<String> = b.epochs.iter().zip(&b.hi).map(|(&e, &v)| format!("{:.2},{:.2}", px(e as f64), py(v))).collect();
        band_pts.extend(b.epochs.iter().zip(&b.lo).rev().map(|(&e, &v)| format!("{:.2},{:.2}", px(e as f64), py(v))));
        let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band_pts.join(" "));
        let line: Vec<String> = b.epochs.iter().zip(&b.mean).map(|(&e, &v)| format!("{:.2},{:.2}", px(e as f64), py(v))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = T + 16.0 * i as f64 + 6.0;
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#, W - R + 12.0, W - R + 32.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{} (n={})</text>"#,
            W - R + 38.0,
            ly + 4.0,
            escape(&groups[i].label),
            groups[i].seeds.len()
        );
    }
    let name = match chart.limit {
        Some(Limit::D0) => "d0",
        _ => "d1",
    };
    for d in &limits {
        let y = py(*d);
        let _ = writeln!(svg, r#"<line x1="{L:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="6,4"/>"#, W - R);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{name} = {d}</text>"#, W - R - 4.0, y - 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes one chart per return column into `out_dir`. Nothing is written when any
/// input is missing or empty.
pub fn cmd_plot(run_dirs: &[PathBuf], out_dir: &Path) -> Result<PlotReport> {
    if run_dirs.is_empty() {
        return Err(Error::Config("no run directories given".into()));
    }
    let mut warnings = Vec::new();
    let groups = load_groups(run_dirs, &mut warnings)?;
    let rendered: Vec<(PathBuf, String)> = CHARTS
        .iter()
        .map(|c| (out_dir.join(format!("{}.svg", c.column)), render(c, &groups)))
        .collect();
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for (path, svg) in rendered {
        fs::write(&path, svg)?;
        files.push(path);
    }
    Ok(PlotReport { files, warnings })
}
