//! JSON report envelopes, sweep tables and atomic output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::asymptotics::SweepReport;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::grid::TriGrid;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, Serialize)]
pub struct GridInfo {
    pub shape: String,
    pub n: u32,
    pub h: f64,
    pub hx: f64,
    pub hy: f64,
    pub nodes: usize,
    pub interior_nodes: usize,
    pub triangles: usize,
    pub area: f64,
}

impl GridInfo {
    pub fn of(grid: &TriGrid) -> Self {
        Self {
            shape: grid.spec.shape.name().to_string(),
            n: grid.spec.resolution,
            h: grid.h,
            hx: grid.hx,
            hy: grid.hy,
            nodes: grid.node_count(),
            interior_nodes: grid.interior.iter().filter(|&&b| b).count(),
            triangles: grid.triangle_count(),
            area: grid.total_area(),
        }
    }
}

/// Every report carries the full resolved configuration (tolerances
/// included) and the grid it was computed on.
#[derive(Clone, Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub grid: GridInfo,
    pub result: T,
}

pub fn to_json(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// One CSV line per sweep row.
pub fn sweep_csv(report: &SweepReport) -> Vec<u8> {
    let mut s = String::from(
        "index,eigenvalue_estimate,sup_norm_of_extremal,argmax_x,argmax_y,gap_to_limit,el_residual,iterations,converged,lower_bound,upper_bound,dist_to_distance,bound_violation,singleton,sign_undershoot\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{:?},{:?},{:?},{:?},{},{:?}",
            r.index,
            r.eigenvalue_estimate,
            r.sup_norm_of_extremal,
            r.argmax[0],
            r.argmax[1],
            r.gap_to_limit,
            r.el_residual,
            r.iterations,
            r.converged,
            r.lower_bound,
            r.upper_bound,
            r.dist_to_distance,
            r.bound_violation,
            r.singleton,
            r.sign_undershoot
        );
    }
    s.into_bytes()
}

/// `iteration,quotient`.
pub fn trace_csv(trace: &[f64]) -> Vec<u8> {
    let mut s = String::from("iteration,quotient\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(s, "{i},{v:?}");
    }
    s.into_bytes()
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename, so a
/// reader never sees a half-written file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, &target)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res?;
    Ok(target)
}

/// Collects every `*.json` report in `dir` (except the summary itself) into
/// one object keyed by file name.
pub fn aggregate(dir: &Path) -> Result<Value> {
    let mut reports = BTreeMap::new();
    if dir.is_dir() {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            if name == SUMMARY_FILE || name.starts_with('.') || !name.ends_with(".json") {
                continue;
            }
            let v: Value = serde_json::from_slice(&fs::read(&path)?)?;
            reports.insert(name.to_string(), v);
        }
    }
    Ok(serde_json::json!({ "count": reports.len(), "reports": reports }))
}
