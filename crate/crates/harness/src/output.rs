//! On-disk artifacts of a run: `moments.csv`, `report.json`, `timing.json`, `bounds.csv`.

use std::path::{Path, PathBuf};

use musc_up_core::{ErrorBoundReport, Field, Grid, MomentEstimate, Scalar, TimingBreakdown};
use serde::{Deserialize, Serialize};

use crate::config::{Method, ModelKind, Settings};
use crate::error::HarnessError;

pub const MOMENTS_FILE: &str = "moments.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const BOUNDS_FILE: &str = "bounds.csv";

const LINE_HEADER: [&str; 7] = ["x", "mean", "std", "ci_lo_mean", "ci_hi_mean", "ci_lo_std", "ci_hi_std"];
const PLANE_HEADER: [&str; 9] = ["x", "y", "component", "mean", "std", "ci_lo_mean", "ci_hi_mean", "ci_lo_std", "ci_hi_std"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub x: f64,
    pub y: f64,
    pub component: usize,
    pub mean: f64,
    pub std: f64,
    /// `[lo_mean, hi_mean, lo_std, hi_std]`, absent for methods without intervals.
    pub ci: Option<[f64; 4]>,
}

/// Final-time moments, one row per grid point and component (component-major).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub plane: bool,
    pub rows: Vec<MomentRow>,
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    HarnessError::Csv { path: path.to_path_buf(), line, message: e.to_string() }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

impl MomentTable {
    pub fn from_estimate<T: Scalar>(est: &MomentEstimate<T>) -> Self {
        let grid = *est.mean.grid();
        let points = grid.points();
        let plane = grid.dimension() == 2;
        let f = |field: &Field<T>, i: usize| field.values()[i].as_f64();
        let rows = (0..est.mean.len())
            .map(|i| {
                let (x, y) = grid.coord(i % points);
                let ci = match (&est.ci_mean, &est.ci_std) {
                    (Some(m), Some(s)) => Some([f(&m.lower, i), f(&m.upper, i), f(&s.lower, i), f(&s.upper, i)]),
                    _ => None,
                };
                MomentRow {
                    x: x.as_f64(),
                    y: y.as_f64(),
                    component: i / points,
                    mean: f(&est.mean, i),
                    std: f(&est.std, i),
                    ci,
                }
            })
            .collect();
        Self { plane, rows }
    }

    pub fn std(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.std).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean).collect()
    }

    pub fn components(&self) -> usize {
        self.rows.iter().map(|r| r.component + 1).max().unwrap_or(0)
    }

    /// Same points and components in the same order.
    pub fn check_layout(&self, other: &Self) -> Result<(), String> {
        if self.plane != other.plane || self.rows.len() != other.rows.len() {
            return Err(format!(
                "grid mismatch: {} rows ({}D) vs {} rows ({}D)",
                self.rows.len(),
                if self.plane { 2 } else { 1 },
                other.rows.len(),
                if other.plane { 2 } else { 1 }
            ));
        }
        for (i, (a, b)) in self.rows.iter().zip(&other.rows).enumerate() {
            let close = |p: f64, q: f64| (p - q).abs() <= 1e-9 * (1.0 + p.abs().max(q.abs()));
            if a.component != b.component || !close(a.x, b.x) || !close(a.y, b.y) {
                return Err(format!("grid mismatch at row {i}: ({}, {}) vs ({}, {})", a.x, a.y, b.x, b.y));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let result = (|| {
            if self.plane {
                w.write_record(PLANE_HEADER)?;
            } else {
                w.write_record(LINE_HEADER)?;
            }
            for r in &self.rows {
                let ci = |k: usize| opt(r.ci.map(|c| c[k]));
                let mut rec = vec![r.x.to_string()];
                if self.plane {
                    rec.push(r.y.to_string());
                    rec.push(r.component.to_string());
                }
                rec.extend([r.mean.to_string(), r.std.to_string(), ci(0), ci(1), ci(2), ci(3)]);
                w.write_record(&rec)?;
            }
            w.flush().map_err(csv::Error::from)
        })();
        result.map_err(|e| csv_error(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_owned).collect();
        let plane = if header == LINE_HEADER {
            false
        } else if header == PLANE_HEADER {
            true
        } else {
            return Err(HarnessError::Csv { path: path.to_path_buf(), line: 1, message: format!("unexpected header {header:?}") });
        };
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let bad = |message: String| HarnessError::Csv { path: path.to_path_buf(), line: k + 2, message };
            let num = |i: usize| -> Result<Option<f64>, HarnessError> {
                let s = rec.get(i).ok_or_else(|| bad(format!("missing column {}", i + 1)))?;
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(format!("not a number: {s:?}")))
                }
            };
            let need = |i: usize| num(i)?.ok_or_else(|| bad(format!("empty column {}", i + 1)));
            let o = if plane { 2 } else { 0 };
            let ci = match (num(o + 3)?, num(o + 4)?, num(o + 5)?, num(o + 6)?) {
                (Some(a), Some(b), Some(c), Some(d)) => Some([a, b, c, d]),
                _ => None,
            };
            rows.push(MomentRow {
                x: need(0)?,
                y: if plane { need(1)? } else { 0.0 },
                component: if plane { need(2)? as usize } else { 0 },
                mean: need(o + 1)?,
                std: need(o + 2)?,
                ci,
            });
        }
        Ok(Self { plane, rows })
    }
}

/// Per-point interpolation error bounds of a SIMC run.
pub fn write_bounds<T: Scalar>(report: &ErrorBoundReport<T>, path: &Path) -> Result<(), HarnessError> {
    let grid = *report.eps_mean_bound.grid();
    let points = grid.points();
    let columns: [(&str, &Field<T>); 8] = [
        ("eps_mean_bound", &report.eps_mean_bound),
        ("eps_std_bound", &report.eps_std_bound),
        ("ci_lo_mean_bound", &report.ci_mean_bound.lower),
        ("ci_hi_mean_bound", &report.ci_mean_bound.upper),
        ("ci_lo_std_bound", &report.ci_std_bound.lower),
        ("ci_hi_std_bound", &report.ci_std_bound.upper),
        ("mc_halfwidth_mean", &report.mc_ci_halfwidth_mean),
        ("mc_halfwidth_std", &report.mc_ci_halfwidth_std),
    ];
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let result = (|| {
        let mut header = vec!["x", "y", "component"];
        header.extend(columns.iter().map(|c| c.0));
        w.write_record(&header)?;
        for i in 0..report.eps_mean_bound.len() {
            let (x, y) = grid.coord(i % points);
            let mut rec = vec![x.to_string(), y.to_string(), (i / points).to_string()];
            rec.extend(columns.iter().map(|c| c.1.values()[i].as_f64().to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)
    })();
    result.map_err(|e| csv_error(path, e))
}

/// Header and numeric rows of a CSV file; empty cells read as NaN.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .map(|s| if s.is_empty() { Ok(f64::NAN) } else { s.parse::<f64>() })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::Csv { path: path.to_path_buf(), line: k + 2, message: e.to_string() })?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl GridInfo {
    pub fn of<T: Scalar>(grid: &Grid<T>) -> Self {
        match *grid {
            Grid::Line { n, dx } => Self { nx: n, ny: 1, dx: dx.as_f64(), dy: 0.0 },
            Grid::Plane { nx, ny, dx, dy } => Self { nx, ny, dx: dx.as_f64(), dy: dy.as_f64() },
        }
    }
}

/// Spatial means of the interpolation-test quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub mean_bound_upper: f64,
    pub std_bound_upper: f64,
    pub mc_halfwidth_mean: f64,
    pub mc_halfwidth_std: f64,
}

impl BoundSummary {
    pub fn of<T: Scalar>(r: &ErrorBoundReport<T>) -> Self {
        let [a, b, c, d] = r.summary();
        Self { mean_bound_upper: a, std_bound_upper: b, mc_halfwidth_mean: c, mc_halfwidth_std: d }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: Method,
    /// `accept` / `reject` for SIMC, null otherwise.
    pub decision: Option<String>,
    /// Against the reference run, when one was given.
    pub mean_rel_std_error: Option<f64>,
    pub timing: TimingBreakdown,
    pub seed: u64,
    pub config: Settings,
    pub model: ModelKind,
    pub grid: GridInfo,
    pub components: usize,
    pub t_end: f64,
    pub n_samples: usize,
    pub speedup: Option<f64>,
    pub bounds: Option<BoundSummary>,
    pub reference: Option<PathBuf>,
}

impl Report {
    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::json(path, e))
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        write_json(path, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingFile {
    #[serde(flatten)]
    pub breakdown: TimingBreakdown,
    pub wall_seconds: f64,
    pub threads: usize,
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

/// Locates a stored run from a report path, its directory, or its `moments.csv`.
pub fn locate_run(path: &Path) -> (PathBuf, PathBuf) {
    let dir = if path.is_dir() { path.to_path_buf() } else { path.parent().map(Path::to_path_buf).unwrap_or_default() };
    let report = if path.is_dir() || path.extension().is_some_and(|e| e == "csv") { dir.join(REPORT_FILE) } else { path.to_path_buf() };
    (report, dir.join(MOMENTS_FILE))
}
