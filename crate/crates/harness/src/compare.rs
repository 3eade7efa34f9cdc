//! Method comparison against a stored reference run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::output::{locate_run, write_json, MomentTable, Report, REPORT_FILE};
use crate::run::std_error;

pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_JSON: &str = "comparison.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub method: String,
    pub decision: Option<String>,
    pub mean_rel_std_error: f64,
    pub t_total: f64,
    pub t_micro_pct: f64,
    pub t_macro_pct: f64,
    pub t_overhead_pct: f64,
    pub speedup: f64,
}

/// Report files directly in `dir` or one level below, in path order.
fn find_reports(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut found = Vec::new();
    if dir.join(REPORT_FILE).is_file() {
        found.push(dir.join(REPORT_FILE));
    }
    for entry in std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))? {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        if path.join(REPORT_FILE).is_file() {
            found.push(path.join(REPORT_FILE));
        }
    }
    found.sort();
    Ok(found)
}

fn label_of(report: &Path) -> String {
    report.parent().and_then(Path::file_name).map_or_else(|| ".".into(), |n| n.to_string_lossy().into_owned())
}

fn check_compatible(r: &Report, reference: &Report, label: &str) -> Result<(), HarnessError> {
    if r.model != reference.model {
        return Err(HarnessError::Mismatch(format!("{label}: model {:?} vs reference {:?}", r.model, reference.model)));
    }
    if r.grid != reference.grid || r.components != reference.components {
        return Err(HarnessError::Mismatch(format!("{label}: grid {:?} vs reference {:?}", r.grid, reference.grid)));
    }
    if (r.t_end - reference.t_end).abs() > 1e-12 * reference.t_end.abs() {
        return Err(HarnessError::Mismatch(format!("{label}: t_end {} vs reference {}", r.t_end, reference.t_end)));
    }
    Ok(())
}

/// Tabulates every report under `reports` against `reference` and writes the table to `out`.
pub fn compare_reports(reports: &Path, reference: &Path, out: &Path) -> Result<Vec<ComparisonRow>, HarnessError> {
    let (ref_report, ref_moments) = locate_run(reference);
    let base = Report::read(&ref_report)?;
    let base_table = MomentTable::read(&ref_moments)?;

    let mut rows = Vec::new();
    for path in find_reports(reports)? {
        let label = label_of(&path);
        let r = Report::read(&path)?;
        check_compatible(&r, &base, &label)?;
        let (_, moments) = locate_run(&path);
        let table = MomentTable::read(&moments)?;
        let error = std_error(&table, &base_table).map_err(|e| match e {
            HarnessError::Mismatch(m) => HarnessError::Mismatch(format!("{label}: {m}")),
            other => other,
        })?;
        rows.push(ComparisonRow {
            label,
            method: r.method.to_string(),
            decision: r.decision.clone(),
            mean_rel_std_error: error,
            t_total: r.timing.t_total,
            t_micro_pct: 100.0 * r.timing.micro_fraction,
            t_macro_pct: 100.0 * r.timing.macro_fraction,
            t_overhead_pct: 100.0 * r.timing.overhead_fraction,
            speedup: r.timing.speedup_over(&base.timing),
        });
    }

    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let csv_path = out.join(COMPARISON_CSV);
    let mut w = csv::WriterBuilder::new().from_path(&csv_path).map_err(|e| csv_failure(&csv_path, e))?;
    for row in &rows {
        w.serialize(row).map_err(|e| csv_failure(&csv_path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(&csv_path, e))?;
    write_json(&out.join(COMPARISON_JSON), &rows)?;
    Ok(rows)
}

fn csv_failure(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Csv { path: path.to_path_buf(), line: 0, message: e.to_string() }
}

/// Fixed-width text rendering of a comparison.
pub fn format_table(rows: &[ComparisonRow]) -> String {
    let mut s = format!(
        "{:<16} {:<11} {:>9} {:>12} {:>10} {:>8} {:>8} {:>8} {:>9}\n",
        "run", "method", "decision", "rel_err_std", "T_total", "T^mu%", "T^M%", "other%", "speedup"
    );
    for r in rows {
        s += &format!(
            "{:<16} {:<11} {:>9} {:>12.4e} {:>10.3} {:>8.1} {:>8.1} {:>8.1} {:>9.2}\n",
            r.label,
            r.method,
            r.decision.as_deref().unwrap_or("-"),
            r.mean_rel_std_error,
            r.t_total,
            r.t_micro_pct,
            r.t_macro_pct,
            r.t_overhead_pct,
            r.speedup
        );
    }
    s
}
