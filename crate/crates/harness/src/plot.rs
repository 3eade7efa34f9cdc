//! Plot data: CSV series plus small standalone SVG charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::HarnessError;
use crate::output::{locate_run, read_numeric_csv, MomentTable, Report, BOUNDS_FILE};

/// Height of the horizontal slice used for 2D profiles.
pub const SLICE_Y: f64 = 0.625;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Profile,
    Field,
    Bars,
}

fn component_name(c: usize) -> &'static str {
    ["u", "v"].get(c).copied().unwrap_or("w")
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn cell(v: Option<f64>) -> String {
    v.filter(|v| !v.is_nan()).map_or_else(String::new, |v| v.to_string())
}

/// Writes the data for `kind` next to `report` and returns the files created.
pub fn emit_plot_data(report: &Path, kind: PlotKind) -> Result<Vec<PathBuf>, HarnessError> {
    let (report_path, moments_path) = locate_run(report);
    let r = Report::read(&report_path)?;
    let dir = report_path.parent().map(Path::to_path_buf).unwrap_or_default();
    match kind {
        PlotKind::Profile => profile(&r, &MomentTable::read(&moments_path)?, &dir),
        PlotKind::Field => field(&r, &MomentTable::read(&moments_path)?, &dir),
        PlotKind::Bars => bars(&r, &dir),
    }
}

/// Row index of the cell centre closest to `y`.
pub fn slice_row(dy: f64, ny: usize, y: f64) -> usize {
    ((y / dy - 0.5).round().max(0.0) as usize).min(ny - 1)
}

fn profile(r: &Report, t: &MomentTable, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let points = r.grid.nx * r.grid.ny;
    let row = if t.plane { slice_row(r.grid.dy, r.grid.ny, SLICE_Y) } else { 0 };
    let bounds_path = dir.join(BOUNDS_FILE);
    let bounds = if bounds_path.is_file() { Some(read_numeric_csv(&bounds_path)?) } else { None };
    let bound_col = |name: &str| bounds.as_ref().and_then(|(h, _)| h.iter().position(|c| c == name));
    let (hi_std_bound, half_std) = (bound_col("ci_hi_std_bound"), bound_col("mc_halfwidth_std"));

    let mut csv = String::from(if t.plane { "x,y,component," } else { "x," });
    csv += "mean,std,ci_lo_mean,ci_hi_mean,ci_lo_std,ci_hi_std";
    if bounds.is_some() {
        csv += ",ci_hi_std_bound,mc_halfwidth_std";
    }
    csv += "\n";
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for c in 0..r.components {
        let mut std_line = Vec::new();
        let mut hi_line = Vec::new();
        for i in 0..r.grid.nx {
            let k = c * points + row * r.grid.nx + i;
            let m = &t.rows[k];
            if t.plane {
                let _ = write!(csv, "{},{},{},", m.x, m.y, component_name(c));
            } else {
                let _ = write!(csv, "{},", m.x);
            }
            let ci = |j: usize| cell(m.ci.map(|v| v[j]));
            let _ = write!(csv, "{},{},{},{},{},{}", m.mean, m.std, ci(0), ci(1), ci(2), ci(3));
            if let Some((_, rows)) = &bounds {
                let get = |col: Option<usize>| cell(col.map(|j| rows[k][j]));
                let _ = write!(csv, ",{},{}", get(hi_std_bound), get(half_std));
                if let Some(j) = hi_std_bound {
                    hi_line.push((m.x, rows[k][j]));
                }
            }
            csv += "\n";
            std_line.push((m.x, m.std));
        }
        series.push((format!("std {}", component_name(c)), std_line));
        if !hi_line.is_empty() {
            series.push((format!("bound {}", component_name(c)), hi_line));
        }
    }
    let csv_path = dir.join("profile.csv");
    let svg_path = dir.join("profile.svg");
    write_text(&csv_path, &csv)?;
    let title = if t.plane {
        format!("{} std at y = {:.4}", r.method, t.rows[row * r.grid.nx].y)
    } else {
        format!("{} std, t = {:.3e}", r.method, r.t_end)
    };
    write_text(&svg_path, &line_chart(&title, &series))?;
    Ok(vec![csv_path, svg_path])
}

fn field(r: &Report, t: &MomentTable, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let (nx, ny) = (r.grid.nx, r.grid.ny);
    let mut written = Vec::new();
    for c in 0..r.components {
        for (what, get) in [("mean", (|m: &crate::output::MomentRow| m.mean) as fn(&_) -> f64), ("std", |m| m.std)] {
            let mut csv = String::from("y");
            for i in 0..nx {
                let _ = write!(csv, ",{}", t.rows[c * nx * ny + i].x);
            }
            csv += "\n";
            for j in 0..ny {
                let first = &t.rows[c * nx * ny + j * nx];
                let _ = write!(csv, "{}", first.y);
                for i in 0..nx {
                    let _ = write!(csv, ",{}", get(&t.rows[c * nx * ny + j * nx + i]));
                }
                csv += "\n";
            }
            let path = dir.join(format!("field_{what}_{}.csv", component_name(c)));
            write_text(&path, &csv)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn bars(r: &Report, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let t = &r.timing;
    let mut csv = String::from("category,seconds,fraction\n");
    let parts = [("micro", t.t_micro, t.micro_fraction), ("macro", t.t_macro, t.macro_fraction), ("overhead", t.t_overhead, t.overhead_fraction)];
    for (name, secs, frac) in parts {
        let _ = writeln!(csv, "{name},{secs},{frac}");
    }
    let _ = writeln!(csv, "total,{},1", t.t_total);
    if let Some(e) = r.mean_rel_std_error {
        let _ = writeln!(csv, "mean_rel_std_error,{e},");
    }
    let csv_path = dir.join("bars.csv");
    let svg_path = dir.join("bars.svg");
    write_text(&csv_path, &csv)?;
    let bars: Vec<(&str, f64)> = parts.iter().map(|p| (p.0, p.1)).collect();
    write_text(&svg_path, &bar_chart(&format!("{} time [s]", r.method), &bars))?;
    Ok(vec![csv_path, svg_path])
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

pub fn line_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = svg_open(title);
    let _ = writeln!(
        s,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, "<text x=\"{PAD}\" y=\"{}\">{x0:.3}</text>", H - PAD + 15.0);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{x1:.3}</text>", W - PAD, H - PAD + 15.0);
    let _ = writeln!(s, "<text x=\"5\" y=\"{}\">{y0:.3e}</text>", H - PAD);
    let _ = writeln!(s, "<text x=\"5\" y=\"{}\">{y1:.3e}</text>", PAD);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = pts.iter().filter(|p| p.1.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", path.join(" "));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>", W - PAD - 120.0, PAD + 15.0 * (k + 1) as f64, escape(name));
    }
    s + "</svg>\n"
}

pub fn bar_chart(title: &str, bars: &[(&str, f64)]) -> String {
    let top = bars.iter().map(|b| b.1).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let slot = (W - 2.0 * PAD) / bars.len().max(1) as f64;
    let mut s = svg_open(title);
    let _ = writeln!(s, "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>", H - PAD, W - PAD);
    for (k, (name, v)) in bars.iter().enumerate() {
        let h = v / top * (H - 2.0 * PAD);
        let x = PAD + slot * k as f64 + 0.15 * slot;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"/>",
            H - PAD - h,
            0.7 * slot,
            COLORS[k % COLORS.len()]
        );
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>", x + 0.35 * slot, H - PAD + 15.0, escape(name));
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{v:.3e}</text>", x + 0.35 * slot, H - PAD - h - 4.0);
    }
    s + "</svg>\n"
}
