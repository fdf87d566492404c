use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalError, RunReport};

pub const REPORT_COLUMNS: [&str; 11] = [
    "scenario_id",
    "alpha",
    "beta",
    "gamma_lo",
    "gamma_hi",
    "compensation",
    "x_err_m",
    "y_err_m",
    "err_mag_m",
    "mean_step_ms",
    "p99_step_ms",
];

const FORWARD_STROKE: &str = "#1f5fbf";
const BACKWARD_STROKE: &str = "#e0b000";

/// One line of the summary CSV. Empty cells are `None`; `gamma_*` is the
/// return-wind multiplier range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario_id: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma_lo: Option<f64>,
    pub gamma_hi: Option<f64>,
    pub compensation: f64,
    pub x_err_m: f64,
    pub y_err_m: f64,
    pub err_mag_m: f64,
    pub mean_step_ms: Option<f64>,
    pub p99_step_ms: Option<f64>,
}

impl ReportRow {
    pub fn from_report(r: &RunReport, with_timing: bool) -> Self {
        ReportRow {
            scenario_id: r.scenario_id.clone(),
            alpha: r.alpha,
            beta: r.beta,
            gamma_lo: r.gamma_backward.map(|g| g.0),
            gamma_hi: r.gamma_backward.map(|g| g.1),
            compensation: r.compensation,
            x_err_m: r.arrival.x_err,
            y_err_m: r.arrival.y_err,
            err_mag_m: r.arrival.magnitude,
            mean_step_ms: with_timing.then_some(r.timing.mean_ms),
            p99_step_ms: with_timing.then_some(r.timing.p99_ms),
        }
    }
}

/// Writes the summary CSV, one row per report in the given order. Timing
/// cells stay empty unless `with_timing`, keeping the file reproducible.
pub fn write_report_csv<W: Write>(reports: &[RunReport], sink: W, with_timing: bool) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(REPORT_COLUMNS)?;
    for r in reports {
        w.serialize(ReportRow::from_report(r, with_timing))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_csv<R: Read>(source: R) -> Result<Vec<ReportRow>, EvalError> {
    let mut r = csv::Reader::from_reader(source);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != REPORT_COLUMNS {
        return Err(EvalError::Config(format!("unexpected report header {header:?}")));
    }
    Ok(r.deserialize().collect::<Result<Vec<ReportRow>, _>>()?)
}

/// Plan view of one run: outbound path in blue, return path in yellow,
/// takeoff as a black ring. North is up.
pub fn render_svg(report: &RunReport) -> String {
    let title = format!("{} (arrival error {:.3} m)", report.scenario_id, report.arrival.magnitude);
    render_paths_svg(&title, &report.forward_path, &report.backward_path)
}

/// Plan view of `(north, east)` paths; either may be empty.
pub fn render_paths_svg(title: &str, forward: &[[f64; 2]], backward: &[[f64; 2]]) -> String {
    let pts = forward.iter().chain(backward).chain(std::iter::once(&[0.0, 0.0]));
    let (mut min_e, mut max_e, mut min_n, mut max_n) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in pts {
        min_n = min_n.min(p[0]);
        max_n = max_n.max(p[0]);
        min_e = min_e.min(p[1]);
        max_e = max_e.max(p[1]);
    }
    let span = (max_e - min_e).max(max_n - min_n).max(1.0);
    let pad = 0.08 * span;
    let (x0, y0, side) = (min_e - pad, -max_n - pad, span + 2.0 * pad);
    let stroke = side / 250.0;

    let polyline = |path: &[[f64; 2]], color: &str| {
        let mut s = String::new();
        for p in path {
            let _ = write!(s, "{:.3},{:.3} ", p[1], -p[0]);
        }
        format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{stroke:.3}\" stroke-linejoin=\"round\" points=\"{}\"/>\n",
            s.trim_end()
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"{x0:.3} {y0:.3} {side:.3} {side:.3}\">"
    );
    let _ = writeln!(svg, "  <title>{title}</title>");
    let _ = writeln!(svg, "  <rect x=\"{x0:.3}\" y=\"{y0:.3}\" width=\"{side:.3}\" height=\"{side:.3}\" fill=\"white\"/>");
    if !forward.is_empty() {
        svg.push_str(&polyline(forward, FORWARD_STROKE));
    }
    if !backward.is_empty() {
        svg.push_str(&polyline(backward, BACKWARD_STROKE));
    }
    let _ = writeln!(
        svg,
        "  <circle cx=\"0\" cy=\"0\" r=\"{:.3}\" fill=\"none\" stroke=\"black\" stroke-width=\"{stroke:.3}\"/>",
        stroke * 4.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Writes `report.csv` and `plots/<scenario_id>.svg` under `dir`, rows
/// sorted by scenario id. Returns the paths written.
pub fn emit_report(reports: &[RunReport], dir: &Path, with_timing: bool) -> Result<Vec<PathBuf>, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyReports);
    }
    let mut sorted: Vec<&RunReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    let owned: Vec<RunReport> = sorted.iter().map(|r| (*r).clone()).collect();

    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    let csv_path = dir.join("report.csv");
    write_report_csv(&owned, fs::File::create(&csv_path)?, with_timing)?;
    let mut written = vec![csv_path];
    for r in &owned {
        let p = plots.join(format!("{}.svg", r.scenario_id));
        fs::write(&p, render_svg(r))?;
        written.push(p);
    }
    Ok(written)
}
