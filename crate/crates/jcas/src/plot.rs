//! Self-contained SVG line charts from result tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::table::Table;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// What to draw from each input table.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    pub log_y: bool,
    pub title: String,
}

/// One polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Extracts one series per (table, y column), skipping empty cells and, on
/// a log axis, non-positive values.
pub fn collect_series(tables: &[(PathBuf, Table)], spec: &PlotSpec) -> Result<Vec<Series>, CliError> {
    if spec.y.is_empty() {
        return Err(CliError::Plot("no y columns requested".into()));
    }
    let mut out = Vec::new();
    for (path, t) in tables {
        let missing: Vec<&str> = std::iter::once(&spec.x)
            .chain(&spec.y)
            .filter(|c| t.column_index(c).is_none())
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Plot(format!("{}: missing columns {}", path.display(), missing.join(", "))));
        }
        if t.rows.is_empty() {
            return Err(CliError::Plot(format!("{}: no data rows", path.display())));
        }
        let xs = t.column(&spec.x).expect("checked");
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for y in &spec.y {
            let ys = t.column(y).expect("checked");
            let points = xs
                .iter()
                .zip(&ys)
                .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
                .filter(|&(x, y)| x.is_finite() && y.is_finite() && (!spec.log_y || y > 0.0))
                .collect();
            let label = if tables.len() > 1 { format!("{stem}: {y}") } else { y.clone() };
            out.push(Series { label, points });
        }
    }
    if out.iter().all(|s| s.points.is_empty()) {
        return Err(CliError::Plot("no plottable values".into()));
    }
    Ok(out)
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
        return (a..=b).map(|e| 10f64.powi(e)).collect();
    }
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn range(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if log {
        let (a, b) = (10f64.powf(lo.log10().floor()), 10f64.powf(hi.log10().ceil()));
        return if a == b { (a, a * 10.0) } else { (a, b) };
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.0e}")
    } else {
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

pub fn render(series: &[Series], spec: &PlotSpec) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(all().map(|p| p.0), false);
    let (y0, y1) = range(all().map(|p| p.1), spec.log_y);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let fy = |y: f64| if spec.log_y { y.log10() } else { y };
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (fy(y) - fy(y0)) / (fy(y1) - fy(y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&spec.title)
    );
    for t in ticks(x0, x1, false) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, label(t));
    }
    for t in ticks(y0, y1, spec.log_y) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, label(t));
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&spec.x)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if pts.len() > 1 {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        }
        for &(x, y) in &ser.points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

/// Reads the tables, renders and writes the chart. Nothing is written when
/// any input is unusable.
pub fn plot_files(inputs: &[PathBuf], spec: &PlotSpec, out: &Path) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Plot("no input CSV files".into()));
    }
    let tables = inputs
        .iter()
        .map(|p| Table::read(p).map(|t| (p.clone(), t)))
        .collect::<Result<Vec<_>, _>>()?;
    let series = collect_series(&tables, spec)?;
    std::fs::write(out, render(&series, spec)).map_err(|e| CliError::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(log_y: bool) -> PlotSpec {
        PlotSpec {
            x: "u".into(),
            y: vec!["rmse_nn".into(), "rmse_esprit".into()],
            log_y,
            title: "RMSE <vs> u".into(),
        }
    }

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn renders_lines_markers_and_legend() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "# seed=1\nu,rmse_nn,rmse_esprit\n1,0.08,0.09\n2,0.07,0.05\n4,0.06,0.03\n");
        let out = dir.path().join("m.svg");
        plot_files(&[p], &spec(true), &out).unwrap();
        let svg = std::fs::read_to_string(out).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 6);
        assert!(svg.contains("RMSE &lt;vs&gt; u"));
        assert!(svg.contains(">0.01<") && svg.contains(">0.1<"));
    }

    #[test]
    fn single_row_gives_one_marker_per_series() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "one.csv", "u,rmse_nn,rmse_esprit\n1,0.08,\n");
        let out = dir.path().join("one.svg");
        plot_files(&[p], &spec(false), &out).unwrap();
        let svg = std::fs::read_to_string(out).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 0);
    }

    #[test]
    fn empty_csv_is_an_error_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let header_only = write(dir.path(), "h.csv", "u,rmse_nn,rmse_esprit\n");
        let blank = write(dir.path(), "b.csv", "");
        for p in [header_only, blank] {
            let out = dir.path().join("x.svg");
            assert!(plot_files(&[p], &spec(false), &out).is_err());
            assert!(!out.exists());
        }
    }

    #[test]
    fn missing_columns_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "u,bmi\n1,2.5\n");
        let err = plot_files(&[p], &spec(false), &dir.path().join("m.svg")).unwrap_err().to_string();
        assert!(err.contains("rmse_nn, rmse_esprit"), "{err}");
    }

    #[test]
    fn linear_ticks_are_round() {
        let t = ticks(0.0, 1.0, false);
        assert_eq!(t.len(), 6);
        assert!(t.iter().enumerate().all(|(i, v)| (v - 0.2 * i as f64).abs() < 1e-12));
        assert_eq!(ticks(0.002, 0.5, true), vec![1e-3, 1e-2, 1e-1, 1.0]);
    }
}
