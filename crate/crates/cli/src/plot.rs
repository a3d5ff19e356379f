//! Dependency-free SVG line charts for the CSV outputs.

use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;

use crate::csvio::{self, Table};
use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Training,
    Trajectory,
    Gains,
}

const WIDTH: f64 = 820.0;
const PANEL_H: f64 = 200.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const GAP: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series {
    pub name: String,
    /// `None` entries break the line.
    pub points: Vec<Option<(f64, f64)>>,
}

pub struct Panel {
    pub y_label: String,
    pub series: Vec<Series>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub panels: Vec<Panel>,
}

fn series(table: &Table, path: &Path, x: &str, y: &str, name: &str) -> Result<Series, AppError> {
    let xs = table.numbers(path, x)?;
    let ys = table.numbers(path, y)?;
    let points = xs.into_iter().zip(ys).map(|(a, b)| a.zip(b)).collect();
    Ok(Series { name: name.to_string(), points })
}

fn panel(table: &Table, path: &Path, x: &str, label: &str, cols: &[(&str, &str)]) -> Result<Panel, AppError> {
    let series = cols.iter().map(|(c, n)| series(table, path, x, c, n)).collect::<Result<_, _>>()?;
    Ok(Panel { y_label: label.to_string(), series })
}

/// Builds the chart for a CSV of the given kind.
pub fn chart_for(kind: PlotKind, input: &Path) -> Result<Chart, AppError> {
    let schema = match kind {
        PlotKind::Training => csvio::TRAINING,
        PlotKind::Trajectory => csvio::TRAJECTORY,
        PlotKind::Gains => csvio::GAINS,
    };
    let table = csvio::read(input, &[schema])?;
    if table.rows.is_empty() {
        return Err(AppError::corrupt(input, "no data rows"));
    }
    let p = input;
    let chart = match kind {
        PlotKind::Training => Chart {
            title: "Training legs per iteration".into(),
            x_label: "timestep".into(),
            panels: vec![
                panel(&table, p, "timestep", "effective speed (m/s)", &[("mean_leg_effective_speed", "effective speed")])?,
                panel(&table, p, "timestep", "settling time (s)", &[("settling_time_s", "settling time")])?,
                panel(&table, p, "timestep", "overshoot (m)", &[("overshoot_m", "overshoot")])?,
            ],
        },
        PlotKind::Trajectory => Chart {
            title: "Trajectory".into(),
            x_label: "t (s)".into(),
            panels: vec![
                panel(&table, p, "t", "position (m)", &[("x", "x"), ("y", "y"), ("z", "z")])?,
                panel(&table, p, "t", "position error (m)", &[("pe", "pe")])?,
            ],
        },
        PlotKind::Gains => Chart {
            title: "PID gains vs time".into(),
            x_label: "t (s)".into(),
            panels: vec![panel(&table, p, "t", "gain", &[("kp", "kp"), ("ki", "ki"), ("kd", "kd")])?],
        },
    };
    Ok(chart)
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn tick_label(v: f64, span: f64) -> String {
    let decimals = if span >= 100.0 {
        0
    } else if span >= 1.0 {
        2
    } else {
        (-span.log10()).ceil() as usize + 2
    };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the chart. Output depends only on the chart contents.
pub fn render_svg(chart: &Chart) -> String {
    let n = chart.panels.len().max(1) as f64;
    let height = TOP + n * PANEL_H + (n - 1.0) * GAP + 50.0;
    let plot_w = WIDTH - LEFT - RIGHT;
    let all_x = chart.panels.iter().flat_map(|p| p.series.iter()).flat_map(|s| s.points.iter().flatten().map(|q| q.0));
    let (x0, x1) = range(all_x);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(&chart.title));

    for (pi, panel) in chart.panels.iter().enumerate() {
        let top = TOP + pi as f64 * (PANEL_H + GAP);
        let bottom = top + PANEL_H;
        let (y0, y1) = range(panel.series.iter().flat_map(|s| s.points.iter().flatten().map(|q| q.1)));
        let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * PANEL_H;

        let _ = writeln!(out, r##"<rect x="{LEFT}" y="{top}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="#444"/>"##);
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let yv = y0 + f * (y1 - y0);
            let y = sy(yv);
            let xv = x0 + f * (x1 - x0);
            let x = sx(xv);
            let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + plot_w);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick_label(yv, y1 - y0));
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, bottom + 15.0, tick_label(xv, x1 - x0));
        }
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            top + PANEL_H / 2.0,
            top + PANEL_H / 2.0,
            escape(&panel.y_label)
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + plot_w / 2.0, bottom + 32.0, escape(&chart.x_label));

        for (si, s) in panel.series.iter().enumerate() {
            let color = COLORS[si % COLORS.len()];
            let mut segment: Vec<String> = Vec::new();
            let flush = |seg: &mut Vec<String>, out: &mut String| {
                if seg.len() == 1 {
                    let (x, y) = seg[0].split_once(',').unwrap();
                    let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="2" fill="{color}"/>"#);
                } else if seg.len() > 1 {
                    let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, seg.join(" "));
                }
                seg.clear();
            };
            for p in &s.points {
                match p {
                    Some((x, y)) => segment.push(format!("{:.2},{:.2}", sx(*x), sy(*y))),
                    None => flush(&mut segment, &mut out),
                }
            }
            flush(&mut segment, &mut out);
            let ly = top + 14.0 + si as f64 * 16.0;
            let lx = LEFT + plot_w + 12.0;
            let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&s.name));
        }
    }
    out.push_str("</svg>\n");
    out
}
