//! Minimal SVG line charts for metrics CSV files.
//!
//! The first CSV column is the horizontal axis. Each panel plots one or more
//! named columns as a polyline with a circle marker per row.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

struct Table {
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn load_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        for (col, field) in columns.iter_mut().zip(rec.iter()) {
            col.push(field.parse::<f64>().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                message: format!("not a number: `{field}`"),
            })?);
        }
    }
    Ok(Table { header, columns })
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One panel per entry of `panels`, stacked vertically.
pub fn render_panels(csv_path: &Path, panels: &[Vec<String>], out_path: &Path) -> Result<()> {
    let table = load_table(csv_path)?;
    let mut indices = Vec::with_capacity(panels.len());
    for panel in panels {
        let idx = panel
            .iter()
            .map(|name| {
                table
                    .header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        indices.push(idx);
    }
    if table.header.is_empty() {
        return Err(Error::MissingColumn("<x axis>".into()));
    }
    let svg = render_svg(&table, panels, &indices);
    std::fs::write(out_path, svg).map_err(|e| Error::io(out_path, e))
}

/// All `columns` on a single panel.
pub fn render_chart(csv_path: &Path, columns: &[String], out_path: &Path) -> Result<()> {
    render_panels(csv_path, &[columns.to_vec()], out_path)
}

fn render_svg(table: &Table, panels: &[Vec<String>], indices: &[Vec<usize>]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let xs = &table.columns[0];
    let x_label = &table.header[0];
    let (x_lo, x_hi) = range(xs.iter().copied());
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (p, (names, cols)) in panels.iter().zip(indices).enumerate() {
        let top = p as f64 * PANEL_HEIGHT + MARGIN_TOP;
        let bottom = top + plot_h;
        let (y_lo, y_hi) = range(cols.iter().flat_map(|&c| table.columns[c].iter().copied()));
        let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
        let sy = |y: f64| bottom - (y - y_lo) / (y_hi - y_lo) * plot_h;

        let _ = writeln!(svg, r#"<g class="panel" id="panel-{p}">"#);
        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text class="x-label" x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            bottom + 35.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text class="y-label" x="15" y="{:.3}" text-anchor="middle" transform="rotate(-90 15 {:.3})">{}</text>"#,
            top + plot_h / 2.0,
            top + plot_h / 2.0,
            escape(&names.join(", "))
        );
        for (label, x, y, anchor) in [
            (x_lo, MARGIN_LEFT, bottom + 16.0, "start"),
            (x_hi, MARGIN_LEFT + plot_w, bottom + 16.0, "end"),
        ] {
            let _ = writeln!(
                svg,
                r#"<text x="{x:.3}" y="{y:.3}" text-anchor="{anchor}">{label}</text>"#
            );
        }
        for (label, y) in [(y_lo, bottom), (y_hi, top + 10.0)] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.3}" y="{y:.3}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 5.0,
                format_tick(label)
            );
        }
        for (k, (&c, name)) in cols.iter().zip(names).enumerate() {
            let color = COLORS[k % COLORS.len()];
            let points: Vec<String> = xs
                .iter()
                .zip(&table.columns[c])
                .map(|(&x, &y)| format!("{:.3},{:.3}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline class="series" data-column="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                escape(name),
                points.join(" ")
            );
            for (&x, &y) in xs.iter().zip(&table.columns[c]) {
                let _ = writeln!(
                    svg,
                    r#"<circle class="marker" cx="{:.3}" cy="{:.3}" r="2" fill="{color}"/>"#,
                    sx(x),
                    sy(y)
                );
            }
            let _ = writeln!(
                svg,
                r#"<text x="{:.3}" y="{:.3}" fill="{color}" text-anchor="end">{}</text>"#,
                WIDTH - MARGIN_RIGHT - 5.0,
                top + 15.0 + 14.0 * k as f64,
                escape(name)
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v}")
    } else {
        format!("{v:.4}")
    }
}
