//! Minimal SVG line chart of reward against episode.

use std::fmt::Write;
use std::path::Path;

use crate::error::CliError;
use crate::output::{write_atomic, Table};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub colour: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Renders `series` with an optional dashed horizontal rule at `reference`.
pub fn line_chart(title: &str, series: &[Series<'_>], reference: Option<(f64, &str)>) -> String {
    let finite = |v: &f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).filter(finite);
    let ys = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .chain(reference.map(|r| r.0))
        .filter(finite);
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#, left - 4.0, sy(y) + 4.0, y);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.0}</text>"#, sx(x), bottom + 16.0, x);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">reward</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    if let Some((value, label)) = reference {
        let y = sy(value);
        let _ = writeln!(
            svg,
            r#"<line x1="{left}" y1="{y:.1}" x2="{right}" y2="{y:.1}" stroke="gray" stroke-dasharray="6 4"/>"#
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end" fill="gray">{}</text>"#, right, y - 4.0, escape(label));
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" stroke="{}" fill="none" stroke-width="1.5"/>"#,
                pts.join(" "),
                s.colour
            );
        }
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{}">{}</text>"#,
            left + 10.0,
            s.colour,
            escape(s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn column_points(table: &Table, x: &str, y: &str) -> Vec<(f64, f64)> {
    let (Some(ix), Some(iy)) = (table.column(x), table.column(y)) else {
        return Vec::new();
    };
    table
        .rows
        .iter()
        .filter_map(|r| Some((r[ix].parse().ok()?, r[iy].parse().ok()?)))
        .collect()
}

/// Draws the chart for a `mean.csv` written by `train` or `transfer`.
pub fn chart_from_mean(table: &Table, title: &str) -> String {
    let meta = table.metadata_map();
    let exact: Option<f64> = meta.get("exact_maxcut").and_then(|v| v.parse().ok());
    let series = [
        Series {
            label: "noisy reward, rolling mean",
            colour: "#1f77b4",
            points: column_points(table, "episode", "noisy_rolling"),
        },
        Series {
            label: "best greedy reward",
            colour: "#d62728",
            points: column_points(table, "episode", "best_greedy_mean"),
        },
    ];
    line_chart(title, &series, exact.map(|e| (e, "exact maxcut")))
}

/// Rewrites `reward.svg` next to every `mean.csv` under `root`.
pub fn replot(root: &Path) -> Result<Vec<std::path::PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| CliError::io(format!("listing {}", dir.display()), e))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "mean.csv") {
                let table = Table::read(&path)?;
                let title = dir.strip_prefix(root).unwrap_or(&dir).display().to_string();
                let svg_path = dir.join("reward.svg");
                write_atomic(&svg_path, chart_from_mean(&table, &title).as_bytes())?;
                written.push(svg_path);
            }
        }
    }
    written.sort();
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_series_and_rule() {
        let svg = line_chart(
            "t <1>",
            &[Series {
                label: "a",
                colour: "red",
                points: vec![(1.0, 0.5), (2.0, 0.7), (3.0, f64::NAN)],
            }],
            Some((1.0, "exact")),
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("t &lt;1&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_chart_is_well_formed() {
        let svg = line_chart("empty", &[], None);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
