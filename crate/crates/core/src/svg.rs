//! Minimal SVG line charts drawn from the experiment CSV files.

use std::fmt::Write as _;

use crate::{Result, SscError};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    y0 = y0.min(0.0);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, r#"<path d="M{left} {top} V{bottom} H{right}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(xv), bottom + 18.0, fmt_tick(xv));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, sy(yv) + 4.0, fmt_tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let d: Vec<String> = s
            .points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, sx(x), sy(y)))
            .collect();
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.join(" "));
        for &(x, y) in &s.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = top + 16.0 * k as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#, right - 110.0, ly - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, right - 94.0, ly, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

/// Data rows of a CSV written by the experiment module, split into fields.
fn csv_records(text: &str, header: &str) -> Result<Vec<Vec<String>>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some(h) if h == header => {}
        _ => return Err(SscError::Parse { line: 0, message: format!("expected header {header:?}") }),
    }
    Ok(lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn num(field: &str) -> Result<f64> {
    field.parse().map_err(|_| SscError::Parse { line: 0, message: format!("invalid number {field:?}") })
}

/// FPR and TPR against the grid multiplier, from `results.csv` content.
pub fn rates_chart(results_csv: &str) -> Result<String> {
    let rows = csv_records(results_csv, crate::experiment::RESULTS_HEADER)?;
    let mut fpr = Series { name: "FPR".into(), points: Vec::new() };
    let mut tpr = Series { name: "TPR".into(), points: Vec::new() };
    for r in &rows {
        let x = num(&r[1])?;
        fpr.points.push((x, num(&r[2])?));
        tpr.points.push((x, num(&r[3])?));
    }
    Ok(line_chart("Discovery rates", "penalty multiplier", "rate", &[fpr, tpr]))
}

/// TPR against FPR per dimension class, from `roc.csv` content.
pub fn roc_chart(roc_csv: &str) -> Result<String> {
    let rows = csv_records(roc_csv, crate::experiment::ROC_HEADER)?;
    let mut series: Vec<Series> = Vec::new();
    for r in &rows {
        let name = if r[1] == "all" { "all".to_string() } else { format!("d = {}", r[1]) };
        let point = (num(&r[2])?, num(&r[3])?);
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push(point),
            None => series.push(Series { name, points: vec![point] }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    Ok(line_chart("ROC", "FPR", "TPR", &series))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_each_series() {
        let svg = line_chart("t", "x", "y", &[
            Series { name: "a".into(), points: vec![(0.0, 0.0), (1.0, 1.0)] },
            Series { name: "b<c".into(), points: vec![(0.5, 2.0)] },
        ]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("b&lt;c"));
    }

    #[test]
    fn rejects_foreign_csv() {
        assert!(rates_chart("a,b\n1,2\n").is_err());
    }
}
