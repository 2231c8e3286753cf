//! Minimal SVG line charts.

use std::fmt::Write;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const WIDTH: f64 = 900.0;
const PANEL: f64 = 260.0;
const MARGIN: f64 = 50.0;
const MAX_POINTS: usize = 4000;

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

impl<'a> Series<'a> {
    /// Samples at rate `fs` against time in seconds.
    pub fn sampled(name: &'a str, samples: &[f64], fs: f64) -> Self {
        let stride = samples.len().div_ceil(MAX_POINTS).max(1);
        let points = samples
            .iter()
            .enumerate()
            .step_by(stride)
            .map(|(i, &v)| (i as f64 / fs, v))
            .collect();
        Series { name, points }
    }
}

/// One panel holding every series.
pub fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series], markers: bool) -> String {
    stacked(title, x_label, &[(y_label, series)], markers)
}

/// Panels stacked vertically, sharing the x label.
pub fn stacked(title: &str, x_label: &str, panels: &[(&str, &[Series])], markers: bool) -> String {
    let height = MARGIN * 2.0 + PANEL * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    for (row, (label, series)) in panels.iter().enumerate() {
        let top = MARGIN + PANEL * row as f64;
        panel(&mut svg, top, label, series, markers);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        height - 10.0,
        escape(x_label)
    );
    svg.push_str("</svg>\n");
    svg
}

fn panel(svg: &mut String, top: f64, y_label: &str, series: &[Series], markers: bool) {
    let (left, right) = (MARGIN + 20.0, WIDTH - 150.0);
    let (upper, lower) = (top + 10.0, top + PANEL - 30.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return;
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let py = |y: f64| lower - (y - y0) / (y1 - y0) * (lower - upper);

    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{upper}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        right - left,
        lower - upper
    );
    for (v, anchor, x, y) in [
        (y1, "end", left - 4.0, upper + 4.0),
        (y0, "end", left - 4.0, lower),
        (x0, "start", left, lower + 14.0),
        (x1, "end", right, lower + 14.0),
    ] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#, tick(v));
    }
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        (upper + lower) / 2.0,
        (upper + lower) / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut path = String::new();
        for &(x, y) in &s.points {
            let _ = write!(path, "{:.2},{:.2} ", px(x), py(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            path.trim_end()
        );
        if markers {
            for &(x, y) in &s.points {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
            }
        }
        let ly = upper + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            right + 10.0,
            right + 30.0,
            right + 35.0,
            ly + 4.0,
            escape(s.name)
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
