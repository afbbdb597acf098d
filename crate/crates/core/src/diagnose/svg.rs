//! Static SVG renderings of the diagnostics.
//!
//! Plots are 640×400 with a 50px margin, black axes, a 10-colour palette
//! cycled by series and stroke widths scaled by region weight where
//! applicable. No fonts beyond the default sans-serif are referenced.

use std::fmt::Write;

use super::{CoefficientMatrix, ImportanceReport, ProfileSegment};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    out
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String) {
        let _ = writeln!(
            out,
            r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
            m = MARGIN,
            b = HEIGHT - MARGIN,
            r = WIDTH - MARGIN,
            t = MARGIN
        );
        for (v, anchor_y) in [(self.y.0, HEIGHT - MARGIN), (self.y.1, MARGIN)] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{:.3}</text>"#,
                MARGIN - 4.0,
                anchor_y + 3.0,
                v
            );
        }
    }
}

/// Parallel-coordinate plot: one polyline per coefficient row.
pub fn parallel_coordinates(matrix: &CoefficientMatrix, axis_names: &[String]) -> String {
    let mut out = open("Local linear model coefficients");
    let n_axes = matrix.rows.first().map_or(0, Vec::len).max(2);
    let frame = Frame {
        x: (0.0, (n_axes - 1) as f64),
        y: range(matrix.rows.iter().flatten().copied()),
    };
    frame.axes(&mut out);
    for (k, name) in axis_names.iter().enumerate().take(n_axes) {
        let x = frame.px(k as f64);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#cccccc"/><text x="{x:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{}</text>"##,
            MARGIN,
            HEIGHT - MARGIN,
            HEIGHT - MARGIN + 14.0,
            escape(name)
        );
    }
    for (r, row) in matrix.rows.iter().enumerate() {
        let points: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{:.2},{:.2}", frame.px(k as f64), frame.py(*v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-opacity="0.7"/>"#,
            points.join(" "),
            PALETTE[r % PALETTE.len()]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal importance bars, most important on top.
pub fn importance_bars(report: &ImportanceReport, feature_names: &[String], top: usize) -> String {
    let mut out = open("Feature importance");
    let order: Vec<usize> = report.order().into_iter().take(top.max(1)).collect();
    let max = order.iter().map(|&j| report.scores[j]).fold(0.0, f64::max).max(1e-12);
    let band = (HEIGHT - 2.0 * MARGIN) / order.len().max(1) as f64;
    let left = MARGIN + 70.0;
    for (pos, &j) in order.iter().enumerate() {
        let y = MARGIN + pos as f64 * band;
        let w = report.scores[j] / max * (WIDTH - MARGIN - left);
        let _ = writeln!(
            out,
            r#"<rect x="{left:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{}"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{}</text>"#,
            y + band * 0.15,
            band * 0.7,
            PALETTE[0],
            left - 4.0,
            y + band * 0.6,
            escape(&feature_names[j])
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One line segment per region over its observed range of the feature.
pub fn profile_lines(segments: &[ProfileSegment], feature_name: &str) -> String {
    let mut out = open(&format!("Local linear profile: {feature_name}"));
    let frame = Frame {
        x: range(segments.iter().flat_map(|s| [s.lo, s.hi])),
        y: range(segments.iter().flat_map(|s| [s.eval(s.lo), s.eval(s.hi)])),
    };
    frame.axes(&mut out);
    let max_weight = segments.iter().map(|s| s.weight).max().unwrap_or(1) as f64;
    for (k, s) in segments.iter().enumerate() {
        let width = 1.0 + 4.0 * s.weight as f64 / max_weight;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="{width:.2}"/>"#,
            frame.px(s.lo),
            frame.py(s.eval(s.lo)),
            frame.px(s.hi),
            frame.py(s.eval(s.hi)),
            PALETTE[k % PALETTE.len()]
        );
    }
    out.push_str("</svg>\n");
    out
}
