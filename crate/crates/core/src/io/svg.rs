//! Dependency-free SVG plots. Each panel draws its series as polylines
//! whose `points` are raw data coordinates inside a transformed group, so
//! tests can recover the plotted data exactly.

use std::fmt::Write;

use crate::optflow::FlowField;

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 320.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<[f64; 2]>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<[f64; 2]>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// same scale on both axes (plan views)
    pub equal_axes: bool,
}

fn bounds(series: &[Series]) -> [f64; 4] {
    let mut b = [
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    ];
    for p in series.iter().flat_map(|s| &s.points) {
        if p[0].is_finite() && p[1].is_finite() {
            b = [
                b[0].min(p[0]),
                b[1].max(p[0]),
                b[2].min(p[1]),
                b[3].max(p[1]),
            ];
        }
    }
    if !b[0].is_finite() {
        return [0.0, 1.0, 0.0, 1.0];
    }
    for i in [0, 2] {
        if b[i + 1] - b[i] < 1e-9 {
            b[i] -= 0.5;
            b[i + 1] += 0.5;
        }
    }
    b
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn panel(out: &mut String, p: &Panel, top: f64) {
    let [x0, x1, y0, y1] = bounds(&p.series);
    let (w, h) = (PANEL_W - 2.0 * MARGIN, PANEL_H - 2.0 * MARGIN);
    let (mut sx, mut sy) = (w / (x1 - x0), h / (y1 - y0));
    if p.equal_axes {
        let s = sx.min(sy);
        sx = s;
        sy = s;
    }
    let tx = MARGIN - x0 * sx;
    let ty = top + MARGIN + y1 * sy;
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{}" width="{w}" height="{h}" fill="none" stroke="#888"/>"##,
        top + MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        PANEL_W / 2.0,
        top + MARGIN * 0.6,
        escape(&p.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{} [{x0:.3}, {x1:.3}]</text>"#,
        PANEL_W / 2.0,
        top + PANEL_H - 10.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="12" y="{}" font-size="11" transform="rotate(-90 12 {})" text-anchor="middle">{} [{y0:.3}, {y1:.3}]</text>"#,
        top + PANEL_H / 2.0,
        top + PANEL_H / 2.0,
        escape(&p.y_label)
    );
    let _ = writeln!(out, r#"<g transform="matrix({sx} 0 0 {} {tx} {ty})">"#, -sy);
    for (k, s) in p.series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|q| q[0].is_finite() && q[1].is_finite())
            .map(|q| format!("{},{}", q[0], q[1]))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline data-label="{}" fill="none" stroke="{}" stroke-width="1.2" vector-effect="non-scaling-stroke" points="{}"/>"#,
            escape(&s.label),
            COLORS[k % COLORS.len()],
            pts.join(" ")
        );
    }
    out.push_str("</g>\n");
    for (k, s) in p.series.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{}">{}</text>"#,
            MARGIN + 6.0,
            top + MARGIN + 14.0 * (k + 1) as f64,
            COLORS[k % COLORS.len()],
            escape(&s.label)
        );
    }
}

/// Vertically stacked panels in one SVG document.
pub fn render_figure(panels: &[Panel]) -> String {
    let height = PANEL_H * panels.len().max(1) as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PANEL_W}\" height=\"{height}\" viewBox=\"0 0 {PANEL_W} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, PANEL_H * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

/// Flow vectors drawn every `step` pixels, scaled by `scale`, in image
/// coordinates (y down).
pub fn render_quiver(field: &FlowField, step: usize, scale: f64) -> String {
    let step = step.max(1);
    let (w, h) = (field.width as f64, field.height as f64);
    let px = 8.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"black\"/>\n",
        w * px,
        h * px
    );
    for y in (step / 2..field.height).step_by(step) {
        for x in (step / 2..field.width).step_by(step) {
            let v = field.get(x, y) * scale;
            let (x, y) = (x as f64, y as f64);
            let _ = writeln!(
                out,
                r##"<polyline fill="none" stroke="#00ff00" stroke-width="0.15" points="{x},{y} {},{}"/>"##,
                x + v.x,
                y + v.y
            );
            let _ = writeln!(
                out,
                r##"<circle cx="{x}" cy="{y}" r="0.2" fill="#00ff00"/>"##
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Point lists of every polyline in an SVG produced here, in document
/// order.
pub fn parse_polylines(svg: &str) -> Vec<Vec<[f64; 2]>> {
    svg.match_indices("<polyline")
        .filter_map(|(i, _)| {
            let rest = &svg[i..];
            let start = rest.find("points=\"")? + 8;
            let end = rest[start..].find('"')? + start;
            Some(
                rest[start..end]
                    .split_whitespace()
                    .filter_map(|pair| {
                        let (a, b) = pair.split_once(',')?;
                        Some([a.parse().ok()?, b.parse().ok()?])
                    })
                    .collect(),
            )
        })
        .collect()
}
