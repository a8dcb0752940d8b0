//! Minimal SVG emitter: axes, ticks and polylines.

use std::fmt::Write;

use crate::report::{Check, Metric, Series};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Affine map from data to pixels, with optional log10 on y.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_y: bool,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>, log_y: bool) -> Self {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in points {
            let b = if log_y { if b > 0.0 { b.log10() } else { continue } } else { b };
            if a.is_finite() && b.is_finite() {
                x = (x.0.min(a), x.1.max(a));
                y = (y.0.min(b), y.1.max(b));
            }
        }
        let widen = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 <= 1e-300 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                let pad = 0.05 * (r.1 - r.0);
                (r.0 - pad, r.1 + pad)
            }
        };
        Self { x: widen(x), y: widen(y), log_y }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> Option<f64> {
        let y = if self.log_y {
            if y > 0.0 {
                y.log10()
            } else {
                return None;
            }
        } else {
            y
        };
        y.is_finite().then(|| HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM))
    }
}

fn axes(out: &mut String, f: &Frame, title: &str, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(out, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for k in 0..=4 {
        let a = k as f64 / 4.0;
        let xv = f.x.0 + a * (f.x.1 - f.x.0);
        let px = f.px(xv);
        let _ = writeln!(out, r#"<line x1="{px:.1}" y1="{y1}" x2="{px:.1}" y2="{}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.1}" y="{}" font-size="11" text-anchor="middle">{}</text>"#, y1 + 18.0, fmt_tick(xv));
        let yv = f.y.0 + a * (f.y.1 - f.y.0);
        let py = y1 - a * (y1 - y0);
        let label = if f.log_y { fmt_tick(10f64.powf(yv)) } else { fmt_tick(yv) };
        let _ = writeln!(out, r#"<line x1="{}" y1="{py:.1}" x2="{x0}" y2="{py:.1}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" font-size="11" text-anchor="end">{label}</text>"#, x0 - 8.0, py + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// One polyline per line of the series, with a legend.
pub fn line_plot(series: &Series) -> String {
    let f = Frame::fit(series.lines.iter().flat_map(|(_, p)| p.iter().copied()), series.log_y);
    let mut out = header();
    axes(&mut out, &f, &series.title, &series.x_label, &series.y_label);
    for (k, (label, points)) in series.lines.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = points
            .iter()
            .filter_map(|&(x, y)| f.py(y).filter(|_| x.is_finite()).map(|py| format!("{:.2},{:.2}", f.px(x), py)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let lx = WIDTH - RIGHT - 150.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, lx + 26.0, ly + 4.0, escape(label));
    }
    out.push_str("</svg>\n");
    out
}

/// Each metric as a marker at its value, with its threshold as a dashed
/// tick; passing metrics green, failing red. Log scale when all values
/// and thresholds are positive.
pub fn metric_chart(metrics: &[Metric]) -> String {
    let threshold = |m: &Metric| match m.check {
        Check::AtMost(t) | Check::AtLeast(t) | Check::Equals(t) => Some(t),
        Check::Info => None,
    };
    let points: Vec<(f64, f64)> = metrics
        .iter()
        .enumerate()
        .flat_map(|(k, m)| std::iter::once(m.value).chain(threshold(m)).map(move |v| (k as f64, v)))
        .collect();
    let log_y = !points.is_empty() && points.iter().all(|p| p.1 > 0.0);
    let mut f = Frame::fit(points.iter().copied(), log_y);
    f.x = (-0.5, metrics.len().max(1) as f64 - 0.5);
    let mut out = header();
    axes(&mut out, &f, "metrics", "metric index", "value");
    for (k, m) in metrics.iter().enumerate() {
        let px = f.px(k as f64);
        let color = if m.pass { "#2ca02c" } else { "#d62728" };
        if let Some(py) = f.py(m.value) {
            let _ = writeln!(out, r#"<circle cx="{px:.1}" cy="{py:.1}" r="4" fill="{color}"><title>{}</title></circle>"#, escape(&m.name));
        }
        if let Some(py) = threshold(m).and_then(|t| f.py(t)) {
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="black" stroke-dasharray="3,2"/>"#,
                px - 10.0,
                px + 10.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
