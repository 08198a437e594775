//! Minimal SVG charts: line charts with a legend and labeled scatter plots.

use std::fmt::Write;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Roughly `target` evenly spaced round values covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1000.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else if v.abs() >= 0.1 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let (a, b) = self.x;
        self.left + (x - a) / (b - a) * (self.width - self.left - self.right)
    }

    fn py(&self, y: f64) -> f64 {
        let (a, b) = self.y;
        self.height - self.bottom - (y - a) / (b - a) * (self.height - self.top - self.bottom)
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn open_svg(out: &mut String, f: &Frame, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = f.width,
        h = f.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="16">{}</text>"#,
        f.width / 2.0,
        escape(title)
    );
    let (x0, x1) = (f.left, f.width - f.right);
    let (y0, y1) = (f.height - f.bottom, f.top);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for t in nice_ticks(f.x.0, f.x.1, 8) {
        let px = f.px(t);
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 18.0, fmt_tick(t));
    }
    for t in nice_ticks(f.y.0, f.y.1, 6) {
        let py = f.py(t);
        let _ = writeln!(out, r##"<line x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, py + 4.0, fmt_tick(t));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        f.height - 8.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = (y0 + y1) / 2.0
    );
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), points, dashed: false }
    }
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub width: f64,
    pub height: f64,
}

impl LineChart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        LineChart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: vec![],
            width: 900.0,
            height: 520.0,
        }
    }

    pub fn to_svg(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let frame = Frame {
            width: self.width,
            height: self.height,
            left: 64.0,
            right: 180.0,
            top: 40.0,
            bottom: 48.0,
            x: padded_range(all().map(|p| p.0)),
            y: padded_range(all().map(|p| p.1)),
        };
        let mut out = String::new();
        open_svg(&mut out, &frame, &self.title, &self.x_label, &self.y_label);
        for (i, s) in self.series.iter().enumerate() {
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
                .collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 3""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.6"{dash} points="{}"/>"#,
                color(i),
                pts.join(" ")
            );
            let ly = frame.top + 8.0 + 18.0 * i as f64;
            let lx = self.width - frame.right + 14.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="3"{dash}/>"#,
                lx + 20.0,
                color(i)
            );
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.name));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub group: usize,
}

#[derive(Debug, Clone)]
pub struct ScatterChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<ScatterPoint>,
    pub group_names: Vec<String>,
    /// Text placed at (x, y) over the points.
    pub labels: Vec<(String, f64, f64)>,
    pub width: f64,
    pub height: f64,
}

impl ScatterChart {
    pub fn new(title: impl Into<String>) -> Self {
        ScatterChart {
            title: title.into(),
            x_label: "dimension 1".into(),
            y_label: "dimension 2".into(),
            points: vec![],
            group_names: vec![],
            labels: vec![],
            width: 900.0,
            height: 700.0,
        }
    }

    pub fn to_svg(&self) -> String {
        let xs = self.points.iter().map(|p| p.x).chain(self.labels.iter().map(|l| l.1));
        let ys = self.points.iter().map(|p| p.y).chain(self.labels.iter().map(|l| l.2));
        let frame = Frame {
            width: self.width,
            height: self.height,
            left: 64.0,
            right: 160.0,
            top: 40.0,
            bottom: 48.0,
            x: padded_range(xs),
            y: padded_range(ys),
        };
        let mut out = String::new();
        open_svg(&mut out, &frame, &self.title, &self.x_label, &self.y_label);
        for p in &self.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#,
                frame.px(p.x),
                frame.py(p.y),
                color(p.group)
            );
        }
        for (i, name) in self.group_names.iter().enumerate() {
            let ly = frame.top + 8.0 + 18.0 * i as f64;
            let lx = self.width - frame.right + 14.0;
            let _ = writeln!(out, r#"<circle cx="{}" cy="{ly}" r="5" fill="{}"/>"#, lx + 6.0, color(i));
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 18.0, ly + 4.0, escape(name));
        }
        for (text, x, y) in &self.labels {
            let (px, py) = (frame.px(*x), frame.py(*y));
            let _ = writeln!(
                out,
                r#"<text x="{px:.2}" y="{py:.2}" text-anchor="middle" font-size="14" font-weight="bold" stroke="white" stroke-width="3" paint-order="stroke">{}</text>"#,
                escape(text)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
