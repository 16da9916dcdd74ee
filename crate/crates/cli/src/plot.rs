//! Standalone SVG line charts with error bars.

use std::fmt::Write as _;

use granlab::harness::{format_g9, CsvTable};
use granlab::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 4] = ["#2a9d3a", "#1f5fbf", "#c0392b", "#8e44ad"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Square,
    Triangle,
    Diamond,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    /// Error-bar bounds; a non-finite pair draws no bar.
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub marker: Marker,
    pub points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub series: Vec<Series>,
    pub zero_line: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Style {
    AccuracyVsSize,
    DeltaVsAxis,
}

fn series(name: &str, index: usize, points: Vec<PlotPoint>) -> Series {
    const MARKERS: [Marker; 4] = [
        Marker::Circle,
        Marker::Square,
        Marker::Triangle,
        Marker::Diamond,
    ];
    Series {
        name: name.into(),
        color: COLORS[index % COLORS.len()],
        marker: MARKERS[index % MARKERS.len()],
        points: points
            .into_iter()
            .filter(|p| p.x.is_finite() && p.y.is_finite())
            .collect(),
    }
}

/// Chart layout for a results table. Train-size axes use a log2 scale.
pub fn plot_spec(table: &CsvTable, style: Style, title: &str) -> PlotSpec {
    let x_scale = if table.axis == "train_size" {
        Scale::Log2
    } else {
        Scale::Linear
    };
    let x_label = table.axis.replace('_', " ");
    let pt = |x: f64, y: f64, low: f64, high: f64| PlotPoint { x, y, low, high };
    match style {
        Style::AccuracyVsSize => PlotSpec {
            title: title.into(),
            x_label,
            y_label: "coarse test accuracy".into(),
            x_scale,
            series: vec![
                series(
                    "fine-trained",
                    0,
                    table
                        .rows
                        .iter()
                        .map(|r| pt(r.axis_value, r.acc_fine, r.fine_low, r.fine_high))
                        .collect(),
                ),
                series(
                    "coarse-trained",
                    1,
                    table
                        .rows
                        .iter()
                        .map(|r| pt(r.axis_value, r.acc_coarse, r.coarse_low, r.coarse_high))
                        .collect(),
                ),
            ],
            zero_line: false,
        },
        Style::DeltaVsAxis => PlotSpec {
            title: title.into(),
            x_label,
            y_label: "accuracy difference (fine - coarse)".into(),
            x_scale,
            series: vec![series(
                "delta",
                2,
                table
                    .rows
                    .iter()
                    .map(|r| pt(r.axis_value, r.delta, r.spread_low, r.spread_high))
                    .collect(),
            )],
            zero_line: true,
        },
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Evenly spaced "nice" ticks covering `[lo, hi]`.
fn linear_ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    let ticks = (0..=n).map(|i| start + i as f64 * step).collect();
    (start, end, ticks)
}

struct Axis {
    scale: Scale,
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        let t = match self.scale {
            Scale::Linear => (v - self.lo) / (self.hi - self.lo),
            Scale::Log2 => (v.log2() - self.lo.log2()) / (self.hi.log2() - self.lo.log2()),
        };
        self.px_lo + t * (self.px_hi - self.px_lo)
    }
}

fn marker(out: &mut String, m: Marker, x: f64, y: f64, color: &str) {
    let r = 4.0;
    let _ = match m {
        Marker::Circle => writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{color}"/>"#
        ),
        Marker::Square => writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{}" height="{}" fill="{color}"/>"#,
            x - r,
            y - r,
            2.0 * r,
            2.0 * r
        ),
        Marker::Triangle => writeln!(
            out,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
            x,
            y - r,
            x - r,
            y + r,
            x + r,
            y + r
        ),
        Marker::Diamond => writeln!(
            out,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
            x,
            y - r,
            x + r,
            y,
            x,
            y + r,
            x - r,
            y
        ),
    };
}

fn x_range(spec: &PlotSpec) -> Result<(f64, f64)> {
    let xs: Vec<f64> = spec
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.x))
        .collect();
    if spec.x_scale == Scale::Log2 && xs.iter().any(|&x| x <= 0.0) {
        return Err(Error::domain("a log2 axis needs positive x values"));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(match (xs.is_empty(), spec.x_scale) {
        (true, Scale::Log2) => (1.0, 2.0),
        (true, Scale::Linear) => (0.0, 1.0),
        (false, Scale::Log2) if lo == hi => (lo / 2.0, hi * 2.0),
        (false, Scale::Log2) => (lo, hi),
        (false, Scale::Linear) if lo == hi => (lo - 0.5, hi + 0.5),
        (false, Scale::Linear) => (lo, hi),
    })
}

fn y_range(spec: &PlotSpec) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in spec.series.iter().flat_map(|s| &s.points) {
        for v in [p.y, p.low, p.high] {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if spec.zero_line {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

pub fn render_svg(spec: &PlotSpec) -> Result<String> {
    let (x_lo, x_hi) = x_range(spec)?;
    let (y_lo, y_hi) = y_range(spec);
    let (y_lo, y_hi, y_ticks) = linear_ticks(y_lo, y_hi);
    let (x_lo, x_hi, x_ticks) = match spec.x_scale {
        Scale::Linear => linear_ticks(x_lo, x_hi),
        Scale::Log2 => {
            let (a, b) = (x_lo.log2().floor() as i32, x_hi.log2().ceil() as i32);
            let b = b.max(a + 1);
            (
                2f64.powi(a),
                2f64.powi(b),
                (a..=b).map(|e| 2f64.powi(e)).collect(),
            )
        }
    };
    let xa = Axis {
        scale: spec.x_scale,
        lo: x_lo,
        hi: x_hi,
        px_lo: LEFT,
        px_hi: WIDTH - RIGHT,
    };
    let ya = Axis {
        scale: Scale::Linear,
        lo: y_lo,
        hi: y_hi,
        px_lo: HEIGHT - BOTTOM,
        px_hi: TOP,
    };

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&spec.title)
    );

    let _ = writeln!(w, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/>"#,
        WIDTH - RIGHT - LEFT,
        HEIGHT - BOTTOM - TOP
    );
    for &t in &x_ticks {
        let x = xa.map(t);
        let _ = writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}"/>"#,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 5.0
        );
    }
    for &t in &y_ticks {
        let y = ya.map(t);
        let _ = writeln!(
            w,
            r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}"/>"#,
            LEFT - 5.0
        );
    }
    let _ = writeln!(w, "</g>");

    let _ = writeln!(w, r#"<g class="tick-labels">"#);
    for &t in &x_ticks {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            xa.map(t),
            HEIGHT - BOTTOM + 18.0,
            format_g9(t)
        );
    }
    for &t in &y_ticks {
        // Round away float noise such as 0.30000000000000004.
        let label = format_g9((t * 1e9).round() / 1e9);
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{:.2}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
            LEFT - 8.0,
            ya.map(t)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{}{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 15.0,
        escape(&spec.x_label),
        if spec.x_scale == Scale::Log2 {
            " (log2)"
        } else {
            ""
        }
    );
    let _ = writeln!(
        w,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(&spec.y_label)
    );
    let _ = writeln!(w, "</g>");

    if spec.zero_line {
        let y = ya.map(0.0);
        let _ = writeln!(
            w,
            r##"<line class="zero-line" x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#777" stroke-dasharray="5 4"/>"##,
            WIDTH - RIGHT
        );
    }

    for s in &spec.series {
        let _ = writeln!(w, r#"<g class="series" data-name="{}">"#, escape(&s.name));
        if s.points.len() > 1 {
            let path: Vec<String> = s
                .points
                .iter()
                .map(|p| format!("{:.2},{:.2}", xa.map(p.x), ya.map(p.y)))
                .collect();
            let _ = writeln!(
                w,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                path.join(" "),
                s.color
            );
        }
        for p in &s.points {
            let x = xa.map(p.x);
            if p.low.is_finite() && p.high.is_finite() {
                let (y0, y1) = (ya.map(p.low), ya.map(p.high));
                let _ = writeln!(
                    w,
                    r#"<path d="M{:.2},{y0:.2}H{:.2}M{x:.2},{y0:.2}V{y1:.2}M{:.2},{y1:.2}H{:.2}" stroke="{}" fill="none"/>"#,
                    x - 3.0,
                    x + 3.0,
                    x - 3.0,
                    x + 3.0,
                    s.color
                );
            }
            marker(w, s.marker, x, ya.map(p.y), s.color);
        }
        let _ = writeln!(w, "</g>");
    }

    if !spec.series.is_empty() {
        let _ = writeln!(w, r#"<g class="legend">"#);
        for (i, s) in spec.series.iter().enumerate() {
            let x = WIDTH - RIGHT + 15.0;
            let y = TOP + 10.0 + 20.0 * i as f64;
            marker(w, s.marker, x, y, s.color);
            let _ = writeln!(
                w,
                r#"<text x="{}" y="{y:.2}" dominant-baseline="middle">{}</text>"#,
                x + 10.0,
                escape(&s.name)
            );
        }
        let _ = writeln!(w, "</g>");
    }
    let _ = writeln!(w, "</svg>");
    Ok(out)
}
