//! Self-contained SVG figures: grouped box plots, calibration curves with
//! the identity diagonal, and decision curves with treat-all / treat-none
//! references. No external renderer is involved; output is deterministic
//! text, which keeps figures diff-able in tests.

use crate::error::{Error, Result};
use crate::num::quantile;
use std::fmt::Write as _;

/// Fill colors keyed by series name; unknown names cycle the palette.
const PALETTE: [(&str, &str); 4] = [
    ("unadjusted", "#2a6f97"),
    ("undersampled", "#c44536"),
    ("oversampled", "#5f8f4e"),
    ("smote", "#c9a227"),
];
const EXTRA_COLORS: [&str; 4] = ["#7251b5", "#b5179e", "#3a0ca3", "#7f5539"];

fn color_for(name: &str, index: usize) -> &'static str {
    PALETTE
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| *c)
        .unwrap_or(EXTRA_COLORS[index % EXTRA_COLORS.len()])
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !(0.001..1000.0).contains(&v.abs()) {
        return format!("{v:e}");
    }
    let t = format!("{v:.3}");
    t.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Tick positions with a "nice" step (1, 2, or 5 times a power of ten).
fn nice_ticks(min: f64, max: f64, target: usize) -> Vec<f64> {
    if !(max > min) {
        return vec![min];
    }
    let raw = (max - min) / target.max(2) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| (max - min) / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (min / step).ceil() * step;
    let mut out = Vec::new();
    let mut t = first;
    while t <= max + 1e-9 * step {
        // Snap near-zero ticks produced by cancellation to exactly zero.
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

/// A drawing area mapping data coordinates to pixels.
struct Frame {
    px0: f64,
    py0: f64,
    px1: f64,
    py1: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.px0 + (v - self.xmin) / (self.xmax - self.xmin) * (self.px1 - self.px0)
    }
    fn y(&self, v: f64) -> f64 {
        // Pixel y grows downward.
        self.py1 - (v - self.ymin) / (self.ymax - self.ymin) * (self.py1 - self.py0)
    }
}

struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Svg {
        Svg { width, height, body: String::new() }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        writeln!(
            self.body,
            r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" {style}/>"#
        )
        .unwrap();
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, style: &str) {
        writeln!(
            self.body,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{h:.1}" {style}/>"#
        )
        .unwrap();
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, style: &str) {
        writeln!(self.body, r#"<circle cx="{x:.1}" cy="{y:.1}" r="{r:.1}" {style}/>"#).unwrap();
    }

    fn polyline(&mut self, pts: &[(f64, f64)], style: &str) {
        let mut s = String::new();
        for (x, y) in pts {
            let _ = write!(s, "{x:.1},{y:.1} ");
        }
        writeln!(self.body, r#"<polyline points="{}" fill="none" {style}/>"#, s.trim_end())
            .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, content: &str, extra: &str) {
        writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="12" {extra}>{}</text>"#,
            esc(content)
        )
        .unwrap();
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

fn draw_y_axis(svg: &mut Svg, f: &Frame, label: &str) {
    svg.line(f.px0, f.py0, f.px0, f.py1, r#"stroke="black" stroke-width="1""#);
    for t in nice_ticks(f.ymin, f.ymax, 6) {
        let y = f.y(t);
        svg.line(f.px0 - 4.0, y, f.px0, y, r#"stroke="black" stroke-width="1""#);
        svg.line(f.px0, y, f.px1, y, r##"stroke="#dddddd" stroke-width="0.5""##);
        svg.text(f.px0 - 7.0, y + 4.0, "end", &fmt_num(t), "");
    }
    let cx = f.px0 - 42.0;
    let cy = (f.py0 + f.py1) / 2.0;
    svg.text(cx, cy, "middle", label, &format!(r#"transform="rotate(-90 {cx:.1} {cy:.1})""#));
}

fn draw_x_axis(svg: &mut Svg, f: &Frame, label: &str) {
    svg.line(f.px0, f.py1, f.px1, f.py1, r#"stroke="black" stroke-width="1""#);
    for t in nice_ticks(f.xmin, f.xmax, 8) {
        let x = f.x(t);
        svg.line(x, f.py1, x, f.py1 + 4.0, r#"stroke="black" stroke-width="1""#);
        svg.text(x, f.py1 + 17.0, "middle", &fmt_num(t), "");
    }
    svg.text((f.px0 + f.px1) / 2.0, f.py1 + 34.0, "middle", label, "");
}

fn draw_legend(svg: &mut Svg, x: f64, y0: f64, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        let y = y0 + i as f64 * 18.0;
        svg.rect(
            x,
            y - 9.0,
            12.0,
            12.0,
            &format!(r#"fill="{}" stroke="none""#, color_for(name, i)),
        );
        svg.text(x + 17.0, y + 1.0, "start", name, "");
    }
}

// ---------------------------------------------------------------------------
// Box plots
// ---------------------------------------------------------------------------

/// One labelled cluster of boxes (e.g. one scenario), each box one series.
pub struct BoxGroup {
    pub label: String,
    /// (series name, raw values) — quartiles and whiskers are derived here.
    pub series: Vec<(String, Vec<f64>)>,
}

struct BoxStats {
    median: f64,
    q25: f64,
    q75: f64,
    lo: f64,
    hi: f64,
}

/// Tukey box: whiskers at the most extreme points within 1.5 IQR of the
/// quartiles; more extreme points are not drawn.
fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let q25 = quantile(values, 0.25)?;
    let median = quantile(values, 0.5)?;
    let q75 = quantile(values, 0.75)?;
    let iqr = q75 - q25;
    let lo_fence = q25 - 1.5 * iqr;
    let hi_fence = q75 + 1.5 * iqr;
    let lo = values.iter().copied().filter(|v| *v >= lo_fence).fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().filter(|v| *v <= hi_fence).fold(f64::NEG_INFINITY, f64::max);
    Some(BoxStats { median, q25, q75, lo, hi })
}

/// Grouped box plot. Optionally draws a horizontal reference line (e.g. the
/// ideal value of the plotted metric).
pub fn render_boxplot(
    title: &str,
    y_label: &str,
    groups: &[BoxGroup],
    reference: Option<f64>,
) -> Result<String> {
    if groups.is_empty() || groups.iter().all(|g| g.series.iter().all(|(_, v)| v.is_empty())) {
        return Err(Error::DegenerateInput("box plot without data".into()));
    }
    let max_boxes = groups.iter().map(|g| g.series.len()).max().unwrap();
    let box_w = 16.0;
    let box_gap = 5.0;
    let group_w = max_boxes as f64 * (box_w + box_gap) + 26.0;
    let (px0, py0) = (70.0, 40.0);
    let px1 = px0 + group_w * groups.len() as f64;
    let py1 = 440.0;
    let width = px1 + 150.0;
    let height = py1 + 60.0;

    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for g in groups {
        for (_, values) in &g.series {
            if let Some(s) = box_stats(values) {
                ymin = ymin.min(s.lo);
                ymax = ymax.max(s.hi);
            }
        }
    }
    if let Some(r) = reference {
        ymin = ymin.min(r);
        ymax = ymax.max(r);
    }
    if ymin == ymax {
        ymin -= 0.5;
        ymax += 0.5;
    }
    let pad = 0.05 * (ymax - ymin);
    let f = Frame { px0, py0, px1, py1, xmin: 0.0, xmax: 1.0, ymin: ymin - pad, ymax: ymax + pad };

    let mut svg = Svg::new(width, height);
    svg.text((px0 + px1) / 2.0, 22.0, "middle", title, r#"font-weight="bold""#);
    draw_y_axis(&mut svg, &f, y_label);
    svg.line(px0, py1, px1, py1, r#"stroke="black" stroke-width="1""#);

    if let Some(r) = reference {
        let y = f.y(r);
        svg.line(px0, y, px1, y, r##"stroke="#888888" stroke-width="1" stroke-dasharray="5,4""##);
    }

    let mut legend: Vec<String> = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let gx = px0 + gi as f64 * group_w + 13.0;
        for (si, (name, values)) in g.series.iter().enumerate() {
            if !legend.contains(name) {
                legend.push(name.clone());
            }
            let Some(s) = box_stats(values) else { continue };
            let x = gx + si as f64 * (box_w + box_gap);
            let color = color_for(name, si);
            let stroke = format!(r#"stroke="{color}" stroke-width="1.2""#);
            let cx = x + box_w / 2.0;
            // Whiskers, box, median bar.
            svg.line(cx, f.y(s.lo), cx, f.y(s.q25), &stroke);
            svg.line(cx, f.y(s.q75), cx, f.y(s.hi), &stroke);
            svg.rect(
                x,
                f.y(s.q75),
                box_w,
                (f.y(s.q25) - f.y(s.q75)).max(0.5),
                &format!(r#"fill="{color}" fill-opacity="0.35" {stroke}"#),
            );
            svg.line(x, f.y(s.median), x + box_w, f.y(s.median), &stroke);
        }
        svg.text(
            gx + (max_boxes as f64 * (box_w + box_gap) - box_gap) / 2.0,
            py1 + 17.0,
            "middle",
            &g.label,
            "",
        );
    }
    draw_legend(&mut svg, px1 + 14.0, py0 + 10.0, &legend);
    Ok(svg.finish())
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

/// A named polyline in data coordinates.
pub struct Curve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Calibration curves on the unit square with the identity diagonal.
pub fn render_calibration_plot(title: &str, curves: &[Curve]) -> Result<String> {
    if curves.is_empty() || curves.iter().all(|c| c.points.is_empty()) {
        return Err(Error::DegenerateInput("calibration plot without data".into()));
    }
    let f = Frame {
        px0: 70.0,
        py0: 40.0,
        px1: 520.0,
        py1: 440.0,
        xmin: 0.0,
        xmax: 1.0,
        ymin: 0.0,
        ymax: 1.0,
    };
    let mut svg = Svg::new(690.0, 500.0);
    svg.text((f.px0 + f.px1) / 2.0, 22.0, "middle", title, r#"font-weight="bold""#);
    draw_y_axis(&mut svg, &f, "observed proportion");
    draw_x_axis(&mut svg, &f, "estimated probability");
    // Perfect calibration reference.
    svg.line(
        f.x(0.0),
        f.y(0.0),
        f.x(1.0),
        f.y(1.0),
        r##"stroke="#888888" stroke-width="1" stroke-dasharray="5,4""##,
    );
    let mut names = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        names.push(c.name.clone());
        let color = color_for(&c.name, i);
        let pts: Vec<(f64, f64)> = c.points.iter().map(|&(x, y)| (f.x(x), f.y(y))).collect();
        if pts.len() == 1 {
            svg.circle(pts[0].0, pts[0].1, 3.0, &format!(r#"fill="{color}""#));
        } else {
            svg.polyline(&pts, &format!(r#"stroke="{color}" stroke-width="1.6""#));
        }
    }
    draw_legend(&mut svg, f.px1 + 14.0, f.py0 + 10.0, &names);
    Ok(svg.finish())
}

/// Decision curves: model net benefit across thresholds plus the treat-all
/// curve and the treat-none horizontal zero line.
pub fn render_decision_curve(title: &str, curves: &[Curve], treat_all: &Curve) -> Result<String> {
    if curves.is_empty() || curves.iter().all(|c| c.points.is_empty()) {
        return Err(Error::DegenerateInput("decision curve without data".into()));
    }
    let xmin = 0.0;
    let xmax = treat_all
        .points
        .iter()
        .chain(curves.iter().flat_map(|c| c.points.iter()))
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut ymax = f64::NEG_INFINITY;
    let mut ymin = 0.0f64;
    for p in treat_all.points.iter().chain(curves.iter().flat_map(|c| c.points.iter())) {
        ymax = ymax.max(p.1);
        ymin = ymin.min(p.1);
    }
    // Strongly negative net benefit is clinically equivalent to "harmful";
    // clip the axis so reference lines stay readable.
    ymin = ymin.max(-0.5 * ymax.abs().max(0.1));
    let f = Frame {
        px0: 70.0,
        py0: 40.0,
        px1: 520.0,
        py1: 440.0,
        xmin,
        xmax,
        ymin: ymin - 0.02,
        ymax: ymax + 0.02,
    };
    let mut svg = Svg::new(690.0, 500.0);
    svg.text((f.px0 + f.px1) / 2.0, 22.0, "middle", title, r#"font-weight="bold""#);
    draw_y_axis(&mut svg, &f, "net benefit");
    draw_x_axis(&mut svg, &f, "threshold probability");
    // Treat-none: net benefit 0 by definition.
    svg.line(f.x(xmin), f.y(0.0), f.x(xmax), f.y(0.0), r##"stroke="#555555" stroke-width="1""##);
    svg.text(f.x(xmax) - 4.0, f.y(0.0) - 5.0, "end", "treat none", r##"fill="#555555""##);
    {
        let pts: Vec<(f64, f64)> =
            treat_all.points.iter().map(|&(x, y)| (f.x(x), f.y(y.max(f.ymin)))).collect();
        svg.polyline(&pts, r##"stroke="#555555" stroke-width="1" stroke-dasharray="5,4""##);
        svg.text(
            f.x(xmin) + 6.0,
            f.y(treat_all.points.first().map(|p| p.1).unwrap_or(0.0)) - 6.0,
            "start",
            "treat all",
            r##"fill="#555555""##,
        );
    }
    let mut names = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        names.push(c.name.clone());
        let color = color_for(&c.name, i);
        let pts: Vec<(f64, f64)> =
            c.points.iter().map(|&(x, y)| (f.x(x), f.y(y.clamp(f.ymin, f.ymax)))).collect();
        if pts.len() == 1 {
            svg.circle(pts[0].0, pts[0].1, 3.0, &format!(r#"fill="{color}""#));
        } else {
            svg.polyline(&pts, &format!(r#"stroke="{color}" stroke-width="1.6""#));
        }
    }
    draw_legend(&mut svg, f.px1 + 14.0, f.py0 + 10.0, &names);
    Ok(svg.finish())
}
