//! Static SVG 1.1 renderings of the matrix displays and ECDF plots.
//!
//! Matrix displays draw exactly one element of class `glyph` per cell, so a
//! K x K matrix always yields K^2 glyphs.

use std::fmt::Write as _;
use std::path::PathBuf;

use errstat_core::sip::{msip_from_sip, DeltaEcdfReport};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderKind {
    CorrEllipse,
    SipDisk,
    RankHeatmap,
    DeltaEcdf,
    AbsEcdf,
}

impl RenderKind {
    pub fn name(&self) -> &'static str {
        match self {
            RenderKind::CorrEllipse => "CORR_ELLIPSE",
            RenderKind::SipDisk => "SIP_DISK",
            RenderKind::RankHeatmap => "RANK_HEATMAP",
            RenderKind::DeltaEcdf => "DELTA_ECDF",
            RenderKind::AbsEcdf => "ABS_ECDF",
        }
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self, RenderKind::CorrEllipse | RenderKind::SipDisk | RenderKind::RankHeatmap)
    }
}

/// Colour map used by each kind; fixed, not configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMap {
    /// Blue for positive, red for negative, saturation growing with |value|.
    SignedSaturation,
    /// Red at 0, white at 0.5, blue at 1.
    DivergingBlueWhiteRed,
    /// White at 0 to dark blue at 1.
    SequentialBlues,
    /// Categorical line colours.
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub kind: RenderKind,
    pub size_px: u32,
    pub output: Option<PathBuf>,
}

pub const MIN_SIZE_PX: u32 = 200;
pub const DEFAULT_SIZE_PX: u32 = 600;

impl RenderSpec {
    pub fn new(kind: RenderKind, size_px: u32) -> Result<Self> {
        if size_px < MIN_SIZE_PX {
            return Err(render_error(kind, format!("size {size_px} px is below {MIN_SIZE_PX} px")));
        }
        Ok(RenderSpec { kind, size_px, output: None })
    }

    pub fn with_output(mut self, path: impl Into<PathBuf>) -> Self {
        self.output = Some(path.into());
        self
    }

    pub fn color_map(&self) -> ColorMap {
        match self.kind {
            RenderKind::CorrEllipse => ColorMap::SignedSaturation,
            RenderKind::SipDisk => ColorMap::DivergingBlueWhiteRed,
            RenderKind::RankHeatmap => ColorMap::SequentialBlues,
            RenderKind::DeltaEcdf | RenderKind::AbsEcdf => ColorMap::Categorical,
        }
    }

    /// Writes `svg` to the output path, if any.
    pub fn write(&self, svg: &str) -> Result<()> {
        if let Some(path) = &self.output {
            std::fs::write(path, svg).map_err(|source| CliError::Output { path: path.clone(), source })?;
        }
        Ok(())
    }
}

fn render_error(kind: RenderKind, message: impl Into<String>) -> CliError {
    CliError::Render { kind: kind.name(), message: message.into() }
}

type Rgb = (u8, u8, u8);

const WHITE: Rgb = (255, 255, 255);
const BLUE: Rgb = (33, 102, 172);
const RED: Rgb = (178, 24, 43);
const DARK_BLUE: Rgb = (8, 48, 107);
const PALETTE: [Rgb; 8] = [
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (127, 127, 127),
];

fn lerp(a: Rgb, b: Rgb, t: f64) -> Rgb {
    let t = t.clamp(0.0, 1.0);
    let f = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * t).round() as u8;
    (f(a.0, b.0), f(a.1, b.1), f(a.2, b.2))
}

fn hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", c.0, c.1, c.2)
}

/// Fill for a value under the given colour map.
pub fn color_for(map: ColorMap, value: f64) -> String {
    hex(match map {
        ColorMap::SignedSaturation if value >= 0.0 => lerp(WHITE, BLUE, value),
        ColorMap::SignedSaturation => lerp(WHITE, RED, -value),
        ColorMap::DivergingBlueWhiteRed if value < 0.5 => lerp(RED, WHITE, value / 0.5),
        ColorMap::DivergingBlueWhiteRed => lerp(WHITE, BLUE, (value - 0.5) / 0.5),
        ColorMap::SequentialBlues => lerp(WHITE, DARK_BLUE, value),
        ColorMap::Categorical => PALETTE[(value.max(0.0) as usize) % PALETTE.len()],
    })
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn header(size: u32, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<rect class="background" x="0" y="0" width="{size}" height="{size}" fill="white"/>"#);
    s
}

fn check_matrix(values: &[Vec<f64>], labels: &[String], kind: RenderKind) -> Result<()> {
    let k = values.len();
    if k == 0 {
        return Err(render_error(kind, "empty matrix"));
    }
    if labels.len() != k {
        return Err(render_error(kind, format!("{} labels for a {k} x {k} matrix", labels.len())));
    }
    for (i, row) in values.iter().enumerate() {
        if row.len() != k {
            return Err(render_error(kind, format!("row {i} has {} entries, expected {k}", row.len())));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(render_error(kind, format!("non-finite value {v} in row {i}")));
        }
    }
    const EPS: f64 = 1e-9;
    match kind {
        RenderKind::CorrEllipse => {
            if values.iter().flatten().any(|v| v.abs() > 1.0 + EPS) {
                return Err(render_error(kind, "correlation outside [-1, 1]"));
            }
        }
        RenderKind::SipDisk => {
            if values.iter().flatten().any(|&v| !(-EPS..=1.0 + EPS).contains(&v)) {
                return Err(render_error(kind, "SIP outside [0, 1]"));
            }
            if (0..k).any(|i| values[i][i] != 0.0) {
                return Err(render_error(kind, "SIP diagonal must be 0"));
            }
        }
        RenderKind::RankHeatmap => {
            if values.iter().flatten().any(|&v| !(-EPS..=1.0 + EPS).contains(&v)) {
                return Err(render_error(kind, "probability outside [0, 1]"));
            }
            if let Some(i) = values.iter().position(|r| (r.iter().sum::<f64>() - 1.0).abs() > EPS) {
                return Err(render_error(kind, format!("rank probabilities of row {i} do not sum to 1")));
            }
        }
        _ => return Err(render_error(kind, "not a matrix display")),
    }
    Ok(())
}

/// Renders a K x K matrix as a grid of glyphs.
///
/// SIP matrices are displayed with rows and columns sorted by decreasing
/// MSIP.
pub fn render_matrix(values: &[Vec<f64>], labels: &[String], spec: &RenderSpec) -> Result<String> {
    let kind = spec.kind;
    check_matrix(values, labels, kind)?;
    let k = values.len();
    let order: Vec<usize> = if kind == RenderKind::SipDisk {
        let msip = msip_from_sip(values);
        let mut o: Vec<usize> = (0..k).collect();
        o.sort_by(|&a, &b| msip[b].total_cmp(&msip[a]));
        o
    } else {
        (0..k).collect()
    };

    let size = spec.size_px as f64;
    let margin = 0.22 * size;
    let cell = (size - margin - 0.03 * size) / k as f64;
    let font = (cell * 0.3).clamp(8.0, 14.0);
    let map = spec.color_map();

    let mut s = header(spec.size_px, kind.name());
    let _ = writeln!(s, r#"<g class="labels" font-size="{font:.1}">"#);
    for (p, &i) in order.iter().enumerate() {
        let c = margin + (p as f64 + 0.5) * cell;
        let _ = writeln!(
            s,
            r#"<text class="label" x="{:.2}" y="{c:.2}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            margin - 4.0,
            escape(&labels[i])
        );
        let col_label = if kind == RenderKind::RankHeatmap { (p + 1).to_string() } else { labels[i].clone() };
        let _ = writeln!(
            s,
            r#"<text class="label" x="{c:.2}" y="{:.2}" text-anchor="start" transform="rotate(-60 {c:.2} {:.2})">{}</text>"#,
            margin - 4.0,
            margin - 4.0,
            escape(&col_label)
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g class="grid" stroke="#cccccc" fill="none">"##);
    for r in 0..k {
        for c in 0..k {
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}"/>"#,
                margin + c as f64 * cell,
                margin + r as f64 * cell
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="glyphs">"#);
    for (r, &i) in order.iter().enumerate() {
        for c in 0..k {
            // Rank columns are ranks, not methods, so they are never permuted.
            let j = if kind == RenderKind::RankHeatmap { c } else { order[c] };
            let v = values[i][j];
            let (x0, y0) = (margin + c as f64 * cell, margin + r as f64 * cell);
            let (cx, cy) = (x0 + 0.5 * cell, y0 + 0.5 * cell);
            let fill = color_for(map, v);
            let data = format!(r#"data-row="{i}" data-col="{j}" data-value="{v:.6}""#);
            match kind {
                RenderKind::CorrEllipse => {
                    let rx = 0.45 * cell;
                    let ry = (rx * (1.0 - v.abs()).max(0.0).sqrt()).max(0.01 * cell);
                    let angle = if v >= 0.0 { -45.0 } else { 45.0 };
                    let _ = writeln!(
                        s,
                        r#"<ellipse class="glyph" {data} cx="{cx:.2}" cy="{cy:.2}" rx="{rx:.2}" ry="{ry:.2}" transform="rotate({angle} {cx:.2} {cy:.2})" fill="{fill}" stroke="{fill}"/>"#
                    );
                }
                RenderKind::SipDisk => {
                    // Area proportional to the value.
                    let radius = 0.48 * cell * v.max(0.0).sqrt();
                    let _ = writeln!(
                        s,
                        r##"<circle class="glyph" {data} cx="{cx:.2}" cy="{cy:.2}" r="{radius:.2}" fill="{fill}" stroke="#888888" stroke-width="0.5"/>"##
                    );
                }
                RenderKind::RankHeatmap => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="glyph" {data} x="{x0:.2}" y="{y0:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}"/>"#
                    );
                }
                _ => unreachable!("checked above"),
            }
        }
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

/// Plot frame mapping data coordinates to pixels.
struct Frame {
    x0: f64,
    x1: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn new(size: f64, mut x0: f64, mut x1: f64) -> Self {
        if x1 <= x0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        let pad = 0.05 * (x1 - x0);
        Frame {
            x0: x0 - pad,
            x1: x1 + pad,
            left: 0.12 * size,
            right: 0.95 * size,
            top: 0.1 * size,
            bottom: 0.88 * size,
        }
    }

    fn x(&self, v: f64) -> f64 {
        self.left + (v - self.x0) / (self.x1 - self.x0) * (self.right - self.left)
    }

    fn y(&self, p: f64) -> f64 {
        self.bottom - p * (self.bottom - self.top)
    }

    fn axes(&self, s: &mut String, xlabel: &str) {
        let _ = writeln!(
            s,
            r#"<g class="axes" stroke="black" fill="none"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></g>"#,
            self.left,
            self.top,
            self.right - self.left,
            self.bottom - self.top
        );
        let _ = writeln!(s, r#"<g class="ticks" font-size="11">"#);
        for i in 0..=4 {
            let p = i as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end" dominant-baseline="middle">{p:.2}</text>"#,
                self.left - 4.0,
                self.y(p)
            );
            let v = self.x0 + p * (self.x1 - self.x0);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                self.x(v),
                self.bottom + 14.0,
                format_tick(v)
            );
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            0.5 * (self.left + self.right),
            self.bottom + 32.0,
            escape(xlabel)
        );
    }

    /// Polyline points for a right-continuous step function.
    fn steps(&self, xs: &[f64], ps: &[f64]) -> String {
        let mut pts = format!("{:.2},{:.2}", self.x(self.x0), self.y(0.0));
        let mut prev = 0.0;
        for (&x, &p) in xs.iter().zip(ps) {
            let _ = write!(pts, " {:.2},{:.2} {:.2},{:.2}", self.x(x), self.y(prev), self.x(x), self.y(p));
            prev = p;
        }
        let _ = write!(pts, " {:.2},{:.2}", self.x(self.x1), self.y(prev));
        pts
    }
}

fn format_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" { "0.000".into() } else { s }
}

fn check_finite(kind: RenderKind, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(render_error(kind, "no data"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(render_error(kind, "non-finite value"));
    }
    Ok(())
}

/// ECDF of |ei| - |ej| with its bootstrap band.
pub fn render_delta_ecdf(report: &DeltaEcdfReport, labels: (&str, &str), spec: &RenderSpec) -> Result<String> {
    let kind = RenderKind::DeltaEcdf;
    if spec.kind != kind {
        return Err(render_error(spec.kind, "expected a DELTA_ECDF spec"));
    }
    check_finite(kind, &report.deltas)?;
    check_finite(kind, &report.band_lo)?;
    check_finite(kind, &report.band_hi)?;
    let size = spec.size_px as f64;
    let (mut lo, mut hi) = (report.deltas[0], *report.deltas.last().expect("non-empty"));
    lo = lo.min(0.0);
    hi = hi.max(0.0);
    if let Some(u) = report.uncertainty_bar {
        lo = lo.min(-u);
        hi = hi.max(u);
    }
    let f = Frame::new(size, lo, hi);
    let title = format!("{} vs {}", labels.0, labels.1);
    let mut s = header(spec.size_px, &format!("{}: {title}", kind.name()));

    if let Some(u) = report.uncertainty_bar {
        let _ = writeln!(
            s,
            r##"<rect class="ubar" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#eeeeee"/>"##,
            f.x(-u),
            f.top,
            f.x(u) - f.x(-u),
            f.bottom - f.top
        );
    }
    let upper = f.steps(&report.deltas, &report.band_hi);
    let lower = f.steps(&report.deltas, &report.band_lo);
    let lower_rev: Vec<&str> = lower.split(' ').rev().collect();
    let _ = writeln!(
        s,
        r##"<polygon class="band" points="{upper} {}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##,
        lower_rev.join(" ")
    );
    let _ = writeln!(
        s,
        r##"<line class="zero" x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#555555" stroke-dasharray="4 3"/>"##,
        f.x(0.0),
        f.top,
        f.bottom
    );
    let _ = writeln!(
        s,
        r#"<polyline class="ecdf" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
        f.steps(&report.deltas, &report.ecdf),
        hex(BLUE)
    );
    f.axes(&mut s, "|e1| - |e2|");
    let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.3}"));
    let _ = writeln!(
        s,
        r#"<text class="title" x="{:.2}" y="{:.2}" font-size="13">{} | SIP = {} | MG = {} | ML = {}</text>"#,
        f.left,
        f.top - 10.0,
        escape(&title),
        fmt(report.sip.value),
        fmt(report.mg.value),
        fmt(report.ml.value)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// ECDFs of the absolute errors of every method.
pub fn render_abs_ecdf(columns: &[Vec<f64>], labels: &[String], spec: &RenderSpec) -> Result<String> {
    let kind = RenderKind::AbsEcdf;
    if spec.kind != kind {
        return Err(render_error(spec.kind, "expected an ABS_ECDF spec"));
    }
    if columns.is_empty() || labels.len() != columns.len() {
        return Err(render_error(kind, "one label per column required"));
    }
    for c in columns {
        check_finite(kind, c)?;
    }
    let sorted: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mut a: Vec<f64> = c.iter().map(|v| v.abs()).collect();
            a.sort_by(f64::total_cmp);
            a
        })
        .collect();
    let hi = sorted.iter().map(|c| *c.last().expect("non-empty")).fold(0.0, f64::max);
    let f = Frame::new(spec.size_px as f64, 0.0, hi);
    let mut s = header(spec.size_px, kind.name());
    for (m, a) in sorted.iter().enumerate() {
        let n = a.len() as f64;
        let ps: Vec<f64> = (1..=a.len()).map(|i| i as f64 / n).collect();
        let color = color_for(ColorMap::Categorical, m as f64);
        let _ = writeln!(
            s,
            r#"<polyline class="ecdf" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            f.steps(a, &ps)
        );
        let y = f.top + 14.0 + 16.0 * m as f64;
        let x = f.right - 0.25 * (f.right - f.left);
        let _ = writeln!(
            s,
            r#"<line class="legend" x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{y:.2}" font-size="11" dominant-baseline="middle">{}</text>"#,
            x + 18.0,
            x + 22.0,
            escape(&labels[m])
        );
    }
    f.axes(&mut s, "|e|");
    s.push_str("</svg>\n");
    Ok(s)
}
