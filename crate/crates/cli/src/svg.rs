//! Standalone SVG figures: poles as crosses, zeros of `Q` as small dots,
//! zeros of `V` as fat dots, trajectories as polylines and lattice
//! predictions as open circles, on equal-aspect axes.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;

/// One panel in world coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FigureModel {
    pub title: String,
    pub poles: Vec<C64>,
    pub q_zeros: Vec<C64>,
    pub v_zeros: Vec<C64>,
    pub polylines: Vec<Vec<C64>>,
    pub circles: Vec<C64>,
}

impl FigureModel {
    /// Bounding box of the marked points (trajectories may run far out and
    /// are clipped), padded by 15%.
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts: Vec<C64> = self.poles.iter().chain(&self.q_zeros).chain(&self.v_zeros).chain(&self.circles).copied().collect();
        let pts = if pts.is_empty() { self.polylines.iter().flatten().copied().collect() } else { pts };
        if pts.is_empty() {
            return (-1.0, 1.0, -1.0, 1.0);
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            x0 = x0.min(p.re);
            x1 = x1.max(p.re);
            y0 = y0.min(p.im);
            y1 = y1.max(p.im);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-9);
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let half = 0.5 * span * 1.3;
        (cx - half, cx + half, cy - half, cy + half)
    }
}

const PANEL: f64 = 400.0;

fn num(x: f64) -> String {
    format!("{x:.3}")
}

fn render_panel(out: &mut String, fig: &FigureModel, ox: f64, oy: f64, size: f64, id: usize) {
    let (x0, x1, y0, y1) = fig.bounds();
    let s = size / (x1 - x0);
    let map = |z: C64| (ox + (z.re - x0) * s, oy + (y1 - z.im) * s);
    let unit = size / PANEL;
    let _ = writeln!(out, r#"<g id="panel{id}">"#);
    let _ = writeln!(out, r#"<clipPath id="clip{id}"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath>"#, num(ox), num(oy), num(size), num(size));
    let _ = writeln!(out, r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#999" stroke-width="{}"/>"##, num(ox), num(oy), num(size), num(size), num(unit));
    if x0 < 0.0 && x1 > 0.0 {
        let (x, _) = map(C64::new(0.0, 0.0));
        let _ = writeln!(out, r##"<line class="axis" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#ccc" stroke-width="{}"/>"##, num(x), num(oy), num(x), num(oy + size), num(unit));
    }
    if y0 < 0.0 && y1 > 0.0 {
        let (_, y) = map(C64::new(0.0, 0.0));
        let _ = writeln!(out, r##"<line class="axis" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#ccc" stroke-width="{}"/>"##, num(ox), num(y), num(ox + size), num(y), num(unit));
    }
    if !fig.title.is_empty() {
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="{}" font-family="sans-serif">{}</text>"#, num(ox + 6.0 * unit), num(oy + 16.0 * unit), num(12.0 * unit), escape(&fig.title));
    }
    let _ = writeln!(out, r#"<g clip-path="url(#clip{id})">"#);
    for line in &fig.polylines {
        if line.len() < 2 {
            continue;
        }
        let pts: Vec<String> = line.iter().map(|&z| {
            let (x, y) = map(z);
            format!("{},{}", num(x), num(y))
        }).collect();
        let _ = writeln!(out, r##"<polyline class="trajectory" points="{}" fill="none" stroke="#3465a4" stroke-width="{}"/>"##, pts.join(" "), num(unit));
    }
    for &z in &fig.circles {
        let (x, y) = map(z);
        let _ = writeln!(out, r##"<circle class="lattice" cx="{}" cy="{}" r="{}" fill="none" stroke="#cc0000" stroke-width="{}"/>"##, num(x), num(y), num(6.0 * unit), num(unit));
    }
    for &z in &fig.q_zeros {
        let (x, y) = map(z);
        let _ = writeln!(out, r#"<circle class="q-zero" cx="{}" cy="{}" r="{}" fill="black"/>"#, num(x), num(y), num(1.8 * unit));
    }
    for &z in &fig.v_zeros {
        let (x, y) = map(z);
        let _ = writeln!(out, r#"<circle class="v-zero" cx="{}" cy="{}" r="{}" fill="black"/>"#, num(x), num(y), num(4.5 * unit));
    }
    for &z in &fig.poles {
        let (x, y) = map(z);
        let d = 5.0 * unit;
        let _ = writeln!(
            out,
            r#"<path class="pole" d="M{} {}L{} {}M{} {}L{} {}" stroke="black" stroke-width="{}"/>"#,
            num(x - d), num(y - d), num(x + d), num(y + d), num(x - d), num(y + d), num(x + d), num(y - d), num(1.5 * unit)
        );
    }
    out.push_str("</g>\n</g>\n");
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the panels on a square grid.
pub fn render(panels: &[FigureModel]) -> String {
    let count = panels.len().max(1);
    let cols = (count as f64).sqrt().ceil() as usize;
    let rows = count.div_ceil(cols);
    let size = if count == 1 { PANEL } else { (PANEL * 2.0 / cols as f64).max(160.0) };
    let gap = if count == 1 { 0.0 } else { 8.0 };
    let (w, h) = (cols as f64 * (size + gap) + gap, rows as f64 * (size + gap) + gap);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#, num(w), num(h), num(w), num(h));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if panels.is_empty() {
        render_panel(&mut out, &FigureModel::default(), gap, gap, size, 0);
    }
    for (i, p) in panels.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        render_panel(&mut out, p, gap + c as f64 * (size + gap), gap + r as f64 * (size + gap), size, i);
    }
    out.push_str("</svg>\n");
    out
}
