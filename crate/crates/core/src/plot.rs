//! Static SVG figures: potential trace at one abscissa, potential over the
//! space–time grid as a heatmap, and gating traces.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::coupled::{SimulationResult, TargetTrajectory};
use crate::error::{Error, Result};
use crate::report::write_text;

pub const TRACE_FILE: &str = "v_trace.svg";
pub const SURFACE_FILE: &str = "v_surface.svg";
pub const GATING_FILE: &str = "gating.svg";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    color: &'static str,
    dashed: bool,
}

#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi - lo < 1e-12 * lo.abs().max(1.0) {
            let pad = 0.5 * lo.abs().max(1.0);
            Range { lo: lo - pad, hi: hi + pad }
        } else {
            Range { lo, hi }
        }
    }

    fn padded(self) -> Self {
        let pad = 0.05 * (self.hi - self.lo);
        Range {
            lo: self.lo - pad,
            hi: self.hi + pad,
        }
    }

    fn scale(&self, v: f64, a: f64, b: f64) -> f64 {
        a + (v - self.lo) / (self.hi - self.lo) * (b - a)
    }

    /// Round tick positions (1, 2 or 5 times a power of ten).
    fn ticks(&self, target: usize) -> Vec<f64> {
        let raw = (self.hi - self.lo) / target as f64;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open_svg(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, plot_right: f64, xr: Range, yr: Range, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (LEFT, plot_right, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in xr.ticks(6) {
        let px = xr.scale(t, x0, x1);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            label(t)
        );
    }
    for t in yr.ticks(5) {
        let py = yr.scale(t, y0, y1);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let xr = Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))).padded();
    let right = WIDTH - RIGHT;
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, right, xr, yr, xlabel, ylabel);
    for s in series {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", xr.scale(x, LEFT, right), yr.scale(y, HEIGHT - BOTTOM, TOP)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
    }
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="100" height="{}" fill="white" fill-opacity="0.85" stroke="#999"/>"##,
        right - 118.0,
        TOP + 6.0,
        16.0 * series.len() as f64 + 6.0
    );
    for (k, s) in series.iter().enumerate() {
        let y = TOP + 16.0 + 16.0 * k as f64;
        let x = right - 110.0;
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            x + 24.0,
            s.color,
            x + 30.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn viridis(u: f64) -> String {
    let u = if u.is_finite() { u.clamp(0.0, 1.0) } else { 0.0 };
    let pos = u * (VIRIDIS.len() - 1) as f64;
    let k = (pos.floor() as usize).min(VIRIDIS.len() - 2);
    let w = pos - k as f64;
    let (a, b) = (VIRIDIS[k], VIRIDIS[k + 1]);
    let c = |p: f64, q: f64| (p + w * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

fn heatmap(result: &SimulationResult) -> String {
    let tm = result.mesh.tmesh();
    let xm = result.mesh.xmesh();
    let vr = Range::of(result.v.values().iter().copied());
    let tr = Range::of(tm.iter().copied());
    let xr = Range::of(xm.iter().copied());
    let right = WIDTH - RIGHT - 70.0;
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let mut out = String::new();
    open_svg(&mut out, "v(t, x)");
    out.push_str("<g shape-rendering=\"crispEdges\">\n");

    // Cells are centred on the nodes and clipped to the plot area.
    let edges = |m: &[f64], k: usize| {
        let lo = if k == 0 { m[0] } else { 0.5 * (m[k - 1] + m[k]) };
        let hi = if k + 1 == m.len() { m[k] } else { 0.5 * (m[k] + m[k + 1]) };
        (lo, hi)
    };
    for i in 0..tm.len() {
        let (ta, tb) = edges(tm, i);
        let px0 = tr.scale(ta, LEFT, right);
        let px1 = tr.scale(tb, LEFT, right);
        for j in 0..xm.len() {
            let (xa, xb) = edges(xm, j);
            let py0 = xr.scale(xb, y0, y1);
            let py1 = xr.scale(xa, y0, y1);
            let u = (result.v.get(i, j) - vr.lo) / (vr.hi - vr.lo);
            let _ = writeln!(
                out,
                r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                (px1 - px0).max(0.0) + 0.3,
                (py1 - py0).max(0.0) + 0.3,
                viridis(u)
            );
        }
    }
    out.push_str("</g>\n");
    axes(&mut out, right, tr, xr, "t [ms]", "x");

    let (bx, bw) = (right + 20.0, 16.0);
    let steps = 64;
    for s in 0..steps {
        let u0 = s as f64 / steps as f64;
        let h = (y0 - y1) / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{bx}" y="{:.2}" width="{bw}" height="{:.2}" fill="{}"/>"#,
            y0 - (s + 1) as f64 * h,
            h + 0.3,
            viridis(u0 + 0.5 / steps as f64)
        );
    }
    for t in vr.ticks(5) {
        let py = vr.scale(t, y0, y1);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}">{}</text>"#,
            bx + bw,
            bx + bw + 4.0,
            bx + bw + 6.0,
            py + 4.0,
            label(t)
        );
    }
    let _ = writeln!(out, r#"<text x="{bx}" y="{}">v [mV]</text>"#, TOP - 6.0);
    out.push_str("</svg>\n");
    out
}

/// Renders the three figures. `x_index` selects the mesh column of the
/// trace plots.
pub fn render_plots(
    result: &SimulationResult,
    target: &TargetTrajectory,
    x_index: usize,
) -> Result<[(&'static str, String); 3]> {
    if result.is_empty() || result.mesh.max_t() < 2 {
        return Err(Error::domain("cannot plot an empty result"));
    }
    if x_index >= result.mesh.max_x() {
        return Err(Error::domain(format!("plot column {x_index} out of range")));
    }
    let tm = result.mesh.tmesh();
    let x = result.mesh.xmesh()[x_index];
    let trace = |field: &crate::numerics::StateField| -> Vec<(f64, f64)> {
        tm.iter().copied().zip(field.column(x_index)).collect()
    };

    let v_series = vec![
        Series {
            label: "v".into(),
            points: trace(&result.v),
            color: PALETTE[0],
            dashed: false,
        },
        Series {
            label: "v*".into(),
            points: tm.iter().map(|&t| (t, target.eval(t, x_index))).collect(),
            color: PALETTE[1],
            dashed: true,
        },
    ];
    let gating_series: Vec<Series> = result
        .gating_names
        .iter()
        .zip(&result.gating)
        .enumerate()
        .map(|(k, (name, field))| Series {
            label: name.clone(),
            points: trace(field),
            color: PALETTE[k % PALETTE.len()],
            dashed: false,
        })
        .collect();

    let xs = label(x);
    Ok([
        (
            TRACE_FILE,
            line_chart(&format!("v(t, {xs})"), "t [ms]", "v [mV]", &v_series),
        ),
        (SURFACE_FILE, heatmap(result)),
        (
            GATING_FILE,
            line_chart(&format!("gating variables at x = {xs}"), "t [ms]", "", &gating_series),
        ),
    ])
}

/// Writes the three figures into `dir`. Nothing is written if rendering
/// fails.
pub fn emit_plots(
    result: &SimulationResult,
    target: &TargetTrajectory,
    x_index: usize,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let rendered = render_plots(result, target, x_index)?;
    let mut paths = Vec::new();
    for (name, svg) in rendered {
        let path = dir.join(name);
        write_text(&path, &svg)?;
        paths.push(path);
    }
    Ok(paths)
}
