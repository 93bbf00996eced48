//! Static SVG figures: polylines, markers and heat maps over linear axes.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 560.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 60.0); // left, right, top, bottom

#[derive(Debug, Clone)]
pub struct Line {
    pub points: Vec<[f64; 2]>,
    pub color: &'static str,
    pub width: f64,
}

#[derive(Debug, Clone)]
pub struct Heat {
    /// Cell centres and values; `None` cells are left blank.
    pub cells: Vec<([f64; 2], Option<f64>)>,
    pub cell_size: [f64; 2],
    pub vmax: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Figure {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub lines: Vec<Line>,
    pub markers: Vec<[f64; 2]>,
    pub heat: Option<Heat>,
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about five ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap()
}

/// Blue to red through green and yellow for `v ∈ [0, 1]`.
fn palette(v: f64) -> String {
    let stops = [(0.0, [49, 54, 149]), (0.35, [69, 174, 99]), (0.7, [254, 224, 80]), (1.0, [215, 48, 39])];
    let v = v.clamp(0.0, 1.0);
    let k = stops.windows(2).position(|w| v <= w[1].0).unwrap_or(stops.len() - 2);
    let ((a, ca), (b, cb)) = (stops[k], stops[k + 1]);
    let t = (v - a) / (b - a);
    let c: Vec<u8> = (0..3).map(|i| (ca[i] as f64 + t * (cb[i] as f64 - ca[i] as f64)).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut xs = [f64::INFINITY, f64::NEG_INFINITY];
        let mut ys = xs;
        let mut take = |p: [f64; 2]| {
            if p[0].is_finite() && p[1].is_finite() {
                xs = [xs[0].min(p[0]), xs[1].max(p[0])];
                ys = [ys[0].min(p[1]), ys[1].max(p[1])];
            }
        };
        self.lines.iter().flat_map(|l| &l.points).for_each(|p| take(*p));
        self.markers.iter().for_each(|p| take(*p));
        if let Some(h) = &self.heat {
            for (c, _) in &h.cells {
                take([c[0] - 0.5 * h.cell_size[0], c[1] - 0.5 * h.cell_size[1]]);
                take([c[0] + 0.5 * h.cell_size[0], c[1] + 0.5 * h.cell_size[1]]);
            }
        }
        let pad = |r: [f64; 2]| {
            if !r[0].is_finite() {
                [0.0, 1.0]
            } else if r[1] - r[0] <= f64::EPSILON * r[0].abs().max(1.0) {
                [r[0] - 0.5, r[1] + 0.5]
            } else {
                let d = 0.04 * (r[1] - r[0]);
                [r[0] - d, r[1] + d]
            }
        };
        (pad(xs), pad(ys))
    }

    pub fn to_svg(&self) -> String {
        let (xr, yr) = self.bounds();
        let (l, r, t, b) = MARGIN;
        let (pw, ph) = (WIDTH - l - r, HEIGHT - t - b);
        let sx = |x: f64| l + (x - xr[0]) / (xr[1] - xr[0]) * pw;
        let sy = |y: f64| t + ph - (y - yr[0]) / (yr[1] - yr[0]) * ph;
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(s, r#"<clipPath id="plot"><rect x="{l}" y="{t}" width="{pw}" height="{ph}"/></clipPath>"#).unwrap();
        if let Some(h) = &self.heat {
            s.push_str(r#"<g clip-path="url(#plot)" shape-rendering="crispEdges">"#);
            s.push('\n');
            let w = h.cell_size[0] / (xr[1] - xr[0]) * pw;
            let hh = h.cell_size[1] / (yr[1] - yr[0]) * ph;
            for (c, v) in &h.cells {
                if let Some(v) = v {
                    let x = sx(c[0] - 0.5 * h.cell_size[0]);
                    let y = sy(c[1] + 0.5 * h.cell_size[1]);
                    writeln!(
                        s,
                        r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                        w + 0.01,
                        hh + 0.01,
                        palette(v / h.vmax)
                    )
                    .unwrap();
                }
            }
            s.push_str("</g>\n");
        }
        s.push_str(r#"<g clip-path="url(#plot)" fill="none">"#);
        s.push('\n');
        for line in self.lines.iter().filter(|l| l.points.len() > 1) {
            let pts: Vec<String> = line
                .points
                .iter()
                .filter(|p| p[0].is_finite() && p[1].is_finite())
                .map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1])))
                .collect();
            writeln!(s, r#"<polyline points="{}" stroke="{}" stroke-width="{}"/>"#, pts.join(" "), line.color, line.width).unwrap();
        }
        for m in &self.markers {
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#, sx(m[0]), sy(m[1])).unwrap();
        }
        s.push_str("</g>\n");
        writeln!(s, r#"<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
        for (range, horizontal) in [(xr, true), (yr, false)] {
            let step = tick_step(range[1] - range[0]);
            let mut v = (range[0] / step).ceil() * step;
            while v <= range[1] {
                let decimals = (-step.log10().floor()).max(0.0) as usize;
                let label = format!("{:.*}", decimals, (v / step).round() * step);
                if horizontal {
                    let x = sx(v);
                    writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, t + ph, t + ph + 5.0).unwrap();
                    writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#, t + ph + 18.0).unwrap();
                } else {
                    let y = sy(v);
                    writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/>"#, l - 5.0).unwrap();
                    writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, l - 8.0, y + 4.0).unwrap();
                }
                v += step;
            }
        }
        writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, l + pw / 2.0, HEIGHT - 15.0, escape(&self.xlabel)).unwrap();
        writeln!(
            s,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            t + ph / 2.0,
            t + ph / 2.0,
            escape(&self.ylabel)
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#, l + pw / 2.0, escape(&self.title)).unwrap();
        s.push_str("</svg>\n");
        s
    }
}
