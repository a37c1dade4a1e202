//! Minimal SVG writers: line plots with optional log axes and filled
//! triangle maps.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        }
        if hi - lo < 1e-300 {
            lo -= 0.5;
            hi += 0.5;
        }
        if !log {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0) as i32;
            (self.lo as i32..=self.hi as i32)
                .step_by(step as usize)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            let raw = (self.hi - self.lo) / 6.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last)
                .map(|k| {
                    let v = k as f64 * step;
                    (v, format_tick(v, step))
                })
                .collect()
        }
    }
}

fn format_tick(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.digits$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LinePlot {
    pub fn render(&self) -> String {
        let usable = |(x, y): &(f64, f64)| {
            x.is_finite() && y.is_finite() && (!self.log_x || *x > 0.0) && (!self.log_y || *y > 0.0)
        };
        let pts = || self.series.iter().flat_map(|s| s.points.iter().filter(|p| usable(p)));
        let xa = Axis::fit(pts().map(|p| p.0), self.log_x);
        let ya = Axis::fit(pts().map(|p| p.1), self.log_y);
        let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |x: f64| MARGIN_LEFT + xa.frac(x) * pw;
        let sy = |y: f64| MARGIN_TOP + (1.0 - ya.frac(y)) * ph;

        let mut s = header(WIDTH, HEIGHT);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for (v, label) in xa.ticks() {
            let x = sx(v);
            let y0 = MARGIN_TOP + ph;
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{MARGIN_TOP}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{label}</text>"##,
                y0 + 16.0
            );
        }
        for (v, label) in ya.ticks() {
            let y = sy(v);
            let x1 = MARGIN_LEFT + pw;
            let _ = writeln!(
                s,
                r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{label}</text>"##,
                MARGIN_LEFT - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            MARGIN_TOP + ph / 2.0,
            MARGIN_TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let path: Vec<String> = series
                .points
                .iter()
                .filter(|p| usable(p))
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let dash = if series.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
                path.join(" ")
            );
            let ly = MARGIN_TOP + 14.0 + 18.0 * k as f64;
            let lx = MARGIN_LEFT + pw + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Piecewise-linear blue-white-red map on `[lo, hi]`, white at zero when the
/// range straddles it.
pub fn color(v: f64, lo: f64, hi: f64) -> String {
    let blue = [33.0, 102.0, 172.0];
    let white = [247.0, 247.0, 247.0];
    let red = [178.0, 24.0, 43.0];
    let mix = |a: [f64; 3], b: [f64; 3], t: f64| -> [f64; 3] {
        let t = t.clamp(0.0, 1.0);
        [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * t)
    };
    let rgb = if v >= 0.0 {
        mix(white, red, if hi > 0.0 { v / hi } else { 0.0 })
    } else {
        mix(white, blue, if lo < 0.0 { v / lo } else { 0.0 })
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        rgb[0].round() as u8,
        rgb[1].round() as u8,
        rgb[2].round() as u8
    )
}

/// Triangles of the unit disk filled by value, with a colour bar.
pub fn triangle_map(
    title: &str,
    vertices: &[[f64; 2]],
    triangles: &[[usize; 3]],
    values: &[Option<f64>],
    range: (f64, f64),
) -> String {
    let size = 420.0;
    let (w, h) = (size + 120.0, size + 50.0);
    let scale = size / 2.1;
    let (cx, cy) = (size / 2.0 + 10.0, size / 2.0 + 40.0);
    let map = |p: [f64; 2]| (cx + scale * p[0], cy - scale * p[1]);
    let mut s = header(w, h);
    let _ = writeln!(
        s,
        r#"<text x="{cx}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        escape(title)
    );
    for (tri, value) in triangles.iter().zip(values) {
        let fill = value.map_or_else(|| "#e0e0e0".to_string(), |v| color(v, range.0, range.1));
        let pts: Vec<String> = tri
            .iter()
            .map(|&v| {
                let (x, y) = map(vertices[v]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{fill}" stroke="{fill}" stroke-width="0.3"/>"#,
            pts.join(" ")
        );
    }
    let _ = writeln!(
        s,
        r#"<circle cx="{cx}" cy="{cy}" r="{scale}" fill="none" stroke="black"/>"#
    );
    let (bx, by, bh) = (size + 40.0, 60.0, size - 60.0);
    let steps = 50;
    for k in 0..steps {
        let t = k as f64 / steps as f64;
        let v = range.1 - t * (range.1 - range.0);
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{:.2}" width="20" height="{:.2}" fill="{}"/>"#,
            by + t * bh,
            bh / steps as f64 + 0.5,
            color(v, range.0, range.1)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11">{:.3}</text><text x="{:.2}" y="{:.2}" font-size="11">{:.3}</text>"#,
        bx + 24.0,
        by + 8.0,
        range.1,
        bx + 24.0,
        by + bh,
        range.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_plot_is_well_formed() {
        let plot = LinePlot {
            title: "err".into(),
            log_x: true,
            log_y: true,
            series: vec![Series::new("K = 1", vec![(1e-3, 1e-6), (1e-1, 1e-2), (0.5, 0.0)])],
            ..LinePlot::default()
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(r#"width="640""#));
        assert!(svg.contains("1e-3") && svg.contains("1e-1"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn colour_map_end_points() {
        assert_eq!(color(0.0, -1.0, 1.0), "#f7f7f7");
        assert_eq!(color(1.0, -1.0, 1.0), "#b2182b");
        assert_eq!(color(-2.0, -1.0, 1.0), "#2166ac");
    }
}
