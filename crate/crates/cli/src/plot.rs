//! Minimal self-contained SVG rendering: cell heatmaps and polyline overlays.

use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Heatmap,
    Curves,
    Overlay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    /// Blue at 0, white at ±π/2, red at ±π.
    DivergingBlueRed,
}

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub width: u32,
    pub height: u32,
    pub colormap: Colormap,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl PlotSpec {
    pub fn new(kind: PlotKind, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self {
            kind,
            width: 640,
            height: 560,
            colormap: Colormap::DivergingBlueRed,
            title: String::new(),
            x_label: "rho".into(),
            y_label: "tau".into(),
            x_range,
            y_range,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width < 2 * MARGIN || self.height < 2 * MARGIN {
            return Err(format!("plot too small: {}x{}", self.width, self.height));
        }
        for (lo, hi) in [self.x_range, self.y_range] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(format!("bad axis range [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

/// Samples on a tensor grid: `values[iy * xs.len() + ix]`.
pub struct Heatmap<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub values: &'a [f64],
}

pub struct Curve<'a> {
    pub points: &'a [(f64, f64)],
    pub color: &'a str,
}

const MARGIN: u32 = 60;

pub fn color(cmap: Colormap, psi: f64) -> (u8, u8, u8) {
    match cmap {
        Colormap::DivergingBlueRed => {
            if !psi.is_finite() {
                return (128, 128, 128);
            }
            let t = (dpl_core::wrap_pi(psi).abs() / PI).clamp(0.0, 1.0);
            let blue = (59.0, 76.0, 192.0);
            let white = (247.0, 247.0, 247.0);
            let red = (180.0, 4.0, 38.0);
            let (from, to, s) = if t < 0.5 { (blue, white, 2.0 * t) } else { (white, red, 2.0 * t - 1.0) };
            let mix = |a: f64, b: f64| (a + (b - a) * s).round() as u8;
            (mix(from.0, to.0), mix(from.1, to.1), mix(from.2, to.2))
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }
    // y grows upward in data space
    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }
}

fn cell_edges(c: &[f64], i: usize) -> (f64, f64) {
    let lo = if i == 0 { c[0] - 0.5 * (c[1] - c[0]) } else { 0.5 * (c[i - 1] + c[i]) };
    let n = c.len();
    let hi = if i + 1 == n { c[n - 1] + 0.5 * (c[n - 1] - c[n - 2]) } else { 0.5 * (c[i] + c[i + 1]) };
    (lo, hi)
}

/// Renders the plot. Heatmap data is required for `Heatmap` and `Overlay`,
/// curves for `Curves` and `Overlay`.
pub fn render(spec: &PlotSpec, heatmap: Option<&Heatmap>, curves: &[Curve]) -> Result<String, String> {
    spec.validate()?;
    let needs_map = matches!(spec.kind, PlotKind::Heatmap | PlotKind::Overlay);
    if needs_map && heatmap.is_none() {
        return Err("heatmap data missing".into());
    }
    let f = Frame {
        x0: MARGIN as f64,
        y0: 30.0,
        w: (spec.width - MARGIN - 20) as f64,
        h: (spec.height - MARGIN - 30) as f64,
        xr: spec.x_range,
        yr: spec.y_range,
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>
<defs><clipPath id="frame"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath></defs>"#,
        f.x0,
        f.y0,
        f.w,
        f.h,
        w = spec.width,
        h = spec.height,
    );
    if !spec.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="20" text-anchor="middle">{}</text>"#,
            f.x0 + f.w / 2.0,
            escape(&spec.title)
        );
    }

    if let (true, Some(hm)) = (needs_map, heatmap) {
        if hm.xs.len() < 2 || hm.ys.len() < 2 || hm.values.len() != hm.xs.len() * hm.ys.len() {
            return Err("heatmap grid is inconsistent".into());
        }
        s.push_str("<g clip-path=\"url(#frame)\" shape-rendering=\"crispEdges\">\n");
        for (iy, _) in hm.ys.iter().enumerate() {
            let (ylo, yhi) = cell_edges(hm.ys, iy);
            for (ix, _) in hm.xs.iter().enumerate() {
                let (xlo, xhi) = cell_edges(hm.xs, ix);
                let (r, g, b) = color(spec.colormap, hm.values[iy * hm.xs.len() + ix]);
                let (px0, px1) = (f.px(xlo), f.px(xhi));
                let (py0, py1) = (f.py(yhi), f.py(ylo));
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
                    px0,
                    py0,
                    px1 - px0,
                    py1 - py0
                );
            }
        }
        s.push_str("</g>\n");
    }

    if matches!(spec.kind, PlotKind::Curves | PlotKind::Overlay) {
        s.push_str("<g clip-path=\"url(#frame)\" fill=\"none\" stroke-width=\"2\">\n");
        for c in curves {
            if c.points.len() < 2 {
                continue;
            }
            let mut d = String::new();
            for (k, &(x, y)) in c.points.iter().enumerate() {
                let _ = write!(d, "{}{:.2} {:.2}", if k == 0 { "M" } else { " L" }, f.px(x), f.py(y));
            }
            let _ = writeln!(s, r#"<path d="{d}" stroke="{}"/>"#, escape(c.color));
        }
        s.push_str("</g>\n");
    }

    // frame, ticks, labels
    let _ = writeln!(
        s,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        f.x0, f.y0, f.w, f.h
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = spec.x_range.0 + t * (spec.x_range.1 - spec.x_range.0);
        let yv = spec.y_range.0 + t * (spec.y_range.1 - spec.y_range.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#,
            f.y0 + f.h,
            f.y0 + f.h + 5.0,
            f.y0 + f.h + 18.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#,
            f.x0 - 5.0,
            f.x0,
            f.x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        f.x0 + f.w / 2.0,
        f.y0 + f.h + 40.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        f.y0 + f.h / 2.0,
        f.y0 + f.h / 2.0,
        escape(&spec.y_label)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_endpoints() {
        let c = Colormap::DivergingBlueRed;
        assert_eq!(color(c, 0.0), (59, 76, 192));
        assert_eq!(color(c, PI), (180, 4, 38));
        assert_eq!(color(c, -PI), (180, 4, 38));
        assert_eq!(color(c, PI / 2.0), (247, 247, 247));
        assert_eq!(color(c, f64::NAN), (128, 128, 128));
    }

    #[test]
    fn render_overlay() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 1.0];
        let v = [0.0, 1.0, 3.0, -1.0, f64::NAN, 2.0];
        let pts = [(0.0, 0.0), (2.0, 1.0)];
        let mut spec = PlotSpec::new(PlotKind::Overlay, (0.0, 2.0), (0.0, 1.0));
        spec.title = "a < b & c".into();
        let svg = render(
            &spec,
            Some(&Heatmap { xs: &xs, ys: &ys, values: &v }),
            &[Curve { points: &pts, color: "black" }],
        )
        .unwrap();
        assert_eq!(svg.matches("<rect").count(), 6 + 3);
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn rejects_bad_spec() {
        let spec = PlotSpec::new(PlotKind::Heatmap, (1.0, 1.0), (0.0, 1.0));
        assert!(render(&spec, None, &[]).is_err());
        let spec = PlotSpec::new(PlotKind::Heatmap, (0.0, 1.0), (0.0, 1.0));
        assert!(render(&spec, None, &[]).is_err());
    }
}
