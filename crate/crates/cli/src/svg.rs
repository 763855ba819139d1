//! Minimal SVG writer: panels with scatter points, polylines and bars.

use std::fmt::Write as _;

pub const PALETTE: [&str; 8] = [
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

/// A rectangular plotting area mapping data coordinates to pixels.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Panel {
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
        (
            self.x + (x - x0) / span(x0, x1) * self.w,
            self.y + self.h - (y - y0) / span(y0, y1) * self.h,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_range.0 && x <= self.x_range.1 && y >= self.y_range.0 && y <= self.y_range.1
    }
}

/// Smallest range holding all values, padded by 5% on each side.
pub fn padded_range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.into_iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi <= lo {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        let mut svg = Svg {
            width,
            height,
            body: String::new(),
        };
        let _ = writeln!(svg.body, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
        svg
    }

    pub fn frame(&mut self, panel: &Panel, title: &str) {
        let _ = writeln!(
            self.body,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444" stroke-width="0.8"/>"##,
            panel.x, panel.y, panel.w, panel.h
        );
        self.text(panel.x + panel.w / 2.0, panel.y - 6.0, title, 12.0, "middle");
    }

    pub fn text(&mut self, x: f64, y: f64, text: &str, size: f64, anchor: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}">{}</text>"#,
            escape(text)
        );
    }

    pub fn scatter(&mut self, panel: &Panel, points: &[(f64, f64)], color: &str, radius: f64) {
        for &(x, y) in points {
            if !panel.contains(x, y) {
                continue;
            }
            let (px, py) = panel.map(x, y);
            let _ = writeln!(
                self.body,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="{radius}" fill="{color}" fill-opacity="0.6"/>"#
            );
        }
    }

    pub fn polyline(&mut self, panel: &Panel, points: &[(f64, f64)], color: &str, width: f64) {
        let coords: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| {
                let (px, py) = panel.map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="0.8"/>"#,
            coords.join(" ")
        );
    }

    /// Vertical bars from the bottom of the panel; `bars` holds
    /// `(left, right, height)` in data coordinates.
    pub fn bars(&mut self, panel: &Panel, bars: &[(f64, f64, f64)], color: &str) {
        for &(l, r, h) in bars {
            if h <= 0.0 {
                continue;
            }
            let (x0, y0) = panel.map(l, h.min(panel.y_range.1));
            let (x1, _) = panel.map(r, 0.0);
            let bottom = panel.y + panel.h;
            let _ = writeln!(
                self.body,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                (x1 - x0).max(0.0),
                (bottom - y0).max(0.0)
            );
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}
