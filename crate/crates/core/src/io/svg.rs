//! Minimal SVG charts: histograms with curve overlays, line plots and
//! scatter plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone)]
enum Element {
    Bars { edges: Vec<f64>, heights: Vec<f64>, color: String, label: String },
    Line { xs: Vec<f64>, ys: Vec<f64>, color: String, label: String },
    Points { xs: Vec<f64>, ys: Vec<f64>, color: String, label: String },
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    elements: Vec<Element>,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            elements: Vec::new(),
        }
    }

    pub fn bars(mut self, edges: &[f64], heights: &[f64], color: &str, label: &str) -> Self {
        self.elements.push(Element::Bars {
            edges: edges.to_vec(),
            heights: heights.to_vec(),
            color: color.into(),
            label: label.into(),
        });
        self
    }

    pub fn line(mut self, xs: &[f64], ys: &[f64], color: &str, label: &str) -> Self {
        self.elements.push(Element::Line {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            color: color.into(),
            label: label.into(),
        });
        self
    }

    pub fn points(mut self, xs: &[f64], ys: &[f64], color: &str, label: &str) -> Self {
        self.elements.push(Element::Points {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            color: color.into(),
            label: label.into(),
        });
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut see = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        };
        for e in &self.elements {
            match e {
                Element::Bars { edges, heights, .. } => {
                    for (i, h) in heights.iter().enumerate() {
                        see(edges[i], 0.0);
                        see(edges[i + 1], *h);
                    }
                }
                Element::Line { xs, ys, .. } | Element::Points { xs, ys, .. } => {
                    xs.iter().zip(ys).for_each(|(x, y)| see(*x, *y));
                }
            }
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| if hi > lo { (hi - lo) * 0.03 } else { 0.5 };
        let (px, py) = (pad(x0, x1), pad(y0, y1));
        (x0 - px, x1 + px, y0 - py, y1 + py)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, sx(fx), HEIGHT - MARGIN + 15.0, tick(fx));
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 4.0, sy(fy) + 4.0, tick(fy));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 10.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        let mut legend = Vec::new();
        for e in &self.elements {
            match e {
                Element::Bars { edges, heights, color, label } => {
                    for (i, h) in heights.iter().enumerate() {
                        let (l, r) = (sx(edges[i]), sx(edges[i + 1]));
                        let (top, base) = (sy(h.max(0.0)), sy(0.0));
                        let _ = writeln!(
                            s,
                            r#"<rect x="{l:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.4" stroke="{color}" stroke-width="0.5"/>"#,
                            (r - l).max(0.0),
                            (base - top).max(0.0)
                        );
                    }
                    legend.push((color.clone(), label.clone()));
                }
                Element::Line { xs, ys, color, label } => {
                    let pts: Vec<String> = xs
                        .iter()
                        .zip(ys)
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                        .collect();
                    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
                    legend.push((color.clone(), label.clone()));
                }
                Element::Points { xs, ys, color, label } => {
                    for (x, y) in xs.iter().zip(ys).filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"#, sx(*x), sy(*y));
                    }
                    legend.push((color.clone(), label.clone()));
                }
            }
        }
        for (i, (color, label)) in legend.iter().enumerate().filter(|(_, (_, l))| !l.is_empty()) {
            let y = MARGIN + 14.0 + 14.0 * i as f64;
            let x = WIDTH - MARGIN - 150.0;
            let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
            let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::from(e).context(path.display().to_string()))
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
