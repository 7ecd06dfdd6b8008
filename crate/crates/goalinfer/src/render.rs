//! Dependency-free SVG rendering of maps, observations, paths, posterior
//! samples, and the KL convergence chart. World coordinates live in the unit
//! square with y up; the renderer flips y for screen space.

use std::fmt::Write;

use crate::eval::ConvergencePoint;
use crate::geom::{Point, WorldMap};

const SCENE_SIZE: f64 = 600.0;

/// Scene renderer over the unit square.
pub struct SceneSvg {
    body: String,
}

fn px(p: Point) -> (f64, f64) {
    (p.x * SCENE_SIZE, (1.0 - p.y) * SCENE_SIZE)
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

impl Default for SceneSvg {
    fn default() -> Self {
        Self::new()
    }
}

impl SceneSvg {
    pub fn new() -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            r##"<rect x="0" y="0" width="{0}" height="{0}" fill="#f4f2ec" stroke="#444" stroke-width="1"/>"##,
            SCENE_SIZE
        );
        SceneSvg { body }
    }

    pub fn map(&mut self, map: &WorldMap) -> &mut Self {
        for obstacle in map.obstacles() {
            let coords: Vec<String> = obstacle
                .vertices()
                .iter()
                .map(|&v| {
                    let (x, y) = px(v);
                    format!("{},{}", fmt2(x), fmt2(y))
                })
                .collect();
            let _ = write!(
                self.body,
                r##"<polygon points="{}" fill="#8a8a8a" stroke="#555" stroke-width="1"/>"##,
                coords.join(" ")
            );
        }
        self
    }

    pub fn polyline(&mut self, points: &[Point], color: &str, width: f64, opacity: f64) -> &mut Self {
        if points.len() < 2 {
            return self;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&v| {
                let (x, y) = px(v);
                format!("{},{}", fmt2(x), fmt2(y))
            })
            .collect();
        let _ = write!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{}" stroke-opacity="{}"/>"#,
            coords.join(" "),
            color,
            width,
            opacity
        );
        self
    }

    /// One marker circle per point; `class` tags the marker kind so tests
    /// can count rendered samples.
    pub fn markers(&mut self, points: &[Point], color: &str, radius: f64, class: &str) -> &mut Self {
        for &p in points {
            let (x, y) = px(p);
            let _ = write!(
                self.body,
                r##"<circle class="{}" cx="{}" cy="{}" r="{}" fill="{}" fill-opacity="0.75" stroke="#222" stroke-width="0.5"/>"##,
                class,
                fmt2(x),
                fmt2(y),
                radius,
                color
            );
        }
        self
    }

    pub fn observations(&mut self, points: &[Point]) -> &mut Self {
        self.markers(points, "#ffffff", 4.0, "observation")
    }

    pub fn finish(&self, title: &str) -> String {
        format!(
            concat!(
                r#"<?xml version="1.0" encoding="UTF-8"?>"#,
                "\n",
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
                "<title>{1}</title>{2}</svg>\n"
            ),
            SCENE_SIZE,
            xml_escape(title),
            self.body
        )
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const STRATEGY_COLORS: &[(&str, &str)] = &[
    ("cr", "#1f77b4"),
    ("nni-k1", "#d62728"),
    ("rni-k2", "#2ca02c"),
    ("rni-k10", "#9467bd"),
];

fn strategy_color(name: &str, fallback_index: usize) -> &'static str {
    STRATEGY_COLORS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| *c)
        .unwrap_or(match fallback_index % 4 {
            0 => "#ff7f0e",
            1 => "#8c564b",
            2 => "#e377c2",
            _ => "#7f7f7f",
        })
}

/// Line chart of binned KL against transition count (log x), one polyline
/// per strategy, with optional circle markers at highlighted counts.
pub fn kl_curve_svg(
    curve: &[ConvergencePoint],
    markers: &std::collections::BTreeMap<String, usize>,
    title: &str,
) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;

    let mut strategies: Vec<String> = Vec::new();
    for p in curve {
        if !strategies.contains(&p.strategy) {
            strategies.push(p.strategy.clone());
        }
    }
    let xs: Vec<f64> = curve.iter().map(|p| (p.transitions.max(1)) as f64).collect();
    let ys: Vec<f64> = curve.iter().map(|p| p.kl).collect();
    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min).max(1.0);
    let x_max = xs.iter().cloned().fold(1.0, f64::max);
    let y_max = ys.iter().cloned().fold(0.0, f64::max).max(1e-6);

    let x_of = |t: f64| {
        if (x_max - x_min).abs() < 1e-12 {
            left + plot_w / 2.0
        } else {
            left + (t.ln() - x_min.ln()) / (x_max.ln() - x_min.ln()) * plot_w
        }
    };
    let y_of = |kl: f64| top + (1.0 - (kl / y_max).clamp(0.0, 1.0)) * plot_h;

    let mut body = String::new();
    let _ = write!(
        body,
        r##"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="#fafafa" stroke="#888"/>"##
    );
    let _ = write!(
        body,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">MH transitions (log scale)</text>"#,
        left + plot_w / 2.0,
        h - 12.0
    );
    let _ = write!(
        body,
        r#"<text x="18" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">KL from reference (nats)</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    for (si, name) in strategies.iter().enumerate() {
        let color = strategy_color(name, si);
        let mut pts: Vec<(usize, f64)> = curve
            .iter()
            .filter(|p| &p.strategy == name)
            .map(|p| (p.transitions, p.kl))
            .collect();
        pts.sort_by_key(|&(t, _)| t);
        let coords: Vec<String> = pts
            .iter()
            .map(|&(t, kl)| format!("{},{}", fmt2(x_of(t.max(1) as f64)), fmt2(y_of(kl))))
            .collect();
        let _ = write!(
            body,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            coords.join(" "),
            color
        );
        if let Some(&marked) = markers.get(name) {
            if let Some(&(t, kl)) = pts.iter().find(|&&(t, _)| t == marked) {
                let _ = write!(
                    body,
                    r#"<circle class="marker" cx="{}" cy="{}" r="7" fill="none" stroke="{}" stroke-width="2"/>"#,
                    fmt2(x_of(t.max(1) as f64)),
                    fmt2(y_of(kl)),
                    color
                );
            }
        }
        // Legend entry.
        let ly = top + 16.0 * si as f64 + 12.0;
        let _ = write!(
            body,
            r#"<rect x="{}" y="{}" width="12" height="4" fill="{}"/><text x="{}" y="{}" font-size="12">{}</text>"#,
            left + plot_w - 110.0,
            ly,
            color,
            left + plot_w - 92.0,
            ly + 5.0,
            xml_escape(name)
        );
    }

    format!(
        concat!(
            r#"<?xml version="1.0" encoding="UTF-8"?>"#,
            "\n",
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            "<title>{title}</title>{body}</svg>\n"
        ),
        w = w,
        h = h,
        title = xml_escape(title),
        body = body
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Polygon;

    #[test]
    fn scene_counts_one_circle_per_sample() {
        let map = WorldMap::new(vec![Polygon::new(vec![
            Point::new(0.4, 0.4),
            Point::new(0.6, 0.4),
            Point::new(0.5, 0.6),
        ])
        .unwrap()]);
        let samples = vec![Point::new(0.1, 0.2), Point::new(0.3, 0.9), Point::new(0.8, 0.5)];
        let mut scene = SceneSvg::new();
        scene.map(&map).markers(&samples, "#d62728", 5.0, "sample");
        let svg = scene.finish("test scene");
        assert_eq!(svg.matches("<circle class=\"sample\"").count(), samples.len());
        assert_eq!(svg.matches("<polygon").count(), 1);
    }

    #[test]
    fn y_axis_is_flipped() {
        let mut scene = SceneSvg::new();
        scene.markers(&[Point::new(0.0, 1.0)], "#fff", 2.0, "m");
        let svg = scene.finish("flip");
        // World (0, 1) maps to screen (0, 0).
        assert!(svg.contains(r#"cx="0.00" cy="0.00""#));
    }

    #[test]
    fn curve_svg_contains_marker_circles() {
        let curve = vec![
            ConvergencePoint {
                strategy: "cr".into(),
                transitions: 1,
                kl: 2.0,
                ms_per_sample: 1.0,
                sample_count: 10,
            },
            ConvergencePoint {
                strategy: "cr".into(),
                transitions: 10,
                kl: 0.5,
                ms_per_sample: 1.0,
                sample_count: 10,
            },
        ];
        let mut markers = std::collections::BTreeMap::new();
        markers.insert("cr".to_string(), 10usize);
        let svg = kl_curve_svg(&curve, &markers, "kl");
        assert_eq!(svg.matches("class=\"marker\"").count(), 1);
        assert!(svg.contains("polyline"));
    }
}
