//! Minimal SVG rendering: heatmap cells, building footprints, polylines.

use std::fmt::Write as _;

use crate::geometry::Point2;
use crate::terrain::{Rect, UrbanMap};

const MARGIN: f64 = 40.0;
const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

/// Viridis-like colour for `t` in `[0, 1]`.
pub fn color(t: f64) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let f = t * (VIRIDIS.len() - 1) as f64;
    let i = (f.floor() as usize).min(VIRIDIS.len() - 2);
    let w = f - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |x: f64, y: f64| (x + w * (y - x)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

/// Canvas in world meters, 1 px per `scale` meters, y pointing up.
pub struct Canvas {
    extent: Rect,
    scale: f64,
    body: String,
}

impl Canvas {
    pub fn new(extent: Rect, width_px: f64) -> Self {
        Self {
            extent,
            scale: width_px / extent.width(),
            body: String::new(),
        }
    }

    fn px(&self, p: Point2) -> (f64, f64) {
        (
            MARGIN + (p.x - self.extent.x_min) * self.scale,
            MARGIN + (self.extent.y_max - p.y) * self.scale,
        )
    }

    pub fn rect(&mut self, r: &Rect, fill: &str) {
        let (x, y) = self.px(Point2::new(r.x_min, r.y_max));
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            r.width() * self.scale,
            r.height() * self.scale
        );
    }

    pub fn polyline(&mut self, pts: &[Point2], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            coords.join(" ")
        );
    }

    pub fn circle(&mut self, p: Point2, r_px: f64, fill: &str) {
        let (x, y) = self.px(p);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r_px}" fill="{fill}" stroke="black"/>"#
        );
    }

    pub fn triangle(&mut self, p: Point2, r_px: f64, fill: &str) {
        let (x, y) = self.px(p);
        let _ = writeln!(
            self.body,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{fill}" stroke="black"/>"#,
            x,
            y - r_px,
            x - r_px,
            y + r_px,
            x + r_px,
            y + r_px
        );
    }

    pub fn buildings(&mut self, map: &UrbanMap) {
        let top = map.max_building_height().max(f64::MIN_POSITIVE);
        for b in map.buildings() {
            let g = (220.0 - 160.0 * b.height / top).round() as u8;
            self.rect(&b.footprint, &format!("#{g:02x}{g:02x}{g:02x}"));
        }
    }

    pub fn finish(self) -> String {
        let w = self.extent.width() * self.scale + 2.0 * MARGIN;
        let h = self.extent.height() * self.scale + 2.0 * MARGIN;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        out.push_str(&self.body);
        let _ = writeln!(
            out,
            r#"<text x="{:.0}" y="{:.0}" font-size="12" text-anchor="middle">x (m)</text>"#,
            w / 2.0,
            h - 12.0
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.0}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.0})">y (m)</text>"#,
            h / 2.0,
            h / 2.0
        );
        out.push_str("</svg>\n");
        out
    }
}
