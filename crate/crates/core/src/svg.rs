//! Deterministic SVG rendering of maps and trajectories.

use std::fmt::Write;

use crate::cloud::SemanticClass;
use crate::map::MapDocument;
use crate::simworld::slot_outline;
use crate::{Pose2d, Vec2d};

const SCALE: f64 = 8.0;
const PAD: f64 = 40.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn class_color(c: SemanticClass) -> &'static str {
    match c {
        SemanticClass::SlotLine => "#9e9e9e",
        SemanticClass::LaneMarking => "#e6b800",
        SemanticClass::Arrow => "#00a0a0",
    }
}

/// A named trajectory to draw as a polyline.
pub struct Track<'a> {
    pub name: &'a str,
    pub poses: &'a [(u64, Pose2d)],
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    min: Vec2d,
    max: Vec2d,
}

impl Bounds {
    fn grow(&mut self, p: Vec2d) {
        self.min = Vec2d::new(self.min.x.min(p.x), self.min.y.min(p.y));
        self.max = Vec2d::new(self.max.x.max(p.x), self.max.y.max(p.y));
    }
}

/// Renders the map (slots as rectangles, semantic points by class) and the tracks.
/// World y points up. Coordinates are printed with fixed precision so output is
/// byte-stable for identical inputs.
pub fn render(map: Option<&MapDocument>, tracks: &[Track<'_>]) -> String {
    let mut b: Option<Bounds> = None;
    let mut include = |p: Vec2d| match &mut b {
        Some(b) => b.grow(p),
        None => b = Some(Bounds { min: p, max: p }),
    };
    let mut rects = Vec::new();
    if let Some(m) = map {
        for lp in &m.semantic_cloud.points {
            include(lp.p);
        }
        for s in &m.slots {
            let corners = slot_corners(s.midpoint(), Vec2d::from_angle(s.theta), s.width, m.slot_depth);
            corners.iter().for_each(|&c| include(c));
            rects.push(corners);
        }
    }
    for t in tracks {
        for (_, p) in t.poses {
            include(p.translation());
        }
    }
    let b = b.unwrap_or(Bounds { min: Vec2d::zero(), max: Vec2d::new(10.0, 10.0) });
    let span = Vec2d::new((b.max.x - b.min.x).max(1.0), (b.max.y - b.min.y).max(1.0));
    let (w, h) = (span.x * SCALE + 2.0 * PAD, span.y * SCALE + 2.0 * PAD);
    let px = |p: Vec2d| ((p.x - b.min.x) * SCALE + PAD, (b.max.y - p.y) * SCALE + PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    axes(&mut s, b, w, h, &px);

    if let Some(m) = map {
        for class in SemanticClass::ALL {
            let _ = writeln!(s, r#"<g class="{}" fill="{}">"#, class.name(), class_color(class));
            for p in m.semantic_cloud.of_class(class) {
                let (x, y) = px(p);
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="0.8"/>"#);
            }
            s.push_str("</g>\n");
        }
        s.push_str(r##"<g class="slots" fill="#4a90d9" fill-opacity="0.25" stroke="#1f4e79" stroke-width="1">"##);
        s.push('\n');
        for (slot, corners) in m.slots.iter().zip(&rects) {
            let pts: Vec<String> = corners.iter().map(|&c| px(c)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(s, r#"<polygon data-id="{}" points="{}"/>"#, slot.id, pts.join(" "));
        }
        s.push_str("</g>\n");
    }

    for (i, t) in tracks.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = t.poses.iter().map(|(_, p)| px(p.translation())).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="track" data-name="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(t.name),
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.0}" font-size="12" fill="{color}">{}</text>"#,
            w - PAD - 150.0,
            PAD + 14.0 * (i as f64 + 1.0),
            escape(t.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Corners in drawing order: entry edge, then the back edge reversed.
fn slot_corners(mid: Vec2d, dir: Vec2d, width: f64, depth: f64) -> [Vec2d; 4] {
    let edges = slot_outline(mid, dir, width, depth);
    [edges[0].0, edges[1].0, edges[1].1, edges[0].1]
}

fn axes(s: &mut String, b: Bounds, w: f64, h: f64, px: &impl Fn(Vec2d) -> (f64, f64)) {
    let _ = writeln!(s, r##"<g class="axes" stroke="#000000" stroke-width="1" font-size="10">"##);
    let _ = writeln!(s, r#"<line x1="{PAD:.0}" y1="{:.0}" x2="{:.0}" y2="{:.0}"/>"#, h - PAD, w - PAD, h - PAD);
    let _ = writeln!(s, r#"<line x1="{PAD:.0}" y1="{PAD:.0}" x2="{PAD:.0}" y2="{:.0}"/>"#, h - PAD);
    let step = 10.0;
    let mut x = (b.min.x / step).ceil() * step;
    while x <= b.max.x {
        let (sx, _) = px(Vec2d::new(x, b.min.y));
        let _ = writeln!(s, r#"<text x="{sx:.2}" y="{:.0}" stroke="none" text-anchor="middle">{x:.0}</text>"#, h - PAD + 14.0);
        x += step;
    }
    let mut y = (b.min.y / step).ceil() * step;
    while y <= b.max.y {
        let (_, sy) = px(Vec2d::new(b.min.x, y));
        let _ = writeln!(s, r#"<text x="{:.0}" y="{sy:.2}" stroke="none" text-anchor="end">{y:.0}</text>"#, PAD - 4.0);
        y += step;
    }
    s.push_str("</g>\n");
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
