//! Top-view plot of an episode: floor, walls, ground-truth footprints,
//! recognized models and the robot path.

use std::fmt::Write;

use crate::geometry::Aabb;
use crate::orchestrator::episode::ReconstructionResult;
use crate::orchestrator::trace::{EpisodeTrace, ScanKind, TraceEvent};
use crate::scanner::scene::Scene;

const PX_PER_M: f64 = 100.0;
const MARGIN: f64 = 20.0;

pub fn top_view_svg(scene: &Scene, result: &ReconstructionResult, trace: &EpisodeTrace) -> String {
    let (lo, hi) = scene.floor.bounds_xy();
    let w = (hi[0] - lo[0]) * PX_PER_M + 2.0 * MARGIN;
    let h = (hi[1] - lo[1]) * PX_PER_M + 2.0 * MARGIN;
    let x = |v: f64| MARGIN + (v - lo[0]) * PX_PER_M;
    let y = |v: f64| h - MARGIN - (v - lo[1]) * PX_PER_M;
    let rect = |b: &Aabb| (x(b.min.x), y(b.max.y), (b.max.x - b.min.x) * PX_PER_M, (b.max.y - b.min.y) * PX_PER_M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let poly: Vec<String> = scene
        .floor
        .polygon
        .iter()
        .map(|p| format!("{:.1},{:.1}", x(p[0]), y(p[1])))
        .collect();
    let _ = writeln!(s, r##"<polygon points="{}" fill="#f4f1ea" stroke="none"/>"##, poly.join(" "));
    for wall in &scene.walls {
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#333" stroke-width="4"/>"##,
            x(wall.from[0]),
            y(wall.from[1]),
            x(wall.to[0]),
            y(wall.to[1])
        );
    }
    for o in &scene.objects {
        if let Some(b) = o.world_aabb() {
            let (rx, ry, rw, rh) = rect(&b);
            let _ = writeln!(
                s,
                r##"<rect x="{rx:.1}" y="{ry:.1}" width="{rw:.1}" height="{rh:.1}" fill="none" stroke="#999" stroke-dasharray="4 3"><title>{}</title></rect>"##,
                o.label
            );
        }
    }
    for r in &result.recognized {
        let (rx, ry, rw, rh) = rect(&r.aabb);
        let _ = writeln!(
            s,
            r##"<rect x="{rx:.1}" y="{ry:.1}" width="{rw:.1}" height="{rh:.1}" fill="#4a90d9" fill-opacity="0.35" stroke="#1d5fa8"><title>{} ({:.3})</title></rect>"##,
            r.label, r.objectness
        );
    }
    let mut path = Vec::new();
    for e in &trace.events {
        if let TraceEvent::Navigation { waypoints, .. } = e {
            path.extend(waypoints.iter().map(|p| format!("{:.1},{:.1}", x(p.x), y(p.y))));
        }
    }
    if !path.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#d0021b" stroke-width="2"/>"##,
            path.join(" ")
        );
    }
    for (v, kind) in trace.scans() {
        let color = match kind {
            ScanKind::Entry => "#000",
            ScanKind::Nbv | ScanKind::Fallback => "#d0021b",
            ScanKind::Frontier => "#7ed321",
        };
        let (px, py) = (x(v.position.x), y(v.position.y));
        let d = v.view_direction.horizontal().normalized().unwrap_or_default();
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.1}" cy="{py:.1}" r="4" fill="{color}"/><line x1="{px:.1}" y1="{py:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}"/>"#,
            px + d.x * 15.0,
            py - d.y * 15.0
        );
    }
    s.push_str("</svg>\n");
    s
}
