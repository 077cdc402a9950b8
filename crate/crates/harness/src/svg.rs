//! Top-down SVG snapshot: route, corridor bounds (left red, right green),
//! stop limit (blue), obstacles and a planned trajectory (dark green).

use std::fmt::Write;

use teleassist_core::corridor::Corridor;
use teleassist_core::geometry::Vec2;
use teleassist_core::mpcc::Trajectory;
use teleassist_core::world::EnvironmentModel;

const SCALE: f64 = 10.0;
const MARGIN: f64 = 10.0;

fn polyline(out: &mut String, pts: &[Vec2], stroke: &str, width: f64, dash: bool) {
    let coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", p.x, -p.y)).collect();
    let dash = if dash { r#" stroke-dasharray="0.5,0.5""# } else { "" };
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
        coords.join(" ")
    );
}

fn polygon(out: &mut String, pts: &[Vec2], fill: &str) {
    let coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", p.x, -p.y)).collect();
    let _ = writeln!(
        out,
        r#"<polygon points="{}" fill="{fill}" stroke="none"/>"#,
        coords.join(" ")
    );
}

pub fn render(env: &EnvironmentModel, corridor: &Corridor, plan: Option<&Trajectory>) -> String {
    let route = &env.route;
    let mut left = Vec::with_capacity(corridor.len());
    let mut right = Vec::with_capacity(corridor.len());
    for i in 0..corridor.len() {
        let theta = corridor.sample_theta(i);
        let f = route.frame(theta);
        left.push(f.point + f.normal * corridor.left_samples()[i]);
        right.push(f.point + f.normal * corridor.right_samples()[i]);
    }
    let all = left
        .iter()
        .chain(&right)
        .chain(env.obstacles.iter().flat_map(|o| &o.footprint));
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(-p.y);
        y1 = y1.max(-p.y);
    }
    let (w, h) = (x1 - x0 + 2.0 * MARGIN, y1 - y0 + 2.0 * MARGIN);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="{:.2} {:.2} {:.2} {:.2}">"#,
        w * SCALE,
        h * SCALE,
        x0 - MARGIN,
        y0 - MARGIN,
        w,
        h
    );
    for s in &env.shoulders {
        polygon(&mut out, s, "#dddddd");
    }
    for o in &env.obstacles {
        polygon(&mut out, &o.footprint, "#555555");
    }
    polyline(&mut out, route.vertices(), "#888888", 0.1, true);
    polyline(&mut out, &left, "#d62728", 0.15, false);
    polyline(&mut out, &right, "#2ca02c", 0.15, false);
    if let Some(stop) = corridor.stop().value() {
        let f = route.frame(stop);
        let a = f.point + f.normal * corridor.left_at(stop).0;
        let b = f.point + f.normal * corridor.right_at(stop).0;
        polyline(&mut out, &[a, b], "#1f3fbf", 0.3, false);
    }
    if let Some(plan) = plan {
        let pts: Vec<Vec2> = plan.states.iter().map(|s| s.state.position()).collect();
        polyline(&mut out, &pts, "#0b5d1e", 0.2, false);
    }
    let e = env.ego.position();
    let _ = writeln!(
        out,
        r#"<circle cx="{:.2}" cy="{:.2}" r="1" fill="none" stroke="black" stroke-width="0.1"/>"#,
        e.x, -e.y
    );
    out.push_str("</svg>\n");
    out
}
