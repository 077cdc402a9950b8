//! Perception stub: turns the lane map and obstacle footprints into a
//! corridor for the planner. Every obstacle is reported as blocking.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{LaneMap, Obstacle};
use crate::corridor::{Corridor, StopLimit, DEFAULT_SAMPLE_SPACING, WIDTH_MARGIN};
use crate::geometry::{self, Polygon, Vec2};
use crate::mpcc::VehicleState;
use crate::path::ReferencePath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceivedObstacle {
    pub id: u32,
    pub footprint: Polygon,
}

/// Extent of a footprint in path coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrenetBox {
    pub theta_min: f64,
    pub theta_max: f64,
    pub offset_min: f64,
    pub offset_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentModel {
    pub ego: VehicleState,
    pub route: ReferencePath,
    pub obstacles: Vec<PerceivedObstacle>,
    #[serde(default)]
    pub shoulders: Vec<Polygon>,
    /// Lane corridor before obstacles are taken into account.
    pub lane_corridor: Corridor,
    pub corridor: Corridor,
    #[serde(default)]
    pub active_behavior: Option<alloc::string::String>,
}

/// Corridor bounded by the route lane, extended into neighbor lanes across
/// crossable markings.
pub fn lane_corridor(map: &LaneMap, route_lane: usize, path: &ReferencePath) -> Corridor {
    let lane = &map.lanes[route_lane];
    let mut left = lane.width / 2.0;
    let mut right = -lane.width / 2.0;
    if lane.crossable_left {
        if let Some(n) = map.lanes.get(route_lane + 1) {
            left += n.width;
        }
    }
    if lane.crossable_right && route_lane > 0 {
        right -= map.lanes[route_lane - 1].width;
    }
    Corridor::uniform(path.length(), DEFAULT_SAMPLE_SPACING, left, right)
}

/// Projects a footprint onto the path. Edges are subdivided so curved
/// paths are followed closely.
pub fn frenet_points(path: &ReferencePath, footprint: &[Vec2]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (a, b) in geometry::edges(footprint) {
        let n = (libm::ceil(a.distance(b) / 0.25) as usize).max(1);
        for k in 0..n {
            let p = a + (b - a) * (k as f64 / n as f64);
            out.push(path.project(p));
        }
    }
    out
}

pub fn frenet_box(path: &ReferencePath, footprint: &[Vec2]) -> FrenetBox {
    let pts = frenet_points(path, footprint);
    let mut b = FrenetBox {
        theta_min: f64::INFINITY,
        theta_max: f64::NEG_INFINITY,
        offset_min: f64::INFINITY,
        offset_max: f64::NEG_INFINITY,
    };
    for (t, o) in pts {
        b.theta_min = b.theta_min.min(t);
        b.theta_max = b.theta_max.max(t);
        b.offset_min = b.offset_min.min(o);
        b.offset_max = b.offset_max.max(o);
    }
    b
}

/// Smallest progress at which the footprint (in path coordinates) enters
/// the lateral band `[right, left]`, if it does.
fn entry_theta(pts: &[(f64, f64)], right: f64, left: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| best = Some(best.map_or(t, |b: f64| b.min(t)));
    let n = pts.len();
    for i in 0..n {
        let (t0, o0) = pts[i];
        let (t1, o1) = pts[(i + 1) % n];
        if (right..=left).contains(&o0) {
            consider(t0);
        }
        for bound in [right, left] {
            if (o0 - bound) * (o1 - bound) < 0.0 {
                consider(t0 + (t1 - t0) * (bound - o0) / (o1 - o0));
            }
        }
    }
    // a footprint wider than the band on both sides crosses it mid-edge
    // only through the bound crossings handled above
    best
}

/// Lateral change per metre of progress when a carved bound returns to the
/// lane bound. Keeps the bounds Lipschitz for the planner.
pub const CARVE_TAPER: f64 = 0.5;

/// Lateral distance kept between a carved bound and the obstacle. The
/// planner only constrains its stage points; this covers the path between
/// them.
pub const CARVE_CLEARANCE: f64 = 0.1;

/// Applies obstacles to a corridor. Obstacles leaving a gap of at least
/// `2 r_c + WIDTH_MARGIN + CARVE_CLEARANCE` next to them are carved out
/// laterally with a taper on both ends. The nearest one that is not sets
/// the stop limit `d_standoff` before its entry into the band.
pub fn apply_obstacles(
    base: &Corridor,
    path: &ReferencePath,
    obstacles: &[PerceivedObstacle],
    ego_progress: f64,
    r_c: f64,
    d_standoff: f64,
) -> Corridor {
    let mut out = base.clone();
    let min_gap = 2.0 * r_c + WIDTH_MARGIN;
    let mut stop: Option<f64> = None;
    for ob in obstacles {
        let pts = frenet_points(path, &ob.footprint);
        let fb = frenet_box(path, &ob.footprint);
        let lo = fb.theta_min - r_c;
        let hi = fb.theta_max + r_c;
        if hi < ego_progress {
            continue;
        }
        let samples: Vec<usize> = (0..out.len())
            .filter(|i| (lo..=hi).contains(&out.sample_theta(*i)))
            .collect();
        let overlaps = samples.iter().any(|&i| {
            let (r, l) = (out.right_samples()[i], out.left_samples()[i]);
            fb.offset_max > r && fb.offset_min < l
        });
        if !overlaps {
            continue;
        }
        let right_gap = samples
            .iter()
            .map(|&i| fb.offset_min - out.right_samples()[i])
            .fold(f64::INFINITY, f64::min);
        let left_gap = samples
            .iter()
            .map(|&i| out.left_samples()[i] - fb.offset_max)
            .fold(f64::INFINITY, f64::min);
        if right_gap.max(left_gap) >= min_gap + CARVE_CLEARANCE {
            // clip over [lo, hi] and taper back to the old bound outside
            for i in 0..out.len() {
                let theta = out.sample_theta(i);
                let outside = (lo - theta).max(theta - hi).max(0.0);
                let (r, l) = (out.right_samples()[i], out.left_samples()[i]);
                if right_gap >= left_gap {
                    let cap = fb.offset_min - CARVE_CLEARANCE + CARVE_TAPER * outside;
                    if cap < l {
                        out.set_band(i, r, cap);
                    }
                } else {
                    let cap = fb.offset_max + CARVE_CLEARANCE - CARVE_TAPER * outside;
                    if cap > r {
                        out.set_band(i, cap, l);
                    }
                }
            }
            continue;
        }
        let band_at = fb.theta_min.max(0.0);
        let (r, l) = (base.right_at(band_at).0, base.left_at(band_at).0);
        if let Some(entry) = entry_theta(&pts, r, l) {
            let limit = (entry - d_standoff).clamp(0.0, path.length());
            stop = Some(stop.map_or(limit, |s: f64| s.min(limit)));
        }
    }
    if let Some(s) = stop {
        let s = match base.stop() {
            StopLimit::At(b) => s.min(b),
            StopLimit::Unbounded => s,
        };
        out = out
            .apply_longitudinal_modification(StopLimit::At(s), path.length())
            .expect("stop limit clamped into the path domain");
    }
    out
}

/// Builds the environment model for the current ego state.
pub fn perceive(
    map: &LaneMap,
    route_lane: usize,
    path: &ReferencePath,
    obstacles: &[Obstacle],
    ego: &VehicleState,
    r_c: f64,
    d_standoff: f64,
) -> EnvironmentModel {
    let lane = lane_corridor(map, route_lane, path);
    let perceived: Vec<PerceivedObstacle> = obstacles
        .iter()
        .map(|o| PerceivedObstacle {
            id: o.id,
            footprint: o.footprint.clone(),
        })
        .collect();
    let (theta, _) = path.project(ego.position());
    let corridor = apply_obstacles(&lane, path, &perceived, theta, r_c, d_standoff);
    EnvironmentModel {
        ego: *ego,
        route: path.clone(),
        obstacles: perceived,
        shoulders: map.shoulders.clone(),
        lane_corridor: lane,
        corridor,
        active_behavior: None,
    }
}
