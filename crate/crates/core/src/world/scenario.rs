//! Scenario definitions: map, obstacles, ego start and run parameters.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Classification, Lane, LaneMap, Obstacle};
use crate::geometry::Vec2;
use crate::mpcc::{MpccConfig, VehicleState};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("unsupported scenario version {0}")]
    Version(u32),
    #[error("invalid scenario: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub tick: f64,
    /// Planner re-solves every this many ticks.
    pub replan_every: u32,
    pub d_standoff: f64,
    pub t_invocation: f64,
    pub t_heartbeat_max: f64,
    /// Run succeeds once the ego's path progress reaches this value.
    pub goal_progress: f64,
    pub time_limit: f64,
    #[serde(default)]
    pub planner: MpccConfig,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            tick: 0.1,
            replan_every: 5,
            d_standoff: 3.0,
            t_invocation: 25.0,
            t_heartbeat_max: 1.0,
            goal_progress: f64::INFINITY,
            time_limit: 180.0,
            planner: MpccConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub map: LaneMap,
    /// Index of the lane whose centerline is the route.
    pub route: usize,
    pub obstacles: Vec<Obstacle>,
    pub ego: VehicleState,
    pub params: ScenarioParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return Err(ScenarioError::Version(self.version));
        }
        let lane = self
            .map
            .lanes
            .get(self.route)
            .ok_or(ScenarioError::Invalid("route lane does not exist"))?;
        let r_c = self.params.planner.limits.radius;
        if self.map.lanes.iter().any(|l| l.width < 2.0 * r_c + 0.2) {
            return Err(ScenarioError::Invalid(
                "lane narrower than the vehicle disc plus margin",
            ));
        }
        if crate::path::ReferencePath::new(lane.centerline.clone()).is_err() {
            return Err(ScenarioError::Invalid("route centerline is degenerate"));
        }
        if self.obstacles.iter().any(|o| !crate::geometry::is_simple(&o.footprint)) {
            return Err(ScenarioError::Invalid("obstacle footprint is not a simple polygon"));
        }
        let p = &self.params;
        if !(p.tick > 0.0) || p.replan_every == 0 || !(p.time_limit > 0.0) {
            return Err(ScenarioError::Invalid(
                "tick, replan interval and time limit must be positive",
            ));
        }
        p.planner.validate().map_err(ScenarioError::Invalid)
    }
}

/// Straight road of 150 m, a left curve of radius 60 m over 40 m of arc,
/// then 100 m straight. Vertices every 2 m.
fn straight_plus_curve() -> Vec<Vec2> {
    let mut pts = Vec::new();
    let mut x = -20.0;
    while x < 150.0 {
        pts.push(Vec2::new(x, 0.0));
        x += 2.0;
    }
    let r = 60.0;
    let steps = 20;
    for k in 0..=steps {
        let a = (40.0 / r) * k as f64 / steps as f64;
        pts.push(Vec2::new(150.0 + r * libm::sin(a), r - r * libm::cos(a)));
    }
    let a = 40.0 / r;
    let end = pts[pts.len() - 1];
    let dir = Vec2::new(libm::cos(a), libm::sin(a));
    for k in 1..=50 {
        pts.push(end + dir * (2.0 * k as f64));
    }
    pts
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
    vec![
        Vec2::new(x0, y0),
        Vec2::new(x1, y0),
        Vec2::new(x1, y1),
        Vec2::new(x0, y1),
    ]
}

/// Single lane, a manhole cover across the lane that a human would drive
/// over.
fn scenario_a() -> Scenario {
    Scenario {
        version: SCENARIO_VERSION,
        name: "A".into(),
        map: LaneMap {
            lanes: vec![Lane {
                centerline: straight_plus_curve(),
                width: 3.5,
                crossable_left: false,
                crossable_right: false,
            }],
            shoulders: vec![],
        },
        route: 0,
        obstacles: vec![Obstacle {
            id: 1,
            label: "smoking manhole cover".into(),
            footprint: rect(A_OBSTACLE_X, -0.6, A_OBSTACLE_X + 1.2, 0.6),
            classification: Classification::Ignorable,
        }],
        ego: VehicleState {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            speed: 8.0,
            progress: 20.0,
        },
        params: ScenarioParams {
            goal_progress: 250.0,
            ..ScenarioParams::default()
        },
    }
}

const A_OBSTACLE_X: f64 = 19.5;
const B_BARRIER_X: f64 = 40.0;

/// Single lane between solid markings, a barrier leaving too narrow a gap
/// and a shoulder to the right.
fn scenario_b() -> Scenario {
    Scenario {
        version: SCENARIO_VERSION,
        name: "B".into(),
        map: LaneMap {
            lanes: vec![Lane {
                centerline: straight_plus_curve(),
                width: 3.5,
                crossable_left: false,
                crossable_right: false,
            }],
            shoulders: vec![rect(B_BARRIER_X - 30.0, -4.5, B_BARRIER_X + 30.0, -1.75)],
        },
        route: 0,
        obstacles: vec![Obstacle {
            id: 1,
            label: "concrete barrier".into(),
            footprint: rect(B_BARRIER_X, -1.3, B_BARRIER_X + 2.0, 2.0),
            classification: Classification::Blocking,
        }],
        ego: VehicleState {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            speed: 8.0,
            progress: 20.0,
        },
        params: ScenarioParams {
            d_standoff: 10.0,
            goal_progress: 250.0,
            ..ScenarioParams::default()
        },
    }
}

/// Built-in scenarios "A" and "B".
pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    match name {
        "A" | "a" => Ok(scenario_a()),
        "B" | "b" => Ok(scenario_b()),
        other => Err(ScenarioError::UnknownScenario(other.into())),
    }
}
