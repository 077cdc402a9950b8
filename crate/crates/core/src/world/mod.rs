//! Deterministic fixed-step world: lane map, obstacles and the ego vehicle
//! under perfect trajectory tracking.

mod perception;
mod scenario;

pub use perception::{
    apply_obstacles, frenet_box, lane_corridor, perceive, EnvironmentModel, FrenetBox, PerceivedObstacle,
    CARVE_CLEARANCE, CARVE_TAPER,
};
pub use scenario::{builtin, Scenario, ScenarioError, ScenarioParams, SCENARIO_VERSION};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{Polygon, Vec2};
use crate::mpcc::{Trajectory, VehicleState};
use crate::path::{PathError, ReferencePath};

/// Speed at or below which the vehicle counts as standing still.
pub const V_EPS: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub centerline: Vec<Vec2>,
    pub width: f64,
    pub crossable_left: bool,
    pub crossable_right: bool,
}

/// Lanes are ordered right to left; lane `i + 1` is the left neighbor of
/// lane `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneMap {
    pub lanes: Vec<Lane>,
    #[serde(default)]
    pub shoulders: Vec<Polygon>,
}

impl LaneMap {
    pub fn route_path(&self, lane: usize) -> Result<ReferencePath, PathError> {
        ReferencePath::new(self.lanes[lane].centerline.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Blocking,
    Ignorable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: u32,
    pub label: String,
    pub footprint: Polygon,
    /// Ground truth; never shown to the vehicle.
    pub classification: Classification,
}

/// Vehicle-side command: follow a trajectory or hold the current pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Trajectory(Trajectory),
    Standstill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Ticks since the start; the clock is `ticks * tick`.
    pub ticks: u64,
    pub tick: f64,
    pub ego: VehicleState,
    /// Consecutive observed states, the current one included, with
    /// `v <= V_EPS`.
    pub standstill_ticks: u64,
}

impl WorldState {
    pub fn new(ego: VehicleState, tick: f64) -> Self {
        let standstill_ticks = u64::from(ego.speed <= V_EPS);
        Self {
            ticks: 0,
            tick,
            ego,
            standstill_ticks,
        }
    }

    pub fn clock(&self) -> f64 {
        self.ticks as f64 * self.tick
    }

    /// Time since the standstill onset; zero at the onset tick itself.
    pub fn standstill_time(&self) -> f64 {
        self.standstill_ticks.saturating_sub(1) as f64 * self.tick
    }

    /// Advances one tick. A trajectory is tracked perfectly; a standstill
    /// command keeps the pose and brings the speed to zero.
    pub fn step(&mut self, command: &Command) {
        let t_next = (self.ticks + 1) as f64 * self.tick;
        match command {
            Command::Trajectory(traj) => self.ego = traj.state_at(t_next),
            Command::Standstill => self.ego.speed = 0.0,
        }
        self.ticks += 1;
        if self.ego.speed > V_EPS {
            self.standstill_ticks = 0;
        } else {
            self.standstill_ticks += 1;
        }
    }
}
