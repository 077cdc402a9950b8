//! FollowLane and Teleoperation behaviors and the graph that arbitrates
//! between them.

mod follow_lane;
mod teleop;

pub use follow_lane::FollowLane;
pub use teleop::{teleop_corridor, TeleopBehavior, TeleopConfig};

use alloc::vec::Vec;

use crate::arbitration::{ArbitrationGraph, Arbitrator};
use crate::corridor::Corridor;
use crate::mpcc::{solve, ControlInput, MpccConfig, MpccProblem, PlanError, Trajectory, VehicleState};
use crate::world::{Command, EnvironmentModel, ScenarioParams};

pub const ROOT: &str = "AutomatedDriving";
pub const TELEOPERATION: &str = "Teleoperation";
pub const URBAN_DRIVING: &str = "UrbanDriving";
pub const FOLLOW_LANE: &str = "FollowLane";

/// Everything a behavior may look at during one tick.
#[derive(Debug, Clone)]
pub struct Situation {
    pub time: f64,
    pub ego: VehicleState,
    pub standstill_time: f64,
    pub environment: EnvironmentModel,
}

/// Receding-horizon plan cache shared by both behaviors.
#[derive(Debug, Clone, Default)]
pub(crate) struct PlanCache {
    pub plan: Option<Trajectory>,
    pub ticks_since: u32,
}

impl PlanCache {
    pub fn clear(&mut self) {
        self.plan = None;
        self.ticks_since = 0;
    }

    pub fn due(&self, replan_every: u32) -> bool {
        self.plan.is_none() || self.ticks_since >= replan_every
    }

    /// Input of the cached plan in effect at `t`, and the remaining inputs
    /// from there on as a warm start.
    fn continuation(&self, t: f64) -> (ControlInput, Vec<ControlInput>) {
        match &self.plan {
            Some(p) if !p.inputs.is_empty() => {
                let dt = p.states[1].t - p.states[0].t;
                let k = libm::round((t - p.start_time()) / dt).max(0.0) as usize;
                let k = k.min(p.inputs.len() - 1);
                let current =
                    p.inputs[(libm::floor((t - p.start_time()) / dt).max(0.0) as usize).min(p.inputs.len() - 1)];
                (current, p.inputs[k..].to_vec())
            }
            _ => (ControlInput::default(), Vec::new()),
        }
    }

    /// Re-solves from the current ego state, re-projected onto the route.
    pub fn replan(&mut self, config: &MpccConfig, s: &Situation, corridor: &Corridor) -> Result<Trajectory, PlanError> {
        let (previous_input, warm) = self.continuation(s.time);
        let mut initial = s.ego;
        initial.progress = s.environment.route.project(s.ego.position()).0;
        let mut problem = MpccProblem::new(*config, initial, &s.environment.route, corridor);
        problem.previous_input = previous_input;
        problem.start_time = s.time;
        let result = solve(&problem, if warm.is_empty() { None } else { Some(&warm) });
        match &result {
            Ok(t) => {
                self.plan = Some(t.clone());
                self.ticks_since = 0;
            }
            Err(_) => self.clear(),
        }
        result
    }

    /// Command for this tick, replanning when due.
    pub fn command(
        &mut self,
        config: &MpccConfig,
        replan_every: u32,
        s: &Situation,
        corridor: &Corridor,
    ) -> Result<Command, PlanError> {
        if self.due(replan_every) {
            self.replan(config, s, corridor)?;
        }
        self.ticks_since += 1;
        Ok(Command::Trajectory(
            self.plan.clone().expect("plan present after replan"),
        ))
    }
}

/// AutomatedDriving (priority) over Teleoperation and UrbanDriving (cost),
/// the latter holding FollowLane at constant cost 1.
pub fn build_graph(params: &ScenarioParams) -> ArbitrationGraph<Situation, Command> {
    let urban = Arbitrator::cost(URBAN_DRIVING).costed_behavior(FollowLane::new(params), |_| 1.0);
    let root = Arbitrator::priority(ROOT)
        .behavior(TeleopBehavior::new(TeleopConfig::from(params)))
        .option(urban.into_node());
    ArbitrationGraph::new(root)
}
