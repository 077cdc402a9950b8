//! Model predictive contouring control.
//!
//! The planner maximizes progress along a reference path while keeping a
//! disc of radius `R_c` around the vehicle center inside the corridor and
//! behind the corridor's stop limit. Progress `theta` is a state and its
//! rate an input, so the path parameter is optimized together with the
//! vehicle motion.

pub mod dynamics;
pub mod qp;
pub mod solver;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corridor::{Corridor, StopLimit};
use crate::path::ReferencePath;

pub use dynamics::{dynamics_step, ControlInput, VehicleState};
pub use solver::{solve, solve_with_report, PlanError, SolveReport, SolverSettings, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub contouring: f64,
    pub lag: f64,
    pub progress: f64,
    pub input_rate: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            contouring: 5.0,
            lag: 10.0,
            progress: 1.0,
            input_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleLimits {
    /// Symmetric acceleration bound, also used as braking capability.
    pub accel_max: f64,
    pub steer_max: f64,
    pub progress_rate_max: f64,
    pub speed_max: f64,
    pub wheelbase: f64,
    /// Radius of the disc approximating the vehicle footprint.
    pub radius: f64,
    /// The last planned state must reach the progress limit no sooner than
    /// this many seconds at its own speed.
    #[serde(default = "default_terminal_headway")]
    pub terminal_headway: f64,
}

fn default_terminal_headway() -> f64 {
    10.0
}

impl Default for VehicleLimits {
    fn default() -> Self {
        Self {
            accel_max: 3.0,
            steer_max: 0.5,
            progress_rate_max: 15.0,
            speed_max: 8.0,
            wheelbase: 2.7,
            radius: 1.0,
            terminal_headway: default_terminal_headway(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpccConfig {
    pub horizon: usize,
    pub dt: f64,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub limits: VehicleLimits,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl Default for MpccConfig {
    fn default() -> Self {
        Self {
            horizon: 30,
            dt: 0.2,
            weights: Weights::default(),
            limits: VehicleLimits::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl MpccConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        let w = &self.weights;
        let l = &self.limits;
        if self.horizon < 1 {
            return Err("horizon must be at least one stage");
        }
        if !(self.dt > 0.0) {
            return Err("stage duration must be positive");
        }
        if [w.contouring, w.lag, w.progress, w.input_rate]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err("weights must be non-negative");
        }
        if !(l.radius > 0.0 && l.wheelbase > 0.0) {
            return Err("vehicle radius and wheelbase must be positive");
        }
        if !(l.accel_max >= 0.0 && l.steer_max >= 0.0 && l.progress_rate_max >= 0.0 && l.speed_max > 0.0) {
            return Err("input limits must be non-negative");
        }
        Ok(())
    }
}

/// One planning instance. Borrowed geometry keeps problems cheap to build.
#[derive(Debug, Clone, Copy)]
pub struct MpccProblem<'a> {
    pub config: MpccConfig,
    pub initial: VehicleState,
    pub path: &'a ReferencePath,
    pub corridor: &'a Corridor,
    /// Input applied before the horizon, anchors the input-rate penalty.
    pub previous_input: ControlInput,
    pub start_time: f64,
}

impl<'a> MpccProblem<'a> {
    pub fn new(config: MpccConfig, initial: VehicleState, path: &'a ReferencePath, corridor: &'a Corridor) -> Self {
        Self {
            config,
            initial,
            path,
            corridor,
            previous_input: ControlInput::default(),
            start_time: 0.0,
        }
    }

    /// Effective progress limit: the corridor stop or the end of the path.
    pub fn progress_limit(&self) -> f64 {
        let end = self.path.length();
        match self.corridor.stop() {
            StopLimit::Unbounded => end,
            StopLimit::At(v) => v.min(end),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StampedState {
    pub t: f64,
    pub state: VehicleState,
}

/// Constraint values of one stage; all must be `<= 0` when satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageConstraints {
    pub lateral_left: f64,
    pub lateral_right: f64,
    pub longitudinal: f64,
    pub stopping: f64,
}

impl StageConstraints {
    pub fn max(&self) -> f64 {
        self.lateral_left
            .max(self.lateral_right)
            .max(self.longitudinal)
            .max(self.stopping)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<StampedState>,
    pub inputs: Vec<ControlInput>,
    pub objective: f64,
    #[serde(default)]
    pub constraints: Vec<StageConstraints>,
}

impl Trajectory {
    pub fn start_time(&self) -> f64 {
        self.states[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.states[self.states.len() - 1].t
    }

    /// At least two states with strictly increasing stamps.
    pub fn is_well_formed(&self) -> bool {
        self.states.len() >= 2 && self.states.windows(2).all(|w| w[1].t > w[0].t)
    }

    /// Linear interpolation between stamped states, clamped to the ends.
    pub fn state_at(&self, t: f64) -> VehicleState {
        let first = &self.states[0];
        if t <= first.t {
            return first.state;
        }
        let last = &self.states[self.states.len() - 1];
        if t >= last.t {
            return last.state;
        }
        let i = self.states.partition_point(|s| s.t <= t) - 1;
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let lambda = (t - a.t) / (b.t - a.t);
        let (sa, sb) = (a.state.to_array(), b.state.to_array());
        let mut out = [0.0; dynamics::STATE_DIM];
        for k in 0..dynamics::STATE_DIM {
            out[k] = sa[k] + (sb[k] - sa[k]) * lambda;
        }
        VehicleState::from_array(out)
    }

    /// Same trajectory with all stamps shifted so it starts at `t0`.
    pub fn retimed(&self, t0: f64) -> Trajectory {
        let shift = t0 - self.start_time();
        let mut out = self.clone();
        for s in &mut out.states {
            s.t += shift;
        }
        out
    }
}

/// Linearized lateral deviation of the vehicle center: the signed distance
/// from the position to the path tangent line anchored at `P(theta)`.
pub fn contouring_error(state: &VehicleState, path: &ReferencePath) -> f64 {
    let f = path.frame(state.progress);
    f.normal.dot(state.position() - f.point)
}

/// Longitudinal mismatch between the position and the path point at
/// `theta`, positive when the vehicle is ahead.
pub fn lag_error(state: &VehicleState, path: &ReferencePath) -> f64 {
    let f = path.frame(state.progress);
    f.tangent.dot(state.position() - f.point)
}

/// `[-E_left(theta) + R_c + E_c, E_right(theta) + R_c - E_c]`.
pub fn lateral_constraints(contouring: f64, theta: f64, corridor: &Corridor, radius: f64) -> (f64, f64) {
    let left = corridor.left_at(theta).0;
    let right = corridor.right_at(theta).0;
    (-left + radius + contouring, right + radius - contouring)
}

/// `theta - theta_stop`; never active for an unbounded limit.
pub fn longitudinal_constraint(theta: f64, stop: StopLimit) -> f64 {
    match stop {
        StopLimit::Unbounded => f64::NEG_INFINITY,
        StopLimit::At(v) => theta - v,
    }
}

/// Stage errors and constraint values with gradients with respect to the
/// state vector `[x, y, heading, speed, theta]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StageEval {
    /// Contouring error relative to the tracking offset.
    pub contouring: f64,
    pub lag: f64,
    pub d_contouring: [f64; 5],
    pub d_lag: [f64; 5],
    pub constraints: StageConstraints,
    /// Gradients of left, right, longitudinal, stopping and speed limit.
    pub d_constraints: [[f64; 5]; 5],
    pub speed_limit: f64,
    /// Terminal headway constraint; only imposed on the last state.
    pub terminal: f64,
    pub d_terminal: [f64; 5],
}

/// Lateral offset the contouring cost pulls towards: the reference line
/// itself when the disc fits there, else the nearest offset where it does.
/// Returns the offset and its derivative with respect to progress.
pub fn tracking_offset(left: f64, d_left: f64, right: f64, d_right: f64, radius: f64) -> (f64, f64) {
    let (lo, hi) = (right + radius, left - radius);
    if lo > hi {
        (0.5 * (lo + hi), 0.5 * (d_left + d_right))
    } else if lo > 0.0 {
        (lo, d_right)
    } else if hi < 0.0 {
        (hi, d_left)
    } else {
        (0.0, 0.0)
    }
}

pub(crate) fn evaluate_stage(problem: &MpccProblem<'_>, s: &VehicleState) -> StageEval {
    let limits = &problem.config.limits;
    let theta = s.progress;
    let f = problem.path.frame(theta);
    let delta = s.position() - f.point;
    let ec = f.normal.dot(delta);
    let el = f.tangent.dot(delta);
    let d_ec = [
        f.normal.x,
        f.normal.y,
        0.0,
        0.0,
        f.d_normal.dot(delta) - f.normal.dot(f.d_point),
    ];
    let d_el = [
        f.tangent.x,
        f.tangent.y,
        0.0,
        0.0,
        f.d_tangent.dot(delta) - f.tangent.dot(f.d_point),
    ];

    let (left, d_left) = problem.corridor.left_at(theta);
    let (right, d_right) = problem.corridor.right_at(theta);
    let r = limits.radius;
    let (target, d_target) = tracking_offset(left, d_left, right, d_right, r);
    let limit = problem.progress_limit();
    let brake = 2.0 * limits.accel_max.max(1e-6);

    let constraints = StageConstraints {
        lateral_left: -left + r + ec,
        lateral_right: right + r - ec,
        longitudinal: theta - limit,
        stopping: theta + el + s.speed * s.speed / brake - limit,
    };
    let mut d = [[0.0; 5]; 5];
    for k in 0..5 {
        d[0][k] = d_ec[k];
        d[1][k] = -d_ec[k];
        d[3][k] = d_el[k];
    }
    d[0][4] -= d_left;
    d[1][4] += d_right;
    d[2][4] = 1.0;
    d[3][4] += 1.0;
    d[3][3] = 2.0 * s.speed / brake;
    d[4][3] = 1.0;
    let headway = limits.terminal_headway;
    let mut d_terminal = d_el;
    d_terminal[3] += headway;
    d_terminal[4] += 1.0;

    let mut d_tracking = d_ec;
    d_tracking[4] -= d_target;

    StageEval {
        contouring: ec - target,
        lag: el,
        d_contouring: d_tracking,
        d_lag: d_el,
        constraints,
        d_constraints: d,
        speed_limit: s.speed - limits.speed_max,
        terminal: theta + el + headway * s.speed - limit,
        d_terminal,
    }
}

/// Cost and constraint values of one predicted state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTerms {
    /// Contouring and lag cost.
    pub cost: f64,
    /// Left, right, longitudinal, stopping distance and speed limit.
    pub constraints: [f64; 5],
    /// Headway constraint, imposed on the last state only.
    pub terminal: f64,
}

pub fn state_terms(problem: &MpccProblem<'_>, s: &VehicleState) -> StateTerms {
    let w = &problem.config.weights;
    let e = evaluate_stage(problem, s);
    StateTerms {
        cost: w.contouring * e.contouring * e.contouring + w.lag * e.lag * e.lag,
        constraints: [
            e.constraints.lateral_left,
            e.constraints.lateral_right,
            e.constraints.longitudinal,
            e.constraints.stopping,
            e.speed_limit,
        ],
        terminal: e.terminal,
    }
}

/// Progress reward and input rate cost of applying `u` after `prev`.
pub fn input_cost(problem: &MpccProblem<'_>, prev: &ControlInput, u: &ControlInput) -> f64 {
    let w = &problem.config.weights;
    let dt = problem.config.dt;
    let (pa, pu) = (prev.to_array(), u.to_array());
    let rate: f64 = (0..3)
        .map(|k| {
            let r = (pu[k] - pa[k]) / dt;
            r * r
        })
        .sum();
    -w.progress * u.progress_rate * dt + w.input_rate * rate
}

/// MPCC objective for a state/input sequence.
pub fn objective(problem: &MpccProblem<'_>, states: &[VehicleState], inputs: &[ControlInput]) -> f64 {
    let mut j: f64 = states.iter().map(|s| state_terms(problem, s).cost).sum();
    let mut prev = problem.previous_input;
    for u in inputs {
        j += input_cost(problem, &prev, u);
        prev = *u;
    }
    j
}

/// Forward simulation of an input sequence from the problem's initial state.
pub fn rollout(problem: &MpccProblem<'_>, inputs: &[ControlInput]) -> Vec<VehicleState> {
    let mut out = Vec::with_capacity(inputs.len() + 1);
    let mut s = problem.initial;
    out.push(s);
    for u in inputs {
        s = dynamics_step(&s, u, problem.config.dt, problem.config.limits.wheelbase);
        out.push(s);
    }
    out
}
