//! Kinematic bicycle with a progress-rate input, integrated with the
//! explicit midpoint rule over a few sub-steps.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

pub const STATE_DIM: usize = 5;
pub const INPUT_DIM: usize = 3;
/// Midpoint sub-steps per call to [`dynamics_step`].
pub const SUBSTEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub progress: f64,
}

impl VehicleState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [self.x, self.y, self.heading, self.speed, self.progress]
    }

    pub fn from_array(a: [f64; STATE_DIM]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            heading: a[2],
            speed: a[3],
            progress: a[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub accel: f64,
    pub steer: f64,
    pub progress_rate: f64,
}

impl ControlInput {
    pub fn to_array(&self) -> [f64; INPUT_DIM] {
        [self.accel, self.steer, self.progress_rate]
    }

    pub fn from_array(a: [f64; INPUT_DIM]) -> Self {
        Self {
            accel: a[0],
            steer: a[1],
            progress_rate: a[2],
        }
    }
}

/// Continuous-time right-hand side.
pub fn derivative(s: &VehicleState, u: &ControlInput, wheelbase: f64) -> [f64; STATE_DIM] {
    [
        s.speed * libm::cos(s.heading),
        s.speed * libm::sin(s.heading),
        s.speed / wheelbase * libm::tan(u.steer),
        u.accel,
        u.progress_rate,
    ]
}

/// One step of length `dt`. Speed is clamped at zero from below.
pub fn dynamics_step(s: &VehicleState, u: &ControlInput, dt: f64, wheelbase: f64) -> VehicleState {
    step_with_jacobians(s, u, dt, wheelbase).0
}

pub type StateJacobian = [[f64; STATE_DIM]; STATE_DIM];
pub type InputJacobian = [[f64; INPUT_DIM]; STATE_DIM];

/// Step together with `d next / d state` and `d next / d input`.
pub fn step_with_jacobians(
    s: &VehicleState,
    u: &ControlInput,
    dt: f64,
    wheelbase: f64,
) -> (VehicleState, StateJacobian, InputJacobian) {
    let h = dt / SUBSTEPS as f64;
    let (mut x, mut a, mut b) = midpoint(s, u, h, wheelbase);
    for _ in 1..SUBSTEPS {
        let (next, a2, b2) = midpoint(&x, u, h, wheelbase);
        let mut a_new = [[0.0; STATE_DIM]; STATE_DIM];
        let mut b_new = b2;
        for r in 0..STATE_DIM {
            for q in 0..STATE_DIM {
                let m = a2[r][q];
                if m == 0.0 {
                    continue;
                }
                for c in 0..STATE_DIM {
                    a_new[r][c] += m * a[q][c];
                }
                for c in 0..INPUT_DIM {
                    b_new[r][c] += m * b[q][c];
                }
            }
        }
        x = next;
        a = a_new;
        b = b_new;
    }
    (x, a, b)
}

fn midpoint(
    s: &VehicleState,
    u: &ControlInput,
    dt: f64,
    wheelbase: f64,
) -> (VehicleState, StateJacobian, InputJacobian) {
    let c = 0.5 * dt;
    let tan_d = libm::tan(u.steer);
    let kappa = tan_d / wheelbase;
    let dkappa = (1.0 + tan_d * tan_d) / wheelbase;

    let mid_heading = s.heading + c * s.speed * kappa;
    let mid_speed = s.speed + c * u.accel;
    let (sin_m, cos_m) = (libm::sin(mid_heading), libm::cos(mid_heading));

    let raw_speed = s.speed + dt * u.accel;
    let next = VehicleState {
        x: s.x + dt * mid_speed * cos_m,
        y: s.y + dt * mid_speed * sin_m,
        heading: s.heading + dt * mid_speed * kappa,
        speed: raw_speed.max(0.0),
        progress: s.progress + dt * u.progress_rate,
    };

    let mut a = [[0.0; STATE_DIM]; STATE_DIM];
    let mut b = [[0.0; INPUT_DIM]; STATE_DIM];
    // x
    a[0][0] = 1.0;
    a[0][2] = -dt * mid_speed * sin_m;
    a[0][3] = dt * (cos_m - mid_speed * sin_m * c * kappa);
    b[0][0] = dt * cos_m * c;
    b[0][1] = -dt * mid_speed * sin_m * c * s.speed * dkappa;
    // y
    a[1][1] = 1.0;
    a[1][2] = dt * mid_speed * cos_m;
    a[1][3] = dt * (sin_m + mid_speed * cos_m * c * kappa);
    b[1][0] = dt * sin_m * c;
    b[1][1] = dt * mid_speed * cos_m * c * s.speed * dkappa;
    // heading
    a[2][2] = 1.0;
    a[2][3] = dt * kappa;
    b[2][0] = dt * c * kappa;
    b[2][1] = dt * mid_speed * dkappa;
    // speed
    if raw_speed >= 0.0 {
        a[3][3] = 1.0;
        b[3][0] = dt;
    }
    // progress
    a[4][4] = 1.0;
    b[4][2] = dt;

    (next, a, b)
}
