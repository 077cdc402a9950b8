//! Sequential quadratic programming over the input sequence.
//!
//! States are eliminated by forward simulation (single shooting), so every
//! iterate is dynamically consistent by construction. Each iteration builds
//! a Gauss-Newton model of the objective, linearizes the stage constraints
//! through the rollout sensitivities and solves an elastic QP; the step is
//! globalized with a backtracking line search on the l1 merit function.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dynamics::{step_with_jacobians, ControlInput, VehicleState, INPUT_DIM, STATE_DIM};
use super::qp::{ElasticQp, LeadingRows};
use super::{evaluate_stage, objective, MpccProblem, StampedState, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Stop once the merit function decreases by less than this.
    pub cost_tolerance: f64,
    /// Largest constraint value accepted in a returned trajectory.
    pub constraint_tolerance: f64,
    /// Initial l1 penalty on constraint violation.
    pub penalty: f64,
    pub max_penalty: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            cost_tolerance: 1e-6,
            constraint_tolerance: 1e-4,
            penalty: 1e3,
            max_penalty: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid planning problem: {0}")]
    InvalidProblem(&'static str),
    #[error("no feasible trajectory found (max constraint value {violation:.3e})")]
    Infeasible { violation: f64 },
}

/// Constraints per state stage: left, right, longitudinal, stopping, speed
/// limit. One more per input stage: non-negative speed after the step.
/// A final row holds the terminal headway constraint.
const ROWS_PER_STATE: usize = 5;

struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn bounds(problem: &MpccProblem<'_>) -> Bounds {
    let l = &problem.config.limits;
    let n = problem.config.horizon;
    let lo = [-l.accel_max, -l.steer_max, 0.0];
    let hi = [l.accel_max, l.steer_max, l.progress_rate_max];
    Bounds {
        lower: (0..n * INPUT_DIM).map(|i| lo[i % INPUT_DIM]).collect(),
        upper: (0..n * INPUT_DIM).map(|i| hi[i % INPUT_DIM]).collect(),
    }
}

fn to_inputs(u: &[f64]) -> Vec<ControlInput> {
    u.chunks_exact(INPUT_DIM)
        .map(|c| ControlInput::from_array([c[0], c[1], c[2]]))
        .collect()
}

fn rollout(problem: &MpccProblem<'_>, u: &[f64]) -> Vec<VehicleState> {
    let inputs = to_inputs(u);
    super::rollout(problem, &inputs)
}

/// Constraint values in row order (see [`linearize`]).
fn constraint_values(problem: &MpccProblem<'_>, states: &[VehicleState], u: &[f64]) -> Vec<f64> {
    let n = problem.config.horizon;
    let dt = problem.config.dt;
    let mut out = Vec::with_capacity(n * (ROWS_PER_STATE + 1) + 1);
    for s in &states[1..] {
        let e = evaluate_stage(problem, s);
        out.extend_from_slice(&[
            e.constraints.lateral_left,
            e.constraints.lateral_right,
            e.constraints.longitudinal,
            e.constraints.stopping,
            e.speed_limit,
        ]);
    }
    for k in 0..n {
        out.push(-(states[k].speed + u[INPUT_DIM * k] * dt));
    }
    out.push(evaluate_stage(problem, &states[n]).terminal);
    out
}

fn violation_sum(c: &[f64]) -> f64 {
    c.iter().map(|v| v.max(0.0)).sum()
}

fn violation_max(c: &[f64]) -> f64 {
    c.iter().fold(0.0f64, |m, v| m.max(*v))
}

struct Linearization {
    cost: f64,
    gradient: Vec<f64>,
    hessian: DMatrix<f64>,
    constraints: Vec<f64>,
    jacobian: Vec<f64>,
    lead: Vec<usize>,
}

type Sensitivity = [[f64; INPUT_DIM]; STATE_DIM];

/// Row vector `grad_x * d x_k / d u` written into `row` (length `3 k`).
fn chain(grad: &[f64; STATE_DIM], sens: &[Sensitivity], row: &mut [f64]) {
    for (j, sj) in sens.iter().enumerate() {
        for c in 0..INPUT_DIM {
            let mut acc = 0.0;
            for r in 0..STATE_DIM {
                acc += grad[r] * sj[r][c];
            }
            row[INPUT_DIM * j + c] = acc;
        }
    }
}

fn linearize(problem: &MpccProblem<'_>, u: &[f64]) -> Linearization {
    let cfg = &problem.config;
    let n = cfg.horizon;
    let nv = n * INPUT_DIM;
    let dt = cfg.dt;
    let w = &cfg.weights;
    let wheelbase = cfg.limits.wheelbase;

    // rollout with sensitivities; sens[k][j] = d x_k / d u_j for j < k
    let inputs = to_inputs(u);
    let mut states = Vec::with_capacity(n + 1);
    let mut sens: Vec<Vec<Sensitivity>> = Vec::with_capacity(n + 1);
    states.push(problem.initial);
    sens.push(Vec::new());
    for k in 0..n {
        let (next, a, b) = step_with_jacobians(&states[k], &inputs[k], dt, wheelbase);
        let mut row: Vec<Sensitivity> = Vec::with_capacity(k + 1);
        for sj in &sens[k] {
            let mut m = [[0.0; INPUT_DIM]; STATE_DIM];
            for r in 0..STATE_DIM {
                for c in 0..INPUT_DIM {
                    let mut acc = 0.0;
                    for q in 0..STATE_DIM {
                        acc += a[r][q] * sj[q][c];
                    }
                    m[r][c] = acc;
                }
            }
            row.push(m);
        }
        row.push(b);
        states.push(next);
        sens.push(row);
    }

    let mut cost = objective(problem, &states, &inputs);
    if !cost.is_finite() {
        cost = f64::INFINITY;
    }
    let mut gradient = vec![0.0; nv];
    let mut hessian = DMatrix::<f64>::zeros(nv, nv);
    let rows = n * (ROWS_PER_STATE + 1) + 1;
    let mut constraints = Vec::with_capacity(rows);
    let mut jacobian = vec![0.0; rows * nv];
    let mut lead = Vec::with_capacity(rows);

    let (sqrt_c, sqrt_l) = (libm::sqrt(w.contouring), libm::sqrt(w.lag));
    let mut res_row = vec![0.0; nv];
    for k in 1..=n {
        let s = &states[k];
        let e = evaluate_stage(problem, s);
        let width = INPUT_DIM * k;

        // Gauss-Newton terms of the contouring and lag residuals
        for (scale, value, grad) in [(sqrt_c, e.contouring, &e.d_contouring), (sqrt_l, e.lag, &e.d_lag)] {
            if scale == 0.0 {
                continue;
            }
            let g: [f64; STATE_DIM] = core::array::from_fn(|i| grad[i] * scale);
            chain(&g, &sens[k], &mut res_row[..width]);
            let r = value * scale;
            for p in 0..width {
                let rp = res_row[p];
                if rp == 0.0 {
                    continue;
                }
                gradient[p] += 2.0 * r * rp;
                for q in 0..=p {
                    hessian[(p, q)] += 2.0 * rp * res_row[q];
                }
            }
        }

        let values = [
            e.constraints.lateral_left,
            e.constraints.lateral_right,
            e.constraints.longitudinal,
            e.constraints.stopping,
            e.speed_limit,
        ];
        for (c, value) in values.iter().enumerate() {
            let row_index = constraints.len();
            constraints.push(*value);
            lead.push(width);
            let row = &mut jacobian[row_index * nv..row_index * nv + width];
            chain(&e.d_constraints[c], &sens[k], row);
        }
    }
    // speed after each step stays non-negative: -(v_k + a_k dt) <= 0
    for k in 0..n {
        let row_index = constraints.len();
        constraints.push(-(states[k].speed + u[INPUT_DIM * k] * dt));
        lead.push(INPUT_DIM * k + 1);
        let row = &mut jacobian[row_index * nv..row_index * nv + INPUT_DIM * k + 1];
        let mut g = [0.0; STATE_DIM];
        g[3] = -1.0;
        chain(&g, &sens[k], &mut row[..INPUT_DIM * k]);
        row[INPUT_DIM * k] = -dt;
    }
    {
        let e = evaluate_stage(problem, &states[n]);
        let row_index = constraints.len();
        constraints.push(e.terminal);
        lead.push(nv);
        chain(
            &e.d_terminal,
            &sens[n],
            &mut jacobian[row_index * nv..(row_index + 1) * nv],
        );
    }

    // progress reward
    for k in 0..n {
        gradient[INPUT_DIM * k + 2] -= w.progress * dt;
    }
    // input rate penalty w_u * sum ||(u_k - u_{k-1}) / dt||^2
    let rate = 2.0 * w.input_rate / (dt * dt);
    let prev = problem.previous_input.to_array();
    for k in 0..n {
        for c in 0..INPUT_DIM {
            let i = INPUT_DIM * k + c;
            let before = if k == 0 { prev[c] } else { u[i - INPUT_DIM] };
            gradient[i] += rate * (u[i] - before);
            hessian[(i, i)] += rate;
            if k + 1 < n {
                gradient[i] -= rate * (u[i + INPUT_DIM] - u[i]);
                hessian[(i, i)] += rate;
                hessian[(i + INPUT_DIM, i)] -= rate;
            }
        }
    }
    for p in 0..nv {
        hessian[(p, p)] += 1e-9;
        for q in 0..p {
            hessian[(q, p)] = hessian[(p, q)];
        }
    }

    Linearization {
        cost,
        gradient,
        hessian,
        constraints,
        jacobian,
        lead,
    }
}

/// Objective value and constraint values at `u`.
fn evaluate(problem: &MpccProblem<'_>, u: &[f64]) -> (f64, Vec<f64>) {
    let states = rollout(problem, u);
    let cost = objective(problem, &states, &to_inputs(u));
    (cost, constraint_values(problem, &states, u))
}

fn initial_guess(problem: &MpccProblem<'_>, warm: Option<&[ControlInput]>, b: &Bounds) -> Vec<f64> {
    let n = problem.config.horizon;
    let mut u = Vec::with_capacity(n * INPUT_DIM);
    let pace = problem.initial.speed;
    for k in 0..n {
        let c = warm
            .and_then(|w| w.get(k).or(w.last()))
            .copied()
            .unwrap_or(ControlInput {
                accel: 0.0,
                steer: 0.0,
                progress_rate: pace,
            });
        u.extend_from_slice(&c.to_array());
    }
    for (i, v) in u.iter_mut().enumerate() {
        *v = if v.is_finite() {
            v.clamp(b.lower[i], b.upper[i])
        } else {
            0.0
        };
    }
    u
}

/// Why the SQP loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    SmallDecrease,
    NoPredictedDecrease,
    LineSearchFailed,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub penalty: f64,
    pub termination: Termination,
    pub max_violation: f64,
}

/// Plans a trajectory; `warm_start` seeds the input sequence (it is
/// extended with its last element when shorter than the horizon).
pub fn solve(problem: &MpccProblem<'_>, warm_start: Option<&[ControlInput]>) -> Result<Trajectory, PlanError> {
    solve_with_report(problem, warm_start).0
}

pub fn solve_with_report(
    problem: &MpccProblem<'_>,
    warm_start: Option<&[ControlInput]>,
) -> (Result<Trajectory, PlanError>, SolveReport) {
    let mut report = SolveReport {
        iterations: 0,
        penalty: problem.config.solver.penalty,
        termination: Termination::IterationLimit,
        max_violation: f64::INFINITY,
    };
    let result = solve_inner(problem, warm_start, &mut report);
    (result, report)
}

fn solve_inner(
    problem: &MpccProblem<'_>,
    warm_start: Option<&[ControlInput]>,
    report: &mut SolveReport,
) -> Result<Trajectory, PlanError> {
    problem.config.validate().map_err(PlanError::InvalidProblem)?;
    let init = problem.initial.to_array();
    if init.iter().any(|v| !v.is_finite()) || problem.initial.speed < 0.0 {
        return Err(PlanError::InvalidProblem(
            "initial state must be finite with non-negative speed",
        ));
    }
    let settings = problem.config.solver;
    let b = bounds(problem);
    let nv = b.lower.len();
    let mut u = initial_guess(problem, warm_start, &b);
    let mut rho = settings.penalty;

    let mut lin = linearize(problem, &u);
    let mut merit = lin.cost + rho * violation_sum(&lin.constraints);

    for iteration in 0..settings.max_iterations {
        report.iterations = iteration + 1;
        let lower: Vec<f64> = (0..nv).map(|i| b.lower[i] - u[i]).collect();
        let upper: Vec<f64> = (0..nv).map(|i| b.upper[i] - u[i]).collect();
        let rhs: Vec<f64> = lin.constraints.iter().map(|c| -c).collect();
        let qp = ElasticQp {
            hessian: &lin.hessian,
            gradient: &lin.gradient,
            constraints: LeadingRows {
                data: &lin.jacobian,
                lead: &lin.lead,
                cols: nv,
            },
            rhs: &rhs,
            lower: &lower,
            upper: &upper,
            penalty: rho,
        };
        let sol = qp.solve();
        let d = &sol.step;

        // predicted merit decrease of the quadratic model
        let hd = &lin.hessian * nalgebra::DVector::from_column_slice(d);
        let quad: f64 = (0..nv).map(|i| lin.gradient[i] * d[i] + 0.5 * d[i] * hd[i]).sum();
        let mut lin_after = 0.0;
        for (i, c) in lin.constraints.iter().enumerate() {
            let lead = lin.lead[i];
            let row = &lin.jacobian[i * nv..i * nv + lead];
            let ad: f64 = row.iter().zip(d.iter()).map(|(a, x)| a * x).sum();
            lin_after += (c + ad).max(0.0);
        }
        let predicted = -quad + rho * (violation_sum(&lin.constraints) - lin_after);
        if !(predicted > 1e-12 * (1.0 + merit.abs())) {
            if violation_max(&lin.constraints) <= settings.constraint_tolerance || rho >= settings.max_penalty {
                report.termination = Termination::NoPredictedDecrease;
                break;
            }
            rho = (rho * 10.0).min(settings.max_penalty);
            merit = lin.cost + rho * violation_sum(&lin.constraints);
            continue;
        }

        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-8 {
            let trial: Vec<f64> = (0..nv)
                .map(|i| (u[i] + step * d[i]).clamp(b.lower[i], b.upper[i]))
                .collect();
            let (cost, cons) = evaluate(problem, &trial);
            let m = cost + rho * violation_sum(&cons);
            if m.is_finite() && m <= merit - 1e-4 * step * predicted {
                accepted = Some((trial, m));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, new_merit)) = accepted else {
            if violation_max(&lin.constraints) > settings.constraint_tolerance && rho < settings.max_penalty {
                rho = (rho * 10.0).min(settings.max_penalty);
                merit = lin.cost + rho * violation_sum(&lin.constraints);
                continue;
            }
            report.termination = Termination::LineSearchFailed;
            break;
        };
        let decrease = merit - new_merit;
        u = trial;
        lin = linearize(problem, &u);
        merit = lin.cost + rho * violation_sum(&lin.constraints);

        let violation = violation_max(&lin.constraints);
        let saturated = sol.multipliers.iter().any(|l| *l >= 0.9 * rho);
        if violation > settings.constraint_tolerance && saturated && rho < settings.max_penalty {
            rho = (rho * 10.0).min(settings.max_penalty);
            merit = lin.cost + rho * violation_sum(&lin.constraints);
            continue;
        }
        if decrease < settings.cost_tolerance {
            if violation <= settings.constraint_tolerance || rho >= settings.max_penalty {
                report.termination = Termination::SmallDecrease;
                break;
            }
            rho = (rho * 10.0).min(settings.max_penalty);
            merit = lin.cost + rho * violation_sum(&lin.constraints);
        }
    }

    let violation = violation_max(&lin.constraints);
    report.penalty = rho;
    report.max_violation = violation;
    if violation > settings.constraint_tolerance || !lin.cost.is_finite() {
        return Err(PlanError::Infeasible { violation });
    }
    Ok(assemble(problem, &u, lin.cost))
}

fn assemble(problem: &MpccProblem<'_>, u: &[f64], cost: f64) -> Trajectory {
    let states = rollout(problem, u);
    let dt = problem.config.dt;
    let constraints = states.iter().map(|s| evaluate_stage(problem, s).constraints).collect();
    Trajectory {
        states: states
            .into_iter()
            .enumerate()
            .map(|(k, state)| StampedState {
                t: problem.start_time + k as f64 * dt,
                state,
            })
            .collect(),
        inputs: to_inputs(u),
        objective: cost,
        constraints,
    }
}

/// Analytic objective gradient and constraint Jacobian at an input
/// sequence, exposed for derivative checks. Rows follow the solver's
/// ordering: five per state stage, one per input stage, then the terminal
/// headway row.
pub fn derivatives(problem: &MpccProblem<'_>, inputs: &[ControlInput]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let u: Vec<f64> = inputs.iter().flat_map(|c| c.to_array()).collect();
    let lin = linearize(problem, &u);
    let nv = u.len();
    let jac = (0..lin.constraints.len())
        .map(|i| lin.jacobian[i * nv..(i + 1) * nv].to_vec())
        .collect();
    (lin.gradient, lin.constraints, jac)
}

/// Objective and constraint values in the same ordering as [`derivatives`].
pub fn values(problem: &MpccProblem<'_>, inputs: &[ControlInput]) -> (f64, Vec<f64>) {
    let u: Vec<f64> = inputs.iter().flat_map(|c| c.to_array()).collect();
    evaluate(problem, &u)
}
