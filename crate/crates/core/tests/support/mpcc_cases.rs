//! Planner fixtures and oracles shared by the planner tests and the
//! acceptance run of the harness crate.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teleassist_core::corridor::{Corridor, StopLimit};
use teleassist_core::geometry::Vec2;
use teleassist_core::mpcc::solver::{derivatives, values};
use teleassist_core::mpcc::{
    contouring_error, dynamics_step, input_cost, lateral_constraints, longitudinal_constraint, solve, state_terms,
    ControlInput, MpccConfig, MpccProblem, PlanError, Trajectory, VehicleState,
};
use teleassist_core::path::ReferencePath;

/// Constraint tolerance for returned plans.
pub const TOL: f64 = 1e-4;

pub fn straight(len: f64) -> ReferencePath {
    ReferencePath::straight(Vec2::new(0.0, 0.0), 0.0, len).unwrap()
}

/// Arc of radius 40 sampled every 2 m, then a straight exit.
pub fn curved() -> ReferencePath {
    let mut pts = vec![Vec2::new(-20.0, 0.0)];
    let r = 40.0;
    for i in 0..=30 {
        let a = i as f64 * (2.0 / r);
        pts.push(Vec2::new(r * a.sin(), r - r * a.cos()));
    }
    let last = *pts.last().unwrap();
    let a = 30.0 * 2.0 / r;
    pts.push(last + Vec2::new(a.cos(), a.sin()) * 60.0);
    ReferencePath::new(pts).unwrap()
}

pub fn lane(path: &ReferencePath) -> Corridor {
    Corridor::uniform(path.length(), 0.5, 1.75, -1.75)
}

pub fn on_path(path: &ReferencePath, theta: f64, offset: f64, speed: f64) -> VehicleState {
    let f = path.frame(theta);
    let p = f.point + f.normal * offset;
    VehicleState {
        x: p.x,
        y: p.y,
        heading: f.tangent.y.atan2(f.tangent.x),
        speed,
        progress: theta,
    }
}

/// Checks every documented property of a returned trajectory.
pub fn trajectory_errors(problem: &MpccProblem<'_>, traj: &Trajectory) -> Result<(), String> {
    let cfg = &problem.config;
    let l = &cfg.limits;
    if traj.states.len() != cfg.horizon + 1 || traj.inputs.len() != cfg.horizon {
        return Err(format!(
            "shape {} states {} inputs",
            traj.states.len(),
            traj.inputs.len()
        ));
    }
    for (k, u) in traj.inputs.iter().enumerate() {
        if u.accel.abs() > l.accel_max || u.steer.abs() > l.steer_max {
            return Err(format!("input bound at stage {k}"));
        }
        if !(0.0..=l.progress_rate_max).contains(&u.progress_rate) {
            return Err(format!("progress rate bound at stage {k}"));
        }
        let pred = dynamics_step(&traj.states[k].state, u, cfg.dt, l.wheelbase).to_array();
        let next = traj.states[k + 1].state.to_array();
        if let Some(i) = (0..5).find(|&i| (pred[i] - next[i]).abs() > 1e-6) {
            return Err(format!(
                "defect {} at stage {k} component {i}",
                (pred[i] - next[i]).abs()
            ));
        }
        if ((traj.states[k + 1].t - traj.states[k].t) - cfg.dt).abs() > 1e-9 {
            return Err(format!("time step at stage {k}"));
        }
    }
    for (k, w) in traj.states.windows(2).enumerate() {
        if w[1].state.progress < w[0].state.progress {
            return Err(format!("progress decreases at stage {k}"));
        }
    }
    for (k, s) in traj.states.iter().enumerate().skip(1) {
        let st = s.state;
        if st.speed < 0.0 {
            return Err(format!("negative speed at stage {k}"));
        }
        let ec = contouring_error(&st, problem.path);
        let (gl, gr) = lateral_constraints(ec, st.progress, problem.corridor, l.radius);
        if gl > TOL || gr > TOL {
            return Err(format!("lateral {gl} {gr} at stage {k}"));
        }
        let g = longitudinal_constraint(st.progress, problem.corridor.stop());
        if g > TOL {
            return Err(format!("longitudinal {g} at stage {k}"));
        }
    }
    Ok(())
}

/// Random start and corridor for the constraint suite.
pub fn constraint_case(seed: u64) -> Result<bool, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = if rng.random_bool(0.5) {
        curved()
    } else {
        straight(150.0)
    };
    let theta: f64 = rng.random_range(0.0..60.0);
    let stop = if rng.random_bool(0.5) {
        StopLimit::At((theta + rng.random_range(2.0..60.0)).min(path.length()))
    } else {
        StopLimit::Unbounded
    };
    let corridor = lane(&path)
        .apply_longitudinal_modification(stop, path.length())
        .unwrap();
    let mut start = on_path(&path, theta, rng.random_range(-0.7..0.7), rng.random_range(0.0..8.0));
    start.heading += rng.random_range(-0.15..0.15);
    let problem = MpccProblem::new(MpccConfig::default(), start, &path, &corridor);
    match solve(&problem, None) {
        Ok(traj) => trajectory_errors(&problem, &traj).map(|_| true),
        Err(PlanError::Infeasible { .. }) => Ok(false),
        Err(e) => Err(format!("unexpected error {e}")),
    }
}

fn fd_problem_inputs(seed: u64) -> (ReferencePath, Corridor, VehicleState, Vec<ControlInput>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = curved();
    let mut corridor = lane(&path);
    if rng.random_bool(0.5) {
        corridor = corridor
            .apply_longitudinal_modification(StopLimit::At(rng.random_range(30.0..60.0)), path.length())
            .unwrap();
    }
    let start = on_path(
        &path,
        rng.random_range(2.0..20.0),
        rng.random_range(-0.5..0.5),
        rng.random_range(2.0..7.0),
    );
    let inputs = (0..8)
        .map(|_| ControlInput {
            accel: rng.random_range(-0.5..1.0),
            steer: rng.random_range(-0.1..0.1),
            progress_rate: rng.random_range(2.0..8.0),
        })
        .collect();
    (path, corridor, start, inputs)
}

/// Analytic objective gradient and constraint Jacobian against central
/// differences.
pub fn finite_difference_case(seed: u64) -> Result<(), String> {
    let h = 1e-6;
    let (path, corridor, start, inputs) = fd_problem_inputs(seed);
    let cfg = MpccConfig {
        horizon: inputs.len(),
        ..MpccConfig::default()
    };
    let problem = MpccProblem::new(cfg, start, &path, &corridor);
    let (grad, cons, jac) = derivatives(&problem, &inputs);
    let (_, cons_value) = values(&problem, &inputs);
    if cons.len() != cons_value.len() {
        return Err("constraint count mismatch".into());
    }
    let flat: Vec<f64> = inputs.iter().flat_map(|u| u.to_array()).collect();
    let unflat = |v: &[f64]| -> Vec<ControlInput> {
        v.chunks(3)
            .map(|c| ControlInput::from_array([c[0], c[1], c[2]]))
            .collect()
    };
    for j in 0..flat.len() {
        let mut p = flat.clone();
        let mut m = flat.clone();
        p[j] += h;
        m[j] -= h;
        let (jp, cp) = values(&problem, &unflat(&p));
        let (jm, cm) = values(&problem, &unflat(&m));
        let fd = (jp - jm) / (2.0 * h);
        if (fd - grad[j]).abs() > 1e-4 * fd.abs().max(1.0) {
            return Err(format!("dJ/du[{j}]: fd {fd} analytic {}", grad[j]));
        }
        for (r, row) in jac.iter().enumerate() {
            if !cp[r].is_finite() || !cm[r].is_finite() {
                continue;
            }
            let fd = (cp[r] - cm[r]) / (2.0 * h);
            if (fd - row[j]).abs() > 1e-4 * fd.abs().max(1.0) {
                return Err(format!("dg[{r}]/du[{j}]: fd {fd} analytic {}", row[j]));
            }
        }
    }
    Ok(())
}

/// Best feasible objective over five levels per input axis, or `None` when
/// no grid sequence is feasible. Prefixes are rolled out once and pruned as
/// soon as a stage is infeasible.
pub fn grid_oracle(problem: &MpccProblem<'_>) -> Option<f64> {
    let l = problem.config.limits;
    let axis = |lo: f64, hi: f64| -> Vec<f64> { (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect() };
    let mut options = Vec::with_capacity(125);
    for a in axis(-l.accel_max, l.accel_max) {
        for d in axis(-l.steer_max, l.steer_max) {
            for r in axis(0.0, l.progress_rate_max) {
                options.push(ControlInput {
                    accel: a,
                    steer: d,
                    progress_rate: r,
                });
            }
        }
    }
    let mut best = None;
    let base = state_terms(problem, &problem.initial).cost;
    descend(
        problem,
        &options,
        0,
        &problem.initial,
        &problem.previous_input,
        base,
        &mut best,
    );
    best
}

fn descend(
    problem: &MpccProblem<'_>,
    options: &[ControlInput],
    depth: usize,
    state: &VehicleState,
    prev: &ControlInput,
    cost: f64,
    best: &mut Option<f64>,
) {
    let cfg = &problem.config;
    let last = depth + 1 == cfg.horizon;
    for u in options {
        if -(state.speed + u.accel * cfg.dt) > TOL {
            continue;
        }
        let next = dynamics_step(state, u, cfg.dt, cfg.limits.wheelbase);
        let terms = state_terms(problem, &next);
        if terms.constraints.iter().any(|g| *g > TOL) {
            continue;
        }
        let c = cost + input_cost(problem, prev, u) + terms.cost;
        if last {
            if terms.terminal <= TOL && best.is_none_or(|b| c < b) {
                *best = Some(c);
            }
        } else {
            descend(problem, options, depth + 1, &next, u, c, best);
        }
    }
}

pub enum OracleOutcome {
    /// Solver objective and grid best.
    Compared { solver: f64, oracle: f64 },
    /// The grid found nothing feasible.
    OracleInfeasible,
}

/// Horizon-3 instance compared against [`grid_oracle`].
pub fn oracle_case(seed: u64) -> Result<OracleOutcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = if rng.random_bool(0.5) {
        curved()
    } else {
        straight(150.0)
    };
    let theta = rng.random_range(2.0..50.0);
    let speed = rng.random_range(0.0..7.0);
    let stop = if rng.random_bool(0.3) {
        StopLimit::At(theta + rng.random_range(1.0..20.0))
    } else {
        StopLimit::Unbounded
    };
    let corridor = lane(&path)
        .apply_longitudinal_modification(stop, path.length())
        .unwrap();
    let mut start = on_path(&path, theta, rng.random_range(-0.5..0.5), speed);
    start.heading += rng.random_range(-0.05..0.05);
    let cfg = MpccConfig {
        horizon: 3,
        ..MpccConfig::default()
    };
    let problem = MpccProblem::new(cfg, start, &path, &corridor);
    let Some(oracle) = grid_oracle(&problem) else {
        return Ok(OracleOutcome::OracleInfeasible);
    };
    let traj = solve(&problem, None).map_err(|e| format!("solver failed ({e}) where the grid found {oracle}"))?;
    trajectory_errors(&problem, &traj)?;
    if traj.objective > oracle + 0.05 * oracle.abs() {
        return Err(format!("solver {} above oracle {oracle}", traj.objective));
    }
    Ok(OracleOutcome::Compared {
        solver: traj.objective,
        oracle,
    })
}
