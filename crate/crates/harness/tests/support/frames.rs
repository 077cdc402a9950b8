//! Random wire frames and scenario documents for the round-trip checks.

#![allow(dead_code)]

use rand::{Rng, RngCore};
use teleassist_core::arbitration::{GraphSnapshot, Policy};
use teleassist_core::corridor::StopLimit;
use teleassist_core::geometry::{Polygon, Vec2};
use teleassist_core::mpcc::{ControlInput, StageConstraints, StampedState, Trajectory, VehicleState};
use teleassist_core::protocol::{
    Ack, Approval, AssistanceRequest, Envelope, Modification, Payload, PlanningFailed, Proposal, SessionPhase,
    StateUpdate,
};
use teleassist_core::world::{builtin, perceive, Scenario};

/// Any finite double, biased towards awkward ones.
pub fn float(rng: &mut impl RngCore) -> f64 {
    match rng.random_range(0..6) {
        0 => loop {
            let v = f64::from_bits(rng.random());
            if v.is_finite() {
                break v;
            }
        },
        1 => [
            0.0,
            -0.0,
            f64::MIN_POSITIVE,
            f64::MAX,
            f64::MIN,
            f64::EPSILON,
            0.1,
            1e-300,
        ][rng.random_range(0..8)],
        2 => rng.random_range(-1e-6..1e-6),
        _ => rng.random_range(-1e3..1e3),
    }
}

pub fn text(rng: &mut impl RngCore) -> String {
    const CHARS: &[char] = &[
        'a',
        'Z',
        '0',
        ' ',
        '"',
        '\\',
        '/',
        '\n',
        '\t',
        '\u{1}',
        'é',
        '→',
        '\u{1F697}',
        '{',
        '}',
    ];
    let n = rng.random_range(0..12);
    (0..n).map(|_| CHARS[rng.random_range(0..CHARS.len())]).collect()
}

pub fn state(rng: &mut impl RngCore) -> VehicleState {
    VehicleState {
        x: float(rng),
        y: float(rng),
        heading: float(rng),
        speed: float(rng),
        progress: float(rng),
    }
}

pub fn polygon(rng: &mut impl RngCore) -> Polygon {
    let n = rng.random_range(3..7);
    (0..n).map(|_| Vec2::new(float(rng), float(rng))).collect()
}

pub fn stop_limit(rng: &mut impl RngCore) -> StopLimit {
    if rng.random_bool(0.5) {
        StopLimit::At(float(rng))
    } else {
        StopLimit::Unbounded
    }
}

pub fn trajectory(rng: &mut impl RngCore) -> Trajectory {
    let n = rng.random_range(1..6);
    Trajectory {
        states: (0..=n)
            .map(|_| StampedState {
                t: float(rng),
                state: state(rng),
            })
            .collect(),
        inputs: (0..n)
            .map(|_| ControlInput {
                accel: float(rng),
                steer: float(rng),
                progress_rate: float(rng),
            })
            .collect(),
        objective: float(rng),
        constraints: (0..rng.random_range(0..=n))
            .map(|_| StageConstraints {
                lateral_left: float(rng),
                lateral_right: float(rng),
                longitudinal: float(rng),
                stopping: float(rng),
            })
            .collect(),
    }
}

pub fn snapshot(rng: &mut impl RngCore, depth: u32) -> GraphSnapshot {
    let leaf = depth == 0 || rng.random_bool(0.4);
    GraphSnapshot {
        name: text(rng),
        policy: if leaf {
            Policy::Behavior
        } else if rng.random_bool(0.5) {
            Policy::Priority
        } else {
            Policy::Cost
        },
        applicable: rng.random(),
        active: rng.random(),
        options: if leaf {
            Vec::new()
        } else {
            (0..rng.random_range(1..4)).map(|_| snapshot(rng, depth - 1)).collect()
        },
    }
}

pub fn phase(rng: &mut impl RngCore) -> SessionPhase {
    [
        SessionPhase::Idle,
        SessionPhase::Requested,
        SessionPhase::AwaitingModification,
        SessionPhase::ProposalPending,
        SessionPhase::Executing,
        SessionPhase::Released,
    ][rng.random_range(0..6)]
}

fn state_update(rng: &mut impl RngCore) -> StateUpdate {
    let scn = builtin(if rng.random_bool(0.5) { "A" } else { "B" }).unwrap();
    let route = scn.map.route_path(scn.route).unwrap();
    let mut ego = scn.ego;
    ego.x += rng.random_range(0.0..80.0);
    ego.y += rng.random_range(-1.0..1.0);
    ego.speed = rng.random_range(0.0..8.0);
    let mut environment = perceive(
        &scn.map,
        scn.route,
        &route,
        &scn.obstacles,
        &ego,
        1.0,
        scn.params.d_standoff,
    );
    if rng.random_bool(0.5) {
        environment.active_behavior = Some(text(rng));
    }
    StateUpdate {
        corridor: environment.corridor.clone(),
        environment,
        proposal: rng.random_bool(0.5).then(|| Proposal {
            id: rng.random(),
            trajectory: trajectory(rng),
        }),
        graph: snapshot(rng, 3),
        phase: phase(rng),
    }
}

pub fn payload(rng: &mut impl RngCore) -> Payload {
    match rng.random_range(0..9) {
        0 => Payload::AssistanceRequest(AssistanceRequest {
            reason: text(rng),
            ego: state(rng),
            standstill: float(rng),
        }),
        1 => Payload::StateUpdate(Box::new(state_update(rng))),
        2 => Payload::ModifyConstraints(if rng.random_bool(0.5) {
            Modification::Lateral { polygon: polygon(rng) }
        } else {
            Modification::Longitudinal { stop: stop_limit(rng) }
        }),
        3 => Payload::TrajectoryProposal(Proposal {
            id: rng.random(),
            trajectory: trajectory(rng),
        }),
        4 => Payload::Approval(Approval { proposal: rng.random() }),
        5 => Payload::StopExecution,
        6 => Payload::Handover,
        7 => Payload::PlanningFailed(PlanningFailed { reason: text(rng) }),
        _ => Payload::Ack(Ack {
            seq: rng.random(),
            error: rng.random_bool(0.5).then(|| text(rng)),
        }),
    }
}

pub fn envelope(rng: &mut impl RngCore) -> Envelope {
    Envelope {
        session: rng.random(),
        seq: rng.random(),
        t: float(rng),
        payload: payload(rng),
    }
}

/// A built-in scenario with perturbed obstacles, start and parameters.
pub fn scenario(rng: &mut impl RngCore) -> Scenario {
    let mut scn = builtin(if rng.random_bool(0.5) { "A" } else { "B" }).unwrap();
    for o in &mut scn.obstacles {
        let dx = rng.random_range(-5.0..5.0);
        for p in &mut o.footprint {
            p.x += dx;
        }
        o.label = text(rng);
    }
    scn.ego.y += rng.random_range(-0.5..0.5);
    scn.params.d_standoff = rng.random_range(1.0..10.0);
    scn.params.t_invocation = rng.random_range(1.0..40.0);
    scn.params.tick = [0.05, 0.1, 0.2][rng.random_range(0..3)];
    scn.params.planner.weights.contouring = rng.random_range(0.1..10.0);
    scn
}
