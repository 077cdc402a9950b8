//! Operator/vehicle message types, the session phase machine and
//! per-direction sequence tracking.

mod delay;

pub use delay::{DelayConfig, DelayInjector};

use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbitration::GraphSnapshot;
use crate::corridor::{Corridor, StopLimit};
use crate::geometry::Polygon;
use crate::mpcc::{Trajectory, VehicleState};
use crate::world::EnvironmentModel;

/// One frame on the wire: `{"session", "seq", "t", "kind", "body"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub session: u64,
    pub seq: u64,
    pub t: f64,
    #[serde(flatten)]
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum Payload {
    AssistanceRequest(AssistanceRequest),
    StateUpdate(alloc::boxed::Box<StateUpdate>),
    ModifyConstraints(Modification),
    TrajectoryProposal(Proposal),
    Approval(Approval),
    StopExecution,
    Handover,
    PlanningFailed(PlanningFailed),
    Ack(Ack),
}

/// Wire names of all payload kinds.
pub const KINDS: [&str; 9] = [
    "assistance_request",
    "state_update",
    "modify_constraints",
    "trajectory_proposal",
    "approval",
    "stop_execution",
    "handover",
    "planning_failed",
    "ack",
];

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::AssistanceRequest(_) => KINDS[0],
            Payload::StateUpdate(_) => KINDS[1],
            Payload::ModifyConstraints(_) => KINDS[2],
            Payload::TrajectoryProposal(_) => KINDS[3],
            Payload::Approval(_) => KINDS[4],
            Payload::StopExecution => KINDS[5],
            Payload::Handover => KINDS[6],
            Payload::PlanningFailed(_) => KINDS[7],
            Payload::Ack(_) => KINDS[8],
        }
    }

    /// Payloads the operator may send.
    pub fn from_operator(&self) -> bool {
        matches!(
            self,
            Payload::ModifyConstraints(_)
                | Payload::Approval(_)
                | Payload::StopExecution
                | Payload::Handover
                | Payload::Ack(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistanceRequest {
    pub reason: String,
    pub ego: VehicleState,
    pub standstill: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateUpdate {
    pub environment: EnvironmentModel,
    /// Corridor the active behavior plans with.
    pub corridor: Corridor,
    pub proposal: Option<Proposal>,
    pub graph: GraphSnapshot,
    pub phase: SessionPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Modification {
    Lateral { polygon: Polygon },
    Longitudinal { stop: StopLimit },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Approval {
    pub proposal: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningFailed {
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Assistance session phases in interaction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Idle,
    Requested,
    AwaitingModification,
    ProposalPending,
    Executing,
    Released,
}

/// Events that drive the session phase machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionEvent {
    Request,
    Acknowledge,
    ProposalReady,
    PlanningFailed,
    Modify,
    Approve,
    Stop,
    Handover,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("event {event:?} is not allowed in phase {phase:?}")]
pub struct IllegalTransition {
    pub phase: SessionPhase,
    pub event: SessionEvent,
}

impl SessionPhase {
    /// Whether an operator session is open.
    pub fn is_open(self) -> bool {
        !matches!(self, SessionPhase::Idle | SessionPhase::Released)
    }

    pub fn next(self, event: SessionEvent) -> Result<SessionPhase, IllegalTransition> {
        use SessionEvent as E;
        use SessionPhase as P;
        let next = match (self, event) {
            (P::Idle | P::Released, E::Request) => P::Requested,
            (P::Requested, E::Acknowledge) => P::AwaitingModification,
            // a modification implies the request was seen
            (P::Requested | P::AwaitingModification | P::ProposalPending | P::Executing, E::Modify) => {
                P::AwaitingModification
            }
            (P::AwaitingModification, E::ProposalReady) => P::ProposalPending,
            (P::AwaitingModification, E::PlanningFailed) => P::AwaitingModification,
            (P::ProposalPending, E::Approve) | (P::Executing, E::Approve) => P::Executing,
            (P::ProposalPending | P::Executing, E::Stop) => P::AwaitingModification,
            (P::Requested | P::AwaitingModification | P::ProposalPending | P::Executing, E::Handover) => P::Released,
            (phase, event) => return Err(IllegalTransition { phase, event }),
        };
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("frame for session {got} while session {expected:?} is open")]
    WrongSession { expected: Option<u64>, got: u64 },
    #[error("sequence {got} not after {last}")]
    OutOfOrder { last: u64, got: u64 },
}

/// Tracks one direction of a session: drops duplicates and reordered
/// frames, hands out outgoing sequence numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionTracker {
    session: Option<u64>,
    last_in: Option<u64>,
    next_out: u64,
}

impl SessionTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn session(&self) -> Option<u64> {
        self.session
    }

    /// Opens a session; sequence numbers restart.
    pub fn open(&mut self, session: u64) {
        self.session = Some(session);
        self.last_in = None;
        self.next_out = 0;
    }

    pub fn close(&mut self) {
        self.session = None;
    }

    pub fn next_seq(&mut self) -> u64 {
        let s = self.next_out;
        self.next_out += 1;
        s
    }

    /// Accepts an inbound frame at most once and in order.
    pub fn accept(&mut self, env: &Envelope) -> Result<(), SequenceError> {
        if self.session != Some(env.session) {
            return Err(SequenceError::WrongSession {
                expected: self.session,
                got: env.session,
            });
        }
        if let Some(last) = self.last_in {
            if env.seq <= last {
                return Err(SequenceError::OutOfOrder { last, got: env.seq });
            }
        }
        self.last_in = Some(env.seq);
        Ok(())
    }
}
