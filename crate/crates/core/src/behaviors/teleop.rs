use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::any::Any;

use super::{PlanCache, Situation, TELEOPERATION};
use crate::arbitration::Behavior;
use crate::corridor::{Corridor, ModificationError, StopLimit};
use crate::geometry::Polygon;
use crate::mpcc::MpccConfig;
use crate::protocol::{
    Ack, Approval, AssistanceRequest, Envelope, Modification, Payload, PlanningFailed, Proposal, SessionEvent,
    SessionPhase,
};
use crate::world::{apply_obstacles, Command, EnvironmentModel, ScenarioParams, V_EPS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopConfig {
    pub t_invocation: f64,
    pub t_heartbeat_max: f64,
    pub replan_every: u32,
    pub d_standoff: f64,
    pub planner: MpccConfig,
}

impl From<&ScenarioParams> for TeleopConfig {
    fn from(p: &ScenarioParams) -> Self {
        Self {
            t_invocation: p.t_invocation,
            t_heartbeat_max: p.t_heartbeat_max,
            replan_every: p.replan_every,
            d_standoff: p.d_standoff,
            planner: p.planner,
        }
    }
}

/// Operator-modified corridor: lane corridor unioned with the polygons,
/// obstacles applied on top, then the stop override if any.
pub fn teleop_corridor(
    env: &EnvironmentModel,
    lateral: &[Polygon],
    stop: Option<StopLimit>,
    r_c: f64,
    d_standoff: f64,
) -> Result<Corridor, ModificationError> {
    let mut base = env.lane_corridor.clone();
    for poly in lateral {
        base = base.apply_lateral_modification(&env.route, poly, r_c)?;
    }
    let theta = env.route.project(env.ego.position()).0;
    let mut out = apply_obstacles(&base, &env.route, &env.obstacles, theta, r_c, d_standoff);
    if let Some(stop) = stop {
        out = out.apply_longitudinal_modification(stop, env.route.length())?;
    }
    Ok(out)
}

/// Remote assistance: invoked after a long standstill, holds the vehicle
/// until the operator has modified the constraints and approves a
/// proposal, then drives under the modified corridor while approvals stay
/// fresh. Committed until the operator hands back control.
#[derive(Debug, Clone)]
pub struct TeleopBehavior {
    config: TeleopConfig,
    phase: SessionPhase,
    session: u64,
    pending: Vec<Modification>,
    lateral: Vec<Polygon>,
    stop_override: Option<StopLimit>,
    corridor: Option<Corridor>,
    proposal: Option<Proposal>,
    next_proposal: u64,
    last_approval: Option<f64>,
    approved_once: bool,
    cache: PlanCache,
    outbox: Vec<Payload>,
    rejections: Vec<String>,
}

impl TeleopBehavior {
    pub fn new(config: TeleopConfig) -> Self {
        Self {
            config,
            phase: SessionPhase::Idle,
            session: 0,
            pending: Vec::new(),
            lateral: Vec::new(),
            stop_override: None,
            corridor: None,
            proposal: None,
            next_proposal: 1,
            last_approval: None,
            approved_once: false,
            cache: PlanCache::default(),
            outbox: Vec::new(),
            rejections: Vec::new(),
        }
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    /// Id of the current or last session; zero before the first.
    pub fn session(&self) -> u64 {
        self.session
    }

    pub fn corridor(&self) -> Option<&Corridor> {
        self.corridor.as_ref()
    }

    pub fn proposal(&self) -> Option<&Proposal> {
        self.proposal.as_ref()
    }

    pub fn last_approval(&self) -> Option<f64> {
        self.last_approval
    }

    pub fn approval_fresh(&self, now: f64) -> bool {
        self.last_approval
            .is_some_and(|t| now - t <= self.config.t_heartbeat_max + 1e-9)
    }

    /// Payloads for the operator produced since the last call.
    pub fn take_outbox(&mut self) -> Vec<Payload> {
        core::mem::take(&mut self.outbox)
    }

    /// Operator messages that were refused, with the reason.
    pub fn take_rejections(&mut self) -> Vec<String> {
        core::mem::take(&mut self.rejections)
    }

    fn transition(&mut self, event: SessionEvent) -> Result<(), String> {
        match self.phase.next(event) {
            Ok(p) => {
                self.phase = p;
                Ok(())
            }
            Err(e) => Err(e.to_string()),
        }
    }

    fn reject(&mut self, seq: u64, reason: String) {
        self.rejections.push(format!("seq {seq}: {reason}"));
        self.outbox.push(Payload::Ack(Ack {
            seq,
            error: Some(reason),
        }));
    }

    fn ack(&mut self, seq: u64) {
        self.outbox.push(Payload::Ack(Ack { seq, error: None }));
    }

    /// Consumes operator messages at the start of a tick. Frames from
    /// other sessions must already be filtered out.
    pub fn ingest(&mut self, now: f64, messages: impl IntoIterator<Item = Envelope>) {
        for env in messages {
            let seq = env.seq;
            match env.payload {
                Payload::Ack(_) => {
                    if self.phase == SessionPhase::Requested {
                        let _ = self.transition(SessionEvent::Acknowledge);
                    }
                }
                Payload::ModifyConstraints(m) => {
                    if !self.phase.is_open() {
                        self.reject(
                            seq,
                            format!("no open session for a modification (phase {:?})", self.phase),
                        );
                        continue;
                    }
                    self.pending.push(m);
                    self.ack(seq);
                }
                Payload::Approval(Approval { proposal }) => {
                    let current = self.proposal.as_ref().map(|p| p.id);
                    if current != Some(proposal) {
                        self.reject(seq, format!("approval for proposal {proposal}, current {current:?}"));
                        continue;
                    }
                    let was = self.phase;
                    match self.transition(SessionEvent::Approve) {
                        Ok(()) => {
                            if was == SessionPhase::ProposalPending {
                                self.approved_once = false;
                            }
                            self.last_approval = Some(now);
                        }
                        Err(e) => self.reject(seq, e),
                    }
                }
                Payload::StopExecution => match self.transition(SessionEvent::Stop) {
                    Ok(()) => {
                        self.proposal = None;
                        self.last_approval = None;
                        self.cache.clear();
                        self.ack(seq);
                    }
                    Err(e) => self.reject(seq, e),
                },
                Payload::Handover => match self.transition(SessionEvent::Handover) {
                    Ok(()) => {
                        self.cache.clear();
                        self.ack(seq);
                    }
                    Err(e) => self.reject(seq, e),
                },
                other => self.reject(seq, format!("{} is not an operator message", other.kind())),
            }
        }
    }

    fn fail(&mut self, reason: String) {
        self.outbox.push(Payload::PlanningFailed(PlanningFailed { reason }));
    }

    fn process_modifications(&mut self, s: &Situation) {
        let r_c = self.config.planner.limits.radius;
        for m in core::mem::take(&mut self.pending) {
            if self.transition(SessionEvent::Modify).is_err() {
                continue;
            }
            self.proposal = None;
            self.last_approval = None;
            self.cache.clear();
            let (mut lateral, mut stop) = (self.lateral.clone(), self.stop_override);
            match &m {
                Modification::Lateral { polygon } => lateral.push(polygon.clone()),
                Modification::Longitudinal { stop: s } => stop = Some(*s),
            }
            let corridor = match teleop_corridor(&s.environment, &lateral, stop, r_c, self.config.d_standoff) {
                Ok(c) => c,
                Err(e) => {
                    let _ = self.transition(SessionEvent::PlanningFailed);
                    self.fail(format!("modification rejected: {e}"));
                    continue;
                }
            };
            let mut cache = PlanCache::default();
            match cache.replan(&self.config.planner, s, &corridor) {
                Ok(traj) => {
                    self.lateral = lateral;
                    self.stop_override = stop;
                    self.corridor = Some(corridor);
                    let proposal = Proposal {
                        id: self.next_proposal,
                        trajectory: traj,
                    };
                    self.next_proposal += 1;
                    self.outbox.push(Payload::TrajectoryProposal(proposal.clone()));
                    self.proposal = Some(proposal);
                    let _ = self.transition(SessionEvent::ProposalReady);
                }
                Err(e) => {
                    let _ = self.transition(SessionEvent::PlanningFailed);
                    self.fail(format!("planner: {e}"));
                }
            }
        }
    }
}

impl Behavior<Situation, Command> for TeleopBehavior {
    fn name(&self) -> &str {
        TELEOPERATION
    }

    fn invocation(&self, s: &Situation) -> bool {
        s.ego.speed <= V_EPS && s.standstill_time >= self.config.t_invocation - 1e-9
    }

    fn commitment(&self, _: &Situation) -> bool {
        self.phase.is_open()
    }

    fn command(&mut self, s: &Situation) -> Command {
        self.process_modifications(s);
        if self.phase != SessionPhase::Executing || !self.approval_fresh(s.time) {
            self.cache.clear();
            return Command::Standstill;
        }
        let corridor = self.corridor.clone().expect("executing without a corridor");
        if !self.approved_once {
            // first tick after approval: execute the approved proposal itself
            let approved = self.proposal.as_ref().expect("executing without a proposal");
            self.cache.plan = Some(approved.trajectory.retimed(s.time));
            self.cache.ticks_since = 0;
            self.approved_once = true;
        }
        match self
            .cache
            .command(&self.config.planner, self.config.replan_every, s, &corridor)
        {
            Ok(c) => c,
            Err(e) => {
                let _ = self.transition(SessionEvent::Stop);
                self.proposal = None;
                self.last_approval = None;
                self.fail(format!("planner during execution: {e}"));
                Command::Standstill
            }
        }
    }

    fn gain_control(&mut self, s: &Situation) {
        let next_session = self.session + 1;
        *self = TeleopBehavior {
            session: next_session,
            next_proposal: self.next_proposal,
            ..TeleopBehavior::new(self.config)
        };
        let _ = self.transition(SessionEvent::Request);
        self.outbox.push(Payload::AssistanceRequest(AssistanceRequest {
            reason: "standstill".into(),
            ego: s.ego,
            standstill: s.standstill_time,
        }));
    }

    fn lose_control(&mut self, _: &Situation) {
        if self.phase.is_open() {
            self.phase = SessionPhase::Released;
        }
        self.cache.clear();
        self.pending.clear();
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
