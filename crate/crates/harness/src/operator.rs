//! Operator side of the link: the scripted operator and the trait the
//! runner talks to, shared with the network server.

use serde::{Deserialize, Serialize};
use teleassist_core::protocol::{Ack, Approval, DelayConfig, Envelope, Modification, Payload};

/// Approval heartbeat period.
pub const HEARTBEAT_PERIOD: f64 = 0.1;

/// What the operator side produced during one tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkOutput {
    pub frames: Vec<Envelope>,
    /// Header of frames whose kind could not be decoded, for error Acks.
    pub unknown: Vec<(u64, u64, String)>,
    /// The connection went away during this tick.
    pub disconnected: bool,
}

pub trait OperatorLink {
    /// Hands over the frames that reached the operator side by `now` and
    /// collects what the operator sends back.
    fn exchange(&mut self, now: f64, inbound: Vec<Envelope>) -> LinkOutput;

    /// Whether the runner should pace ticks to the wall clock.
    fn realtime(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Absolute simulation time.
    At(f64),
    /// `delay` seconds after the first frame of `kind` received once the
    /// previous action has fired.
    OnMessage {
        kind: String,
        #[serde(default)]
        delay: f64,
    },
    /// Seconds after the previous action fired.
    AfterPrevious(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Modify(Modification),
    /// Starts the approval heartbeat for the latest proposal seen.
    ApprovalStart,
    ApprovalStop,
    StopExecution,
    Handover,
    /// Drops the connection; nothing is sent afterwards.
    Disconnect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedAction {
    pub trigger: Trigger,
    pub action: Action,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatorScript {
    /// Link delay model; the seed is taken from the run.
    #[serde(default)]
    pub network: DelayConfig,
    #[serde(default)]
    pub actions: Vec<ScriptedAction>,
}

/// Replays an [`OperatorScript`]. Actions fire in order, each at most once.
#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    script: OperatorScript,
    cursor: usize,
    armed_at: f64,
    due: Option<f64>,
    session: u64,
    seq: u64,
    latest_proposal: Option<u64>,
    heartbeat: Option<(u64, f64)>,
    connected: bool,
}

impl ScriptedOperator {
    pub fn new(script: OperatorScript) -> Self {
        Self {
            script,
            cursor: 0,
            armed_at: 0.0,
            due: None,
            session: 0,
            seq: 0,
            latest_proposal: None,
            heartbeat: None,
            connected: true,
        }
    }

    /// Number of actions fired so far.
    pub fn fired(&self) -> usize {
        self.cursor
    }

    fn frame(&mut self, now: f64, payload: Payload) -> Envelope {
        self.seq += 1;
        Envelope {
            session: self.session,
            seq: self.seq,
            t: now,
            payload,
        }
    }

    fn arm(&mut self) {
        self.due = match self.script.actions.get(self.cursor).map(|a| &a.trigger) {
            Some(Trigger::At(t)) => Some(*t),
            Some(Trigger::AfterPrevious(d)) => Some(self.armed_at + d),
            _ => None,
        };
    }
}

impl OperatorLink for ScriptedOperator {
    fn exchange(&mut self, now: f64, inbound: Vec<Envelope>) -> LinkOutput {
        let mut out = LinkOutput::default();
        if !self.connected {
            return out;
        }
        if self.cursor == 0 && self.due.is_none() {
            self.arm();
        }
        for env in inbound {
            match &env.payload {
                Payload::AssistanceRequest(_) => {
                    self.session = env.session;
                    self.seq = 0;
                    self.latest_proposal = None;
                    self.heartbeat = None;
                    let ack = self.frame(
                        now,
                        Payload::Ack(Ack {
                            seq: env.seq,
                            error: None,
                        }),
                    );
                    out.frames.push(ack);
                }
                Payload::TrajectoryProposal(p) => self.latest_proposal = Some(p.id),
                _ => {}
            }
            if self.due.is_none() {
                if let Some(ScriptedAction {
                    trigger: Trigger::OnMessage { kind, delay },
                    ..
                }) = self.script.actions.get(self.cursor)
                {
                    if env.payload.kind() == kind {
                        self.due = Some(now + delay);
                    }
                }
            }
        }
        while let Some(due) = self.due {
            if now + 1e-9 < due {
                break;
            }
            let action = self.script.actions[self.cursor].action.clone();
            self.cursor += 1;
            self.armed_at = now;
            match action {
                Action::Modify(m) => {
                    let f = self.frame(now, Payload::ModifyConstraints(m));
                    out.frames.push(f);
                }
                Action::ApprovalStart => self.heartbeat = Some((self.latest_proposal.unwrap_or(0), now)),
                Action::ApprovalStop => self.heartbeat = None,
                Action::StopExecution => {
                    self.heartbeat = None;
                    let f = self.frame(now, Payload::StopExecution);
                    out.frames.push(f);
                }
                Action::Handover => {
                    self.heartbeat = None;
                    let f = self.frame(now, Payload::Handover);
                    out.frames.push(f);
                }
                Action::Disconnect => {
                    self.connected = false;
                    self.heartbeat = None;
                    out.frames.clear();
                    out.disconnected = true;
                    return out;
                }
            }
            self.arm();
        }
        if let Some((proposal, next)) = self.heartbeat {
            if now + 1e-9 >= next {
                let f = self.frame(now, Payload::Approval(Approval { proposal }));
                out.frames.push(f);
                self.heartbeat = Some((proposal, next + HEARTBEAT_PERIOD));
            }
        }
        out
    }
}
