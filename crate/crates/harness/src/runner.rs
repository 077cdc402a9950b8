//! The simulation loop: perception, operator link, arbitration, world step.

use std::io;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use teleassist_core::arbitration::ArbitrationGraph;
use teleassist_core::behaviors::{build_graph, Situation, TeleopBehavior, TELEOPERATION};
use teleassist_core::corridor::Corridor;
use teleassist_core::mpcc::{contouring_error, lateral_constraints, Trajectory};
use teleassist_core::path::ReferencePath;
use teleassist_core::protocol::{
    Ack, DelayConfig, DelayInjector, Envelope, Payload, SessionEvent, SessionTracker, StateUpdate,
};
use teleassist_core::world::{perceive, Command, EnvironmentModel, Scenario, WorldState};

use crate::operator::OperatorLink;
use crate::svg;
use crate::timeline::{EndRecord, Header, Outcome, Record, TickRecord, Timeline, LOG_VERSION};

/// StateUpdate period while a session is open.
pub const STATE_UPDATE_PERIOD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToOperator,
    ToVehicle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub frame: Envelope,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub operator_name: String,
    /// Link delay model; its seed is replaced by `seed`.
    pub network: DelayConfig,
    /// Keep every frame that crosses the link.
    pub transcript: bool,
    pub svg_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            operator_name: "scripted".into(),
            network: DelayConfig::default(),
            transcript: false,
            svg_dir: None,
        }
    }
}

pub struct RunReport {
    pub outcome: Outcome,
    pub log: Vec<Record>,
    pub transcript: Vec<TranscriptEntry>,
}

pub struct Runner<'a> {
    scenario: Scenario,
    route: ReferencePath,
    world: WorldState,
    graph: ArbitrationGraph<Situation, Command>,
    operator: &'a mut dyn OperatorLink,
    options: RunOptions,
    to_operator: DelayInjector<Envelope>,
    to_vehicle: DelayInjector<Envelope>,
    tracker: SessionTracker,
    timeline: Timeline,
    transcript: Vec<TranscriptEntry>,
    active: Option<String>,
    activations: Vec<(String, u32)>,
    next_state_update: f64,
    last_approval_logged: Option<u64>,
    svg_count: u32,
}

impl<'a> Runner<'a> {
    /// Fails only when the scenario's route is unusable.
    pub fn new(
        scenario: Scenario,
        operator: &'a mut dyn OperatorLink,
        options: RunOptions,
        sink: Option<Box<dyn io::Write>>,
    ) -> Result<Self, teleassist_core::path::PathError> {
        let route = scenario.map.route_path(scenario.route)?;
        let world = WorldState::new(scenario.ego, scenario.params.tick);
        let graph = build_graph(&scenario.params);
        let mut up = options.network;
        up.seed = options.seed;
        let mut down = options.network;
        down.seed = options.seed.wrapping_add(1);
        Ok(Self {
            scenario,
            route,
            world,
            graph,
            operator,
            to_operator: DelayInjector::new(down),
            to_vehicle: DelayInjector::new(up),
            options,
            tracker: SessionTracker::new(),
            timeline: Timeline::new(sink),
            transcript: Vec::new(),
            active: None,
            activations: Vec::new(),
            next_state_update: 0.0,
            last_approval_logged: None,
            svg_count: 0,
        })
    }

    fn teleop(&mut self) -> &mut TeleopBehavior {
        self.graph
            .behavior_as::<TeleopBehavior>(TELEOPERATION)
            .expect("graph holds the teleoperation behavior")
    }

    fn perceive(&self) -> EnvironmentModel {
        let p = &self.scenario.params;
        perceive(
            &self.scenario.map,
            self.scenario.route,
            &self.route,
            &self.scenario.obstacles,
            &self.world.ego,
            p.planner.limits.radius,
            p.d_standoff,
        )
    }

    fn send(&mut self, now: f64, payload: Payload) -> io::Result<()> {
        let Some(session) = self.tracker.session() else {
            return Ok(());
        };
        let kind = payload.kind();
        if kind != "state_update" {
            let detail = match &payload {
                Payload::PlanningFailed(p) => Some(p.reason.clone()),
                Payload::Ack(Ack { error: Some(e), .. }) => Some(e.clone()),
                _ => None,
            };
            self.timeline.event(now, format!("vehicle_tx:{kind}"), detail)?;
        }
        let frame = Envelope {
            session,
            seq: self.tracker.next_seq(),
            t: now,
            payload,
        };
        if self.options.transcript {
            self.transcript.push(TranscriptEntry {
                direction: Direction::ToOperator,
                frame: frame.clone(),
            });
        }
        self.to_operator.send(now, frame, false);
        Ok(())
    }

    /// Moves frames across the link and feeds the accepted ones to the
    /// teleoperation behavior.
    fn exchange(&mut self, now: f64) -> io::Result<()> {
        let inbound = self.to_operator.deliver(now);
        let out = self.operator.exchange(now, inbound);
        for frame in out.frames {
            if self.options.transcript {
                self.transcript.push(TranscriptEntry {
                    direction: Direction::ToVehicle,
                    frame: frame.clone(),
                });
            }
            let approval = matches!(frame.payload, Payload::Approval(_));
            if !self.to_vehicle.send(now, frame, approval) {
                self.timeline.event(now, "link_drop:approval", None)?;
            }
        }
        for (_, seq, kind) in out.unknown {
            self.timeline.event(now, "reject:unknown_payload", Some(kind.clone()))?;
            self.send(
                now,
                Payload::Ack(Ack {
                    seq,
                    error: Some(format!("unknown payload kind {kind:?}")),
                }),
            )?;
        }
        let mut accepted = Vec::new();
        for frame in self.to_vehicle.deliver(now) {
            match self.tracker.accept(&frame) {
                Ok(()) => {
                    // heartbeats are logged once per approved proposal
                    let approval = match &frame.payload {
                        Payload::Approval(a) => Some(a.proposal),
                        _ => None,
                    };
                    if approval.is_none() || approval != self.last_approval_logged {
                        let detail = approval.map(|p| format!("proposal {p}"));
                        self.timeline
                            .event(now, format!("vehicle_rx:{}", frame.payload.kind()), detail)?;
                    }
                    self.last_approval_logged = approval.or(self.last_approval_logged);
                    accepted.push(frame);
                }
                Err(e) => self.timeline.event(now, "drop", Some(e.to_string()))?,
            }
        }
        if out.disconnected {
            self.to_vehicle.clear();
            self.timeline.event(now, "disconnect", None)?;
        }
        let teleop = self.teleop();
        teleop.ingest(now, accepted);
        if out.disconnected && teleop.phase().next(SessionEvent::Stop).is_ok() {
            // fail-safe: a lost operator is treated as a stop request
            teleop.ingest(
                now,
                [Envelope {
                    session: teleop.session(),
                    seq: 0,
                    t: now,
                    payload: Payload::StopExecution,
                }],
            );
            // the synthesized frame has no operator to acknowledge to
            teleop.take_outbox();
            self.timeline.event(now, "synthesized:stop_execution", None)?;
        }
        for reason in self.teleop().take_rejections() {
            self.timeline.event(now, "reject", Some(reason))?;
        }
        Ok(())
    }

    /// Largest lateral constraint value against `corridor` over the
    /// commanded plan's stages and over the ego state, in planner terms
    /// (progress state and linearized contouring error).
    fn g_lat(&self, command: &Command, corridor: &Corridor) -> (f64, f64) {
        let r_c = self.scenario.params.planner.limits.radius;
        let g = |s: &teleassist_core::mpcc::VehicleState| {
            let e = contouring_error(s, &self.route);
            let (l, r) = lateral_constraints(e, s.progress, corridor, r_c);
            l.max(r)
        };
        let plan = match command {
            Command::Trajectory(traj) => traj
                .states
                .iter()
                .skip(1)
                .map(|s| g(&s.state))
                .fold(f64::NEG_INFINITY, f64::max),
            Command::Standstill => f64::NEG_INFINITY,
        };
        (plan, g(&self.world.ego))
    }

    fn dump_svg(
        &mut self,
        env: &EnvironmentModel,
        corridor: &Corridor,
        plan: Option<&Trajectory>,
        tag: &str,
    ) -> io::Result<()> {
        let Some(dir) = &self.options.svg_dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir)?;
        let name = format!("{:03}_{tag}.svg", self.svg_count);
        self.svg_count += 1;
        std::fs::write(dir.join(name), svg::render(env, corridor, plan))
    }

    /// One tick. Returns the outcome once the run is over.
    pub fn step(&mut self) -> io::Result<Option<Outcome>> {
        let now = self.world.clock();
        let params = self.scenario.params;
        if self.world.standstill_ticks == 1 && self.world.ticks > 0 {
            self.timeline.event(now, "standstill_onset", None)?;
        }
        let mut environment = self.perceive();
        environment.active_behavior = self.active.clone();
        self.exchange(now)?;

        let situation = Situation {
            time: now,
            ego: self.world.ego,
            standstill_time: self.world.standstill_time(),
            environment,
        };
        let session_before = self.teleop().session();
        let (command, leaf) = match self.graph.evaluate(&situation) {
            Ok((c, path)) => (c, path.leaf().map(str::to_string)),
            Err(_) => {
                self.timeline.event(now, "no_applicable_option", None)?;
                (Command::Standstill, None)
            }
        };
        if leaf != self.active {
            if let Some(name) = &leaf {
                let n = match self.activations.iter_mut().find(|(b, _)| b == name) {
                    Some((_, n)) => {
                        *n += 1;
                        *n
                    }
                    None => {
                        self.activations.push((name.clone(), 1));
                        1
                    }
                };
                self.timeline.event(now, format!("activate:{name}#{n}"), None)?;
            }
            self.active = leaf.clone();
        }
        let session = self.teleop().session();
        if session != session_before {
            self.tracker.open(session);
            self.next_state_update = now;
        }

        // outbound traffic
        let outbox = self.teleop().take_outbox();
        let mut proposal_plan = None;
        for payload in outbox {
            if let Payload::TrajectoryProposal(p) = &payload {
                proposal_plan = Some(p.trajectory.clone());
            }
            self.send(now, payload)?;
        }
        let teleop_corridor = self.teleop().corridor().cloned();
        let phase = self.teleop().phase();
        let active_corridor = match (&leaf, &teleop_corridor) {
            (Some(l), Some(c)) if l == TELEOPERATION => c.clone(),
            _ => situation.environment.corridor.clone(),
        };
        if let Some(plan) = &proposal_plan {
            self.dump_svg(&situation.environment, &active_corridor, Some(plan), "proposal")?;
        }
        if phase.is_open() && now + 1e-9 >= self.next_state_update {
            self.next_state_update += STATE_UPDATE_PERIOD;
            let update = StateUpdate {
                environment: situation.environment.clone(),
                corridor: active_corridor.clone(),
                proposal: self.teleop().proposal().cloned(),
                graph: self.graph.snapshot(),
                phase,
            };
            self.send(now, Payload::StateUpdate(Box::new(update)))?;
        }
        if !phase.is_open() && self.tracker.session().is_some() {
            self.tracker.close();
        }

        // log and advance
        let teleop_active = leaf.as_deref() == Some(TELEOPERATION);
        let (g_lat_plan, g_lat) = match (&teleop_corridor, teleop_active) {
            (Some(c), true) => {
                let (p, e) = self.g_lat(&command, c);
                (p.is_finite().then_some(p), Some(e))
            }
            _ => (None, None),
        };
        let (theta, offset) = self.route.project(self.world.ego.position());
        let approval_age = self.teleop().last_approval().map(|a| now - a);
        let ego = self.world.ego;
        self.timeline.push(Record::Tick(TickRecord {
            t: now,
            active: leaf,
            x: ego.x,
            y: ego.y,
            heading: ego.heading,
            v: ego.speed,
            theta,
            offset,
            standstill: self.world.standstill_time(),
            phase,
            stop: active_corridor.stop().value(),
            moving_command: matches!(command, Command::Trajectory(_)),
            approval_age,
            g_lat,
            g_lat_plan,
        }))?;
        if theta >= params.goal_progress {
            self.dump_svg(&situation.environment, &active_corridor, None, "final")?;
            return Ok(Some(Outcome::Goal));
        }
        if now + 1e-9 >= params.time_limit {
            self.dump_svg(&situation.environment, &active_corridor, None, "final")?;
            return Ok(Some(Outcome::TimeLimit));
        }
        self.world.step(&command);
        Ok(None)
    }

    /// Runs to the goal or the time limit. The log is flushed on every
    /// exit path.
    pub fn run(mut self) -> io::Result<RunReport> {
        self.timeline.push(Record::Header(Header {
            version: LOG_VERSION,
            scenario: self.scenario.name.clone(),
            seed: self.options.seed,
            tick: self.scenario.params.tick,
            operator: self.options.operator_name.clone(),
        }))?;
        let start = Instant::now();
        let tick = Duration::from_secs_f64(self.scenario.params.tick);
        let result = loop {
            match self.step() {
                Ok(Some(outcome)) => break Ok(outcome),
                Ok(None) => {}
                Err(e) => break Err(e),
            }
            if self.operator.realtime() {
                let target = tick * self.world.ticks as u32;
                if let Some(wait) = target.checked_sub(start.elapsed()) {
                    std::thread::sleep(wait);
                }
            }
        };
        let outcome = match result {
            Ok(o) => o,
            Err(e) => {
                let _ = self.timeline.flush();
                return Err(e);
            }
        };
        self.timeline.push(Record::End(EndRecord {
            t: self.world.clock(),
            outcome,
            ticks: self.world.ticks,
        }))?;
        self.timeline.flush()?;
        Ok(RunReport {
            outcome,
            log: self.timeline.into_records(),
            transcript: self.transcript,
        })
    }
}
