//! Operator link that drops, delays, duplicates and finally disconnects,
//! and the checks that must hold whatever it does.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teleassist::files::load_script;
use teleassist::operator::{LinkOutput, OperatorLink, ScriptedOperator};
use teleassist::timeline::{event_time, ticks, Record};
use teleassist::{RunOptions, Runner};
use teleassist_core::behaviors::TELEOPERATION;
use teleassist_core::protocol::Envelope;
use teleassist_core::world::{builtin, V_EPS};

#[derive(Debug, Clone, Copy)]
pub struct Schedule {
    pub drop: f64,
    pub duplicate: f64,
    /// Probability that a frame is held back.
    pub delay: f64,
    /// Longest hold in ticks.
    pub max_hold: u32,
    /// Seconds after the first approval at which the link goes down.
    pub disconnect_after: Option<f64>,
}

impl Schedule {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            drop: rng.random_range(0.0..0.3),
            duplicate: rng.random_range(0.0..0.3),
            delay: rng.random_range(0.0..0.5),
            max_hold: rng.random_range(1..25),
            disconnect_after: rng.random_bool(0.8).then(|| rng.random_range(0.5..8.0)),
        }
    }
}

pub struct Adversary {
    inner: ScriptedOperator,
    schedule: Schedule,
    rng: ChaCha8Rng,
    held: Vec<(f64, Envelope)>,
    first_approval: Option<f64>,
    down: bool,
    pub disconnected_at: Option<f64>,
}

impl Adversary {
    pub fn new(inner: ScriptedOperator, schedule: Schedule, seed: u64) -> Self {
        Self {
            inner,
            schedule,
            rng: ChaCha8Rng::seed_from_u64(seed),
            held: Vec::new(),
            first_approval: None,
            down: false,
            disconnected_at: None,
        }
    }
}

impl OperatorLink for Adversary {
    fn exchange(&mut self, now: f64, inbound: Vec<Envelope>) -> LinkOutput {
        if self.down {
            return LinkOutput::default();
        }
        let out = self.inner.exchange(now, inbound);
        let s = self.schedule;
        for f in out.frames {
            if matches!(f.payload, teleassist_core::protocol::Payload::Approval(_)) && self.first_approval.is_none() {
                self.first_approval = Some(now);
            }
            if self.rng.random_bool(s.drop) {
                continue;
            }
            let copies = if self.rng.random_bool(s.duplicate) { 2 } else { 1 };
            for _ in 0..copies {
                let hold = if self.rng.random_bool(s.delay) {
                    self.rng.random_range(1..=s.max_hold) as f64 * 0.1
                } else {
                    0.0
                };
                self.held.push((now + hold, f.clone()));
            }
        }
        let mut result = LinkOutput {
            unknown: out.unknown,
            ..LinkOutput::default()
        };
        let mut i = 0;
        while i < self.held.len() {
            if self.held[i].0 <= now + 1e-9 {
                result.frames.push(self.held.remove(i).1);
            } else {
                i += 1;
            }
        }
        let cut = match (s.disconnect_after, self.first_approval) {
            (Some(d), Some(a)) => now + 1e-9 >= a + d,
            _ => false,
        };
        if cut || out.disconnected {
            self.down = true;
            self.held.clear();
            self.disconnected_at = Some(now);
            result.disconnected = true;
        }
        result
    }
}

pub struct FailSafeRun {
    pub log: Vec<Record>,
    pub disconnected_at: Option<f64>,
}

pub fn script_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// Scenario A with the bundled script behind an adversarial link. The run
/// ends a few seconds after the disconnect.
pub fn run_adversarial(seed: u64) -> FailSafeRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedule = Schedule::random(&mut rng);
    let mut scn = builtin("A").unwrap();
    scn.params.time_limit = 75.0;
    let script = load_script(&script_path("scenario_a.script.json")).unwrap();
    let mut link = Adversary::new(ScriptedOperator::new(script), schedule, rng.random());
    let options = RunOptions {
        seed,
        ..RunOptions::default()
    };
    let report = Runner::new(scn, &mut link, options, None).unwrap().run().unwrap();
    FailSafeRun {
        log: report.log,
        disconnected_at: link.disconnected_at,
    }
}

/// Motion under teleoperation needs an approval no older than
/// `t_heartbeat_max`; after a disconnect the vehicle is still within
/// `halt_within` seconds and stays still.
pub fn fail_safe_errors(run: &FailSafeRun, t_heartbeat_max: f64, halt_within: f64) -> Result<(), String> {
    let t: Vec<_> = ticks(&run.log).collect();
    for w in t.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.active.as_deref() != Some(TELEOPERATION) {
            continue;
        }
        let moved = (b.x - a.x).hypot(b.y - a.y);
        if moved > 1e-9 {
            match a.approval_age {
                Some(age) if age <= t_heartbeat_max + 1e-9 && a.moving_command => {}
                other => {
                    return Err(format!(
                        "moved {moved:.3e} m at t={:.1} with approval age {other:?}",
                        a.t
                    ))
                }
            }
        }
    }
    if let Some(td) = run.disconnected_at.or_else(|| event_time(&run.log, "disconnect")) {
        let after: Vec<_> = t.iter().filter(|r| r.t >= td - 1e-9).collect();
        let halted = after
            .iter()
            .position(|r| r.v <= V_EPS)
            .ok_or_else(|| format!("never halted after the disconnect at {td:.1}"))?;
        let t_halt = after[halted].t;
        if t_halt - td > halt_within + 1e-9 {
            return Err(format!("halted {:.2} s after the disconnect", t_halt - td));
        }
        if let Some(r) = after[halted..].iter().find(|r| r.v > V_EPS) {
            return Err(format!("moving again at t={:.1} after the disconnect", r.t));
        }
    }
    Ok(())
}
