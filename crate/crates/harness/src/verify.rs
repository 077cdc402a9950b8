//! Checks a timeline log against an expectation file: behavior order,
//! gaps between events and the run outcome.

use serde::{Deserialize, Serialize};

use crate::timeline::{event_time, outcome, ticks, Outcome, Record};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub from: String,
    pub to: String,
    pub seconds: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventWindow {
    pub event: String,
    pub at: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    /// Active behaviors in order of activation, repeats collapsed.
    #[serde(default)]
    pub behaviors: Vec<String>,
    /// Events that must occur in this order.
    #[serde(default)]
    pub order: Vec<String>,
    #[serde(default)]
    pub gaps: Vec<Gap>,
    #[serde(default)]
    pub windows: Vec<EventWindow>,
    /// Events that must not occur.
    #[serde(default)]
    pub absent: Vec<String>,
    #[serde(default)]
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{} {}: {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        s
    }
}

/// Behavior sequence from the tick records, repeats collapsed.
pub fn behavior_sequence(log: &[Record]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in ticks(log) {
        if let Some(a) = &t.active {
            if out.last() != Some(a) {
                out.push(a.clone());
            }
        }
    }
    out
}

pub fn verify(log: &[Record], exp: &Expectation) -> VerifyReport {
    let mut checks = Vec::new();
    let mut check = |name: String, pass: bool, detail: String| checks.push(Check { name, pass, detail });

    if !exp.behaviors.is_empty() {
        let seq = behavior_sequence(log);
        check(
            "behaviors".into(),
            seq == exp.behaviors,
            format!("observed {}", seq.join(" -> ")),
        );
    }
    if !exp.order.is_empty() {
        let times: Vec<Option<f64>> = exp.order.iter().map(|e| event_time(log, e)).collect();
        let missing: Vec<&str> = exp
            .order
            .iter()
            .zip(&times)
            .filter(|(_, t)| t.is_none())
            .map(|(e, _)| e.as_str())
            .collect();
        let ordered = missing.is_empty() && times.windows(2).all(|w| w[0] <= w[1]);
        let detail = if missing.is_empty() {
            format!("{times:?}")
        } else {
            format!("missing {}", missing.join(", "))
        };
        check("order".into(), ordered, detail);
    }
    for g in &exp.gaps {
        let name = format!("gap {} -> {}", g.from, g.to);
        match (event_time(log, &g.from), event_time(log, &g.to)) {
            (Some(a), Some(b)) => {
                let d = b - a;
                check(
                    name,
                    (d - g.seconds).abs() <= g.tolerance + 1e-9,
                    format!("{d:.3} s, expected {} +- {}", g.seconds, g.tolerance),
                );
            }
            (a, b) => check(name, false, format!("event times {a:?} {b:?}")),
        }
    }
    for w in &exp.windows {
        let name = format!("window {}", w.event);
        match event_time(log, &w.event) {
            Some(t) => check(
                name,
                (t - w.at).abs() <= w.tolerance + 1e-9,
                format!("at {t:.3} s, expected {} +- {}", w.at, w.tolerance),
            ),
            None => check(name, false, "event missing".into()),
        }
    }
    for a in &exp.absent {
        let t = event_time(log, a);
        check(format!("absent {a}"), t.is_none(), format!("{t:?}"));
    }
    if let Some(o) = exp.outcome {
        let got = outcome(log);
        check("outcome".into(), got == Some(o), format!("{got:?}"));
    }
    VerifyReport { checks }
}
