//! Line-delimited JSON run log: one record per tick plus event records.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use teleassist_core::protocol::SessionPhase;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Tick(TickRecord),
    Event(EventRecord),
    End(EndRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub scenario: String,
    pub seed: u64,
    pub tick: f64,
    pub operator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub active: Option<String>,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    /// Projection of the ego position onto the route.
    pub theta: f64,
    /// Signed lateral offset from the route, left positive.
    pub offset: f64,
    pub standstill: f64,
    pub phase: SessionPhase,
    /// Stop limit of the corridor the active behavior plans with.
    pub stop: Option<f64>,
    pub moving_command: bool,
    pub approval_age: Option<f64>,
    /// Lateral constraint value of the ego against the operator-modified
    /// corridor while teleoperation is active and has one.
    pub g_lat: Option<f64>,
    /// Same for the stages of the commanded plan.
    pub g_lat_plan: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Goal,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndRecord {
    pub t: f64,
    pub outcome: Outcome,
    pub ticks: u64,
}

/// In-memory log with an optional streaming sink.
pub struct Timeline {
    records: Vec<Record>,
    sink: Option<Box<dyn Write>>,
}

impl Default for Timeline {
    fn default() -> Self {
        Self::new(None)
    }
}

impl Timeline {
    pub fn new(sink: Option<Box<dyn Write>>) -> Self {
        Self {
            records: Vec::new(),
            sink,
        }
    }

    pub fn push(&mut self, record: Record) -> io::Result<()> {
        if let Some(w) = &mut self.sink {
            serde_json::to_writer(&mut *w, &record)?;
            w.write_all(b"\n")?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn event(&mut self, t: f64, name: impl Into<String>, detail: Option<String>) -> io::Result<()> {
        self.push(Record::Event(EventRecord {
            t,
            name: name.into(),
            detail,
        }))
    }

    pub fn flush(&mut self) -> io::Result<()> {
        match &mut self.sink {
            Some(w) => w.flush(),
            None => Ok(()),
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }
}

pub fn read_log(reader: impl BufRead) -> io::Result<Vec<Record>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}

pub fn ticks(records: &[Record]) -> impl Iterator<Item = &TickRecord> {
    records.iter().filter_map(|r| match r {
        Record::Tick(t) => Some(t),
        _ => None,
    })
}

pub fn events(records: &[Record]) -> impl Iterator<Item = &EventRecord> {
    records.iter().filter_map(|r| match r {
        Record::Event(e) => Some(e),
        _ => None,
    })
}

/// Time of the first event named `name`.
pub fn event_time(records: &[Record], name: &str) -> Option<f64> {
    events(records).find(|e| e.name == name).map(|e| e.t)
}

pub fn outcome(records: &[Record]) -> Option<Outcome> {
    records.iter().rev().find_map(|r| match r {
        Record::End(e) => Some(e.outcome),
        _ => None,
    })
}
