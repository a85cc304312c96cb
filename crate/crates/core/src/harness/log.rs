//! JSONL event logs: a header line, records ordered by (tick, module), and
//! a closing verdict record.

use crate::ids::{NodeId, PassengerId, Tick};
use crate::representation::hazards::HazardKind;
use crate::strategic::{AlertRequest, Recipient};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

pub const LOG_FORMAT: u32 = 1;

/// Declaration order is the within-tick log order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Module {
    Plant,
    Perception,
    Representation,
    Operational,
    Tactical,
    Strategic,
    Odd,
    Harness,
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(Value::as_str).unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Command,
    Report,
}

/// A record that travels between levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flow {
    pub kind: FlowKind,
    pub from: Module,
    pub to: Module,
}

impl Flow {
    pub fn command(from: Module, to: Module) -> Self {
        Flow {
            kind: FlowKind::Command,
            from,
            to,
        }
    }

    pub fn report(from: Module, to: Module) -> Self {
        Flow {
            kind: FlowKind::Report,
            from,
            to,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub tick: u64,
    pub module: Module,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<Flow>,
    pub payload: Value,
}

impl Record {
    pub fn new(tick: Tick, module: Module, kind: &str, payload: Value) -> Self {
        Record {
            tick: tick.0,
            module,
            kind: kind.to_string(),
            flow: None,
            payload,
        }
    }

    pub fn with_flow(mut self, flow: Flow) -> Self {
        self.flow = Some(flow);
        self
    }

    /// Records whose content depends on the seed.
    pub fn seed_derived(&self) -> bool {
        self.module == Module::Perception && self.kind == "features"
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Completed,
    Diverted,
    Returned,
    Stopped,
    Rejected,
    /// The horizon ran out first.
    Incomplete,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Completed => 0,
            Outcome::Diverted => 10,
            Outcome::Returned => 11,
            Outcome::Stopped => 12,
            Outcome::Rejected => 13,
            Outcome::Incomplete => 14,
        }
    }
}

/// Control-room stub message, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertMessage {
    pub tick: u64,
    pub recipient: Recipient,
    pub hazard_kind: HazardKind,
    pub subject: PassengerId,
    pub node: NodeId,
}

impl AlertMessage {
    pub fn to_wire(&self) -> String {
        serde_json::to_string(self).expect("alert serializes")
    }

    pub fn from_wire(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Serializes a strategic alert request for the control-room stub.
pub fn emit_alert(req: &AlertRequest, tick: Tick) -> AlertMessage {
    AlertMessage {
        tick: tick.0,
        recipient: req.recipient,
        hazard_kind: req.hazard.kind,
        subject: req.hazard.subject.clone(),
        node: req.node.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InfoLevel {
    Strategic,
    Tactical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Audience {
    Onboard,
    Remote,
    OtherRoadUsers,
}

/// Something made visible to people: the plan to passengers or remote
/// parties, the maneuver to other road users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoOutput {
    pub tick: u64,
    pub level: InfoLevel,
    pub audience: Audience,
    pub code: String,
    pub payload: Value,
}

impl InfoOutput {
    /// Remote parties hear from the strategic level, road users from the
    /// tactical one.
    pub fn audience_allowed(level: InfoLevel, audience: Audience) -> bool {
        match audience {
            Audience::Onboard => true,
            Audience::Remote => level == InfoLevel::Strategic,
            Audience::OtherRoadUsers => level == InfoLevel::Tactical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HazardSummary {
    pub kind: HazardKind,
    pub subject: PassengerId,
    pub max_severity: u8,
    pub first_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Where the vehicle ended up heading, if a mission was accepted.
    pub goal_node: Option<NodeId>,
    pub end_tick: u64,
    pub hazards: Vec<HazardSummary>,
    pub alerts: Vec<AlertMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: u32,
    pub scenario: String,
    pub sha256: String,
    pub seed: u64,
    pub until_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    /// Everything after the header, the verdict record last.
    pub records: Vec<Record>,
    pub verdict: Verdict,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("cannot read log: {0}")]
    Io(#[from] std::io::Error),
    #[error("log format error at line {line}: {message}")]
    Format { line: usize, message: String },
}

impl EventLog {
    pub fn lines(&self) -> impl Iterator<Item = String> + '_ {
        std::iter::once(serde_json::to_string(&self.header).expect("header serializes"))
            .chain(self.records.iter().map(Record::to_line))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in self.lines() {
            s.push_str(&l);
            s.push('\n');
        }
        s
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for l in self.lines() {
            writeln!(f, "{l}")?;
        }
        f.flush()
    }

    pub fn parse(text: &str) -> Result<Self, LogError> {
        Self::read(text.as_bytes())
    }

    pub fn read(r: impl BufRead) -> Result<Self, LogError> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines.next().ok_or(LogError::Format {
            line: 1,
            message: "empty log".into(),
        })?;
        let header: LogHeader = serde_json::from_str(&first?).map_err(|e| LogError::Format {
            line: 1,
            message: format!("bad header: {e}"),
        })?;
        if header.format != LOG_FORMAT {
            return Err(LogError::Format {
                line: 1,
                message: format!("unsupported format {}", header.format),
            });
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let r: Record = serde_json::from_str(&line).map_err(|e| LogError::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(r);
        }
        let last = records.last().ok_or(LogError::Format {
            line: 1,
            message: "no verdict record".into(),
        })?;
        if last.module != Module::Harness || last.kind != "verdict" {
            return Err(LogError::Format {
                line: records.len() + 1,
                message: "log does not end with a verdict".into(),
            });
        }
        let verdict: Verdict = serde_json::from_value(last.payload.clone()).map_err(|e| LogError::Format {
            line: records.len() + 1,
            message: format!("bad verdict: {e}"),
        })?;
        Ok(EventLog {
            header,
            records,
            verdict,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }
}

/// First point where two record streams differ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    /// Index into the record list (0 is the first record after the header).
    pub index: usize,
    pub tick: Option<u64>,
    pub module: Option<Module>,
    pub kind: Option<String>,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "first divergence at record {}", self.index)?;
        if let (Some(t), Some(m), Some(k)) = (self.tick, self.module, &self.kind) {
            write!(f, " (tick {t} ms, {m}, {k})")?;
        }
        Ok(())
    }
}

/// Compares record streams, skipping records `skip` selects on either side.
pub fn compare_records(expected: &[Record], actual: &[Record], skip: impl Fn(&Record) -> bool) -> Option<Divergence> {
    let a: Vec<&Record> = expected.iter().filter(|r| !skip(r)).collect();
    let b: Vec<&Record> = actual.iter().filter(|r| !skip(r)).collect();
    let n = a.len().max(b.len());
    (0..n).find_map(|i| {
        let (x, y) = (a.get(i), b.get(i));
        if x == y {
            return None;
        }
        let at = x.or(y).expect("one side has a record");
        Some(Divergence {
            index: i,
            tick: Some(at.tick),
            module: Some(at.module),
            kind: Some(at.kind.clone()),
            expected: x.map(|r| r.to_line()),
            actual: y.map(|r| r.to_line()),
        })
    })
}
