use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Gen,
    Rank,
    Pop,
    SimDone,
    Retrain,
    FineTune,
    DiscardDup,
    DiscardInvalid,
    Stop,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Gen => "GEN",
            EventKind::Rank => "RANK",
            EventKind::Pop => "POP",
            EventKind::SimDone => "SIM_DONE",
            EventKind::Retrain => "RETRAIN",
            EventKind::FineTune => "FINETUNE",
            EventKind::DiscardDup => "DISCARD_DUP",
            EventKind::DiscardInvalid => "DISCARD_INVALID",
            EventKind::Stop => "STOP",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "GEN" => EventKind::Gen,
            "RANK" => EventKind::Rank,
            "POP" => EventKind::Pop,
            "SIM_DONE" => EventKind::SimDone,
            "RETRAIN" => EventKind::Retrain,
            "FINETUNE" => EventKind::FineTune,
            "DISCARD_DUP" => EventKind::DiscardDup,
            "DISCARD_INVALID" => EventKind::DiscardInvalid,
            "STOP" => EventKind::Stop,
            _ => return Err(format!("unknown event `{s}`")),
        })
    }
}

/// One row of `events.csv`. `detail` is a `;`-separated list of `key=value`
/// pairs and never contains commas.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub clock: f64,
    pub kind: EventKind,
    pub candidate_id: Option<u64>,
    pub model_version: Option<u32>,
    pub generator_version: u32,
    pub detail: String,
}

impl Event {
    /// Value of `key` in the detail field.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.detail
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn get_usize(&self, key: &str) -> Option<usize> {
        self.get(key).and_then(|v| v.parse().ok())
    }
}

pub const EVENTS_HEADER: &str = "clock,event,candidate_id,model_version,generator_version,detail";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn push(&mut self, e: Event) {
        debug_assert!(!e.detail.contains(','));
        self.events.push(e);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.events.len() + 64);
        out.push_str(EVENTS_HEADER);
        out.push('\n');
        for e in &self.events {
            use std::fmt::Write as _;
            let _ = write!(out, "{:.3},{},", e.clock, e.kind);
            if let Some(id) = e.candidate_id {
                let _ = write!(out, "{id}");
            }
            out.push(',');
            if let Some(v) = e.model_version {
                let _ = write!(out, "{v}");
            }
            let _ = writeln!(out, ",{},{}", e.generator_version, e.detail);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        f.write_all(self.to_csv().as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<EventLog> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next() != Some(EVENTS_HEADER) {
            return Err(Error::parse(path, 1, "unexpected events header"));
        }
        let mut events = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let f: Vec<&str> = line.splitn(6, ',').collect();
            if f.len() != 6 {
                return Err(Error::parse(path, lineno, "expected 6 fields"));
            }
            let bad = |m: String| Error::parse(path, lineno, m);
            let opt_u64 = |s: &str| -> Result<Option<u64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|e| bad(format!("{e}")))
                }
            };
            events.push(Event {
                clock: f[0].parse().map_err(|e| bad(format!("clock: {e}")))?,
                kind: f[1].parse().map_err(bad)?,
                candidate_id: opt_u64(f[2])?,
                model_version: opt_u64(f[3])?.map(|v| v as u32),
                generator_version: f[4]
                    .parse()
                    .map_err(|e| bad(format!("generator_version: {e}")))?,
                detail: f[5].to_string(),
            });
        }
        Ok(EventLog { events })
    }
}
