use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::GroundingResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Observe,
    Parse,
    Declarative,
    Imperative,
    Plan,
    StateUpdate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<u64>,
    pub kind: TraceKind,
    pub payload: Value,
}

pub fn write_trace<W: Write>(out: &mut W, events: &[TraceEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

fn field<T: serde::de::DeserializeOwned>(v: &Value, key: &str) -> Option<T> {
    serde_json::from_value(v.get(key)?.clone()).ok()
}

/// Rebuilds every successful grounding result from its stage events.
pub fn reconstruct(events: &[TraceEvent]) -> Vec<GroundingResult> {
    let mut out = Vec::new();
    let mut cur: Option<GroundingResult> = None;
    for e in events {
        let p = &e.payload;
        match e.kind {
            TraceKind::Parse => {
                cur = match (field(p, "utterance"), field(p, "tree"), field(p, "partition")) {
                    (Some(utterance), Some(tree), Some(partition)) => Some(GroundingResult {
                        tick: e.tick,
                        utterance,
                        tree,
                        partition,
                        declarative: Vec::new(),
                        bindings: Vec::new(),
                        imperative: Default::default(),
                        plan: None,
                        updates: Vec::new(),
                        pending: None,
                        beliefs: Vec::new(),
                    }),
                    _ => None,
                };
            }
            TraceKind::Declarative => {
                if let Some(r) = cur.as_mut() {
                    r.declarative = field(p, "declarative").unwrap_or_default();
                    r.bindings = field(p, "bindings").unwrap_or_default();
                }
            }
            TraceKind::Imperative => {
                if let Some(r) = cur.as_mut() {
                    r.imperative = serde_json::from_value(p.clone()).unwrap_or_default();
                }
            }
            TraceKind::Plan => {
                if let Some(r) = cur.as_mut() {
                    r.plan = serde_json::from_value(p.clone()).ok();
                }
            }
            TraceKind::StateUpdate => {
                if p.get("source").and_then(Value::as_str) != Some("utterance") {
                    continue;
                }
                if let Some(mut r) = cur.take() {
                    r.updates = field(p, "updates").unwrap_or_default();
                    r.pending = field(p, "pending");
                    r.beliefs = field(p, "beliefs").unwrap_or_default();
                    out.push(r);
                }
            }
            TraceKind::Observe => {}
        }
    }
    out
}
