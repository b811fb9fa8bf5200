//! Trace records emitted by the simulator and consumed by the verifier.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    /// Global core index.
    Core(usize),
    /// Synchronization coordinator (SE, server core, or the ideal arbiter).
    Se(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// A blocking synchronization request was issued (`info` = opcode).
    Request,
    CsEnter,
    CsExit,
    BarrierArrive,
    BarrierDepart,
    SemAcquire,
    SemRelease,
    CondSleep,
    CondWake,
    MsgSend,
    MsgRecv,
    MemOp,
    StReserve,
    StRelease,
    /// A core finished its program (`info` = completed operations).
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_ps: u64,
    pub actor: Actor,
    pub action: Action,
    pub addr: u64,
    /// Action-specific: participant count, initial resources, associated
    /// lock, opcode, or bytes.
    pub info: u64,
}

impl TraceRecord {
    pub fn new(time_ps: u64, actor: Actor, action: Action, addr: u64, info: u64) -> Self {
        TraceRecord {
            time_ps,
            actor,
            action,
            addr,
            info,
        }
    }
}

/// Writes one JSON object per line.
pub fn to_jsonl(records: &[TraceRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        s.push('\n');
    }
    s
}

pub fn from_jsonl(text: &str) -> Result<Vec<TraceRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let rs = vec![
            TraceRecord::new(5, Actor::Core(3), Action::CsEnter, 0x40, 0),
            TraceRecord::new(9, Actor::Se(1), Action::StReserve, 0x48, 7),
        ];
        let text = to_jsonl(&rs);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(from_jsonl(&text).unwrap(), rs);
    }
}
