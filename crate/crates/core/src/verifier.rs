//! Safety and liveness monitors over simulator traces. All of them are
//! scheme-agnostic: they only look at what cores observed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::messages::Opcode;
use crate::sim::trace::{Action, Actor, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    MutualExclusion,
    Barrier,
    Semaphore,
    Condvar,
    Termination,
}

impl fmt::Display for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Monitor::MutualExclusion => "mutual_exclusion",
            Monitor::Barrier => "barrier",
            Monitor::Semaphore => "semaphore",
            Monitor::Condvar => "condvar",
            Monitor::Termination => "termination",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub time_ps: u64,
    pub addr: u64,
    pub actors: Vec<Actor>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}ps {:#x} {:?}: {}", self.time_ps, self.addr, self.actors, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub monitor: Monitor,
    /// Number of events or intervals the monitor examined.
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl Verdict {
    fn new(monitor: Monitor) -> Self {
        Verdict {
            monitor,
            checked: 0,
            violations: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn fail(&mut self, time_ps: u64, addr: u64, actors: Vec<Actor>, detail: impl Into<String>) {
        self.violations.push(Violation {
            time_ps,
            addr,
            actors,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "{}: pass ({} checked)", self.monitor, self.checked)
        } else {
            write!(f, "{}: FAIL ({} violations)", self.monitor, self.violations.len())?;
            for v in self.violations.iter().take(5) {
                write!(f, "\n  {v}")?;
            }
            Ok(())
        }
    }
}

/// Every monitor's verdict for one trace.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.verdicts {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn verify_all(trace: &[TraceRecord], expected_ops: u64) -> Report {
    Report {
        verdicts: vec![
            check_mutual_exclusion(trace),
            check_barrier(trace),
            check_semaphore(trace),
            check_condvar(trace),
            check_termination(trace, expected_ops),
        ],
    }
}

fn core_of(r: &TraceRecord) -> Option<usize> {
    match r.actor {
        Actor::Core(g) => Some(g),
        Actor::Se(_) => None,
    }
}

/// Per-core records in emission order.
fn per_core(trace: &[TraceRecord]) -> BTreeMap<usize, Vec<&TraceRecord>> {
    let mut m: BTreeMap<usize, Vec<&TraceRecord>> = BTreeMap::new();
    for r in trace {
        if let Some(g) = core_of(r) {
            m.entry(g).or_default().push(r);
        }
    }
    m
}

pub fn check_mutual_exclusion(trace: &[TraceRecord]) -> Verdict {
    let mut v = Verdict::new(Monitor::MutualExclusion);
    // (lock) -> [(enter, exit, core)]
    let mut intervals: BTreeMap<u64, Vec<(u64, u64, usize)>> = BTreeMap::new();
    let mut open: HashMap<(usize, u64), u64> = HashMap::new();
    for r in trace {
        let Some(g) = core_of(r) else { continue };
        match r.action {
            Action::CsEnter => {
                if open.insert((g, r.addr), r.time_ps).is_some() {
                    v.fail(r.time_ps, r.addr, vec![r.actor], "re-entered a held lock");
                }
            }
            Action::CsExit => match open.remove(&(g, r.addr)) {
                Some(t) => intervals.entry(r.addr).or_default().push((t, r.time_ps, g)),
                None => v.fail(r.time_ps, r.addr, vec![r.actor], "released a lock it did not hold"),
            },
            _ => {}
        }
    }
    // Still held at the end of the trace.
    for (&(g, addr), &t) in &open {
        intervals.entry(addr).or_default().push((t, u64::MAX, g));
    }
    for (addr, mut list) in intervals {
        list.sort_unstable();
        v.checked += list.len();
        for w in list.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.0 < a.1 {
                v.fail(
                    b.0,
                    addr,
                    vec![Actor::Core(a.2), Actor::Core(b.2)],
                    format!(
                        "critical sections overlap: core {} [{}, {}] and core {} [{}, {}]",
                        a.2, a.0, a.1, b.2, b.0, b.1
                    ),
                );
            }
        }
    }
    v
}

/// Assumes each participant joins every episode of a barrier, so a core's
/// n-th arrival belongs to episode n.
pub fn check_barrier(trace: &[TraceRecord]) -> Verdict {
    #[derive(Default)]
    struct Episode {
        arrives: Vec<(u64, usize)>,
        departs: Vec<(u64, usize)>,
        participants: Option<u64>,
    }
    let mut v = Verdict::new(Monitor::Barrier);
    let mut episodes: BTreeMap<(u64, usize), Episode> = BTreeMap::new();
    let mut arrived: HashMap<(usize, u64), usize> = HashMap::new();
    let mut departed: HashMap<(usize, u64), usize> = HashMap::new();
    for r in trace {
        let Some(g) = core_of(r) else { continue };
        match r.action {
            Action::BarrierArrive => {
                let n = arrived.entry((g, r.addr)).or_default();
                let ep = episodes.entry((r.addr, *n)).or_default();
                *n += 1;
                ep.arrives.push((r.time_ps, g));
                match ep.participants {
                    None => ep.participants = Some(r.info),
                    Some(p) if p != r.info => v.fail(
                        r.time_ps,
                        r.addr,
                        vec![r.actor],
                        format!("participant count {} disagrees with {p}", r.info),
                    ),
                    Some(_) => {}
                }
            }
            Action::BarrierDepart => {
                let n = departed.entry((g, r.addr)).or_default();
                episodes.entry((r.addr, *n)).or_default().departs.push((r.time_ps, g));
                *n += 1;
            }
            _ => {}
        }
    }
    for ((addr, n), ep) in episodes {
        v.checked += 1;
        let p = ep.participants.unwrap_or(0) as usize;
        if ep.arrives.len() != p || ep.departs.len() != ep.arrives.len() {
            let t = ep.arrives.iter().chain(&ep.departs).map(|x| x.0).max().unwrap_or(0);
            v.fail(
                t,
                addr,
                Vec::new(),
                format!(
                    "episode {n}: {} arrivals, {} departures, {p} participants",
                    ep.arrives.len(),
                    ep.departs.len()
                ),
            );
        }
        let last_arrive = ep.arrives.iter().max();
        let first_depart = ep.departs.iter().min();
        if let (Some(&(ta, ga)), Some(&(td, gd))) = (last_arrive, first_depart) {
            if td < ta {
                v.fail(
                    td,
                    addr,
                    vec![Actor::Core(gd), Actor::Core(ga)],
                    format!("episode {n}: core {gd} departed at {td} before core {ga} arrived at {ta}"),
                );
            }
        }
    }
    v
}

pub fn check_semaphore(trace: &[TraceRecord]) -> Verdict {
    let mut v = Verdict::new(Monitor::Semaphore);
    // Releases sort before acquires that share a timestamp.
    let mut events: BTreeMap<u64, Vec<(u64, u8, u64, Actor)>> = BTreeMap::new();
    for r in trace {
        let kind = match r.action {
            Action::SemRelease => 0,
            Action::SemAcquire => 1,
            _ => continue,
        };
        events.entry(r.addr).or_default().push((r.time_ps, kind, r.info, r.actor));
    }
    for (addr, mut list) in events {
        list.sort_by_key(|e| (e.0, e.1));
        let mut held: i64 = 0;
        let mut initial: Option<u64> = None;
        for (t, kind, info, actor) in list {
            v.checked += 1;
            match initial {
                None => initial = Some(info),
                Some(i) if i != info => {
                    v.fail(t, addr, vec![actor], format!("initial resources {info} disagree with {i}"));
                }
                Some(_) => {}
            }
            held += if kind == 1 { 1 } else { -1 };
            let cap = initial.unwrap_or(0) as i64;
            if held > cap {
                v.fail(
                    t,
                    addr,
                    vec![actor],
                    format!("{held} units held against {cap} initial resources"),
                );
            }
        }
    }
    v
}

pub fn check_condvar(trace: &[TraceRecord]) -> Verdict {
    let mut v = Verdict::new(Monitor::Condvar);
    for (g, recs) in per_core(trace) {
        let actor = Actor::Core(g);
        let mut sleeping: Option<(u64, u64)> = None;
        let mut i = 0;
        while i < recs.len() {
            let r = recs[i];
            match r.action {
                Action::CondSleep => {
                    v.checked += 1;
                    if sleeping.is_some() {
                        v.fail(r.time_ps, r.addr, vec![actor], "slept twice without waking");
                    }
                    sleeping = Some((r.addr, r.info));
                }
                Action::CondWake => {
                    v.checked += 1;
                    if sleeping != Some((r.addr, r.info)) {
                        v.fail(r.time_ps, r.addr, vec![actor], "woke without a matching sleep");
                    }
                    sleeping = None;
                    let next = recs[i + 1..]
                        .iter()
                        .find(|n| !matches!(n.action, Action::MsgSend | Action::MsgRecv));
                    let relocked = matches!(
                        next,
                        Some(n) if n.action == Action::CsEnter && n.addr == r.info
                    );
                    if !relocked {
                        v.fail(
                            r.time_ps,
                            r.addr,
                            vec![actor],
                            format!("resumed without re-acquiring lock {:#x}", r.info),
                        );
                    }
                }
                _ => {}
            }
            i += 1;
        }
    }
    v
}

fn grants(op: Opcode) -> Option<Action> {
    match op {
        Opcode::LockAcquireLocal => Some(Action::CsEnter),
        Opcode::BarrierWaitLocalWithinUnit | Opcode::BarrierWaitLocalAcrossUnits => {
            Some(Action::BarrierDepart)
        }
        Opcode::SemWaitLocal => Some(Action::SemAcquire),
        Opcode::CondWaitLocal => Some(Action::CondWake),
        _ => None,
    }
}

pub fn check_termination(trace: &[TraceRecord], expected_ops: u64) -> Verdict {
    let mut v = Verdict::new(Monitor::Termination);
    let mut ops = 0;
    for (g, recs) in per_core(trace) {
        let actor = Actor::Core(g);
        let mut pending: Option<(&TraceRecord, Action)> = None;
        let mut done = false;
        for r in recs {
            match r.action {
                Action::Request => {
                    v.checked += 1;
                    if let Some((p, _)) = pending {
                        v.fail(p.time_ps, p.addr, vec![actor], "request never granted");
                    }
                    let op = u8::try_from(r.info).ok().and_then(|i| Opcode::from_index(i).ok());
                    match op.and_then(grants) {
                        Some(want) => pending = Some((r, want)),
                        None => {
                            v.fail(r.time_ps, r.addr, vec![actor], format!("unknown request {}", r.info));
                            pending = None;
                        }
                    }
                }
                a if pending.is_some_and(|(p, want)| want == a && p.addr == r.addr) => {
                    pending = None;
                }
                Action::Done => {
                    done = true;
                    ops += r.info;
                }
                _ => {}
            }
        }
        if let Some((p, _)) = pending {
            v.fail(p.time_ps, p.addr, vec![actor], "request never granted");
        }
        if !done {
            v.fail(0, 0, vec![actor], "core never finished");
        }
    }
    if ops != expected_ops {
        v.fail(0, 0, Vec::new(), format!("{ops} operations completed, {expected_ops} expected"));
    }
    v
}
