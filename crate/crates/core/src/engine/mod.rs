//! The Synchronization Engine: message dispatch following the SE control
//! flow (ST lookup, indexing-counter check, reservation or overflow), and the
//! per-primitive protocol handlers.
//!
//! The same state machine also drives the server-core baselines: `Hier`
//! runs it in hierarchical mode over an unbounded table, `Central` and
//! `Ideal` run it in flat mode with a single coordinator.

mod barrier;
mod condvar;
mod lock;
mod semaphore;
pub mod state;

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::error::ProtocolError;
use crate::messages::{classify_opcode, pack_core, unpack_core, Level, Message, OpClass, Opcode, Primitive};
pub use crate::sim::latency::MemOpKind;
use crate::sync_table::{IndexingCounters, Reserve, SynchronizationTable};
use crate::topology::{master_se_of, CoreId, SystemConfig};

pub use state::{SyncronVar, VarState, Who, SYNCRONVAR_BYTES};
use state::{bit, ensure_len, BarrierKind};

/// Set in a lock acquire's info field when the acquisition resumes a
/// condition-variable waiter; the eventual grant is delivered as
/// `cond_grant_local`.
pub const RESUME: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Cores talk to their local coordinator, which aggregates towards the
    /// variable's master.
    Hierarchical,
    /// Cores talk to the coordinator that owns the variable directly.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backing {
    /// Fixed-size ST with memory fallback.
    Table,
    /// Unbounded state (server cores keep variables in their memory
    /// hierarchy; costs are charged by the caller from `touched`).
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasterMap {
    /// Master is the SE of the unit homing the address.
    ByAddress,
    /// A single coordinator masters everything.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Dest {
    Core(CoreId),
    Se(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sender {
    Core(CoreId),
    Se(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MemOp {
    pub kind: MemOpKind,
    pub addr: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EngineEvent {
    StReserve(u64),
    StRelease(u64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HandlerOutput {
    pub outgoing: Vec<(Dest, Message)>,
    /// syncronVar traffic issued by this SE to its local memory.
    pub memory_ops: Vec<MemOp>,
    /// Variables whose state was read and updated while serving the message.
    pub touched: Vec<u64>,
    pub events: Vec<EngineEvent>,
    /// The message came from a core (counts towards the request total).
    pub core_request: bool,
    /// The request was served through the overflow path.
    pub overflowed: bool,
}

impl HandlerOutput {
    /// Cores whose blocking request completes with this output.
    pub fn wakeups(&self) -> Vec<CoreId> {
        self.outgoing
            .iter()
            .filter_map(|(d, m)| match (d, m.class()) {
                (Dest::Core(c), OpClass::Grant | OpClass::Depart) => Some(*c),
                _ => None,
            })
            .collect()
    }

    fn send(&mut self, dest: Dest, m: Message) {
        self.outgoing.push((dest, m));
    }
}

/// Bounded SPU buffer. Messages that find it full stay queued in the network
/// (counted as stalls) and enter in arrival order as slots free up.
#[derive(Debug, Clone)]
pub struct Inbox<T> {
    depth: usize,
    queue: VecDeque<T>,
    backlog: VecDeque<T>,
    pub stalls: u64,
}

impl<T> Inbox<T> {
    pub fn new(depth: usize) -> Self {
        Inbox {
            depth,
            queue: VecDeque::new(),
            backlog: VecDeque::new(),
            stalls: 0,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.queue.len() < self.depth && self.backlog.is_empty() {
            self.queue.push_back(item);
        } else {
            self.stalls += 1;
            self.backlog.push_back(item);
        }
    }

    pub fn pop(&mut self) -> Option<T> {
        let item = self.queue.pop_front();
        if self.queue.len() < self.depth {
            if let Some(b) = self.backlog.pop_front() {
                self.queue.push_back(b);
            }
        }
        item
    }

    pub fn len(&self) -> usize {
        self.queue.len() + self.backlog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn buffered(&self) -> usize {
        self.queue.len()
    }
}

/// One synchronization coordinator: an SE, or a server core under the
/// baseline schemes.
#[derive(Debug, Clone)]
pub struct SEState {
    pub id: usize,
    pub unit: usize,
    pub mode: Mode,
    pub backing: Backing,
    pub master_map: MasterMap,
    cfg: SystemConfig,
    pub table: SynchronizationTable<VarState>,
    pub counters: IndexingCounters,
    pub memory: BTreeMap<u64, SyncronVar>,
    pub inbox: Inbox<(Sender, Message)>,
}

/// Destination of a core's request under flat routing: the Master SE.
pub fn flat_route(core: CoreId, m: &Message, cfg: &SystemConfig) -> Result<usize, crate::error::ConfigError> {
    let _ = core;
    master_se_of(m.addr, cfg)
}

impl SEState {
    /// A SynCron SE (hierarchical) or flat-variant SE for unit `unit`.
    pub fn new(unit: usize, mode: Mode, cfg: &SystemConfig) -> Self {
        SEState {
            id: unit,
            unit,
            mode,
            backing: Backing::Table,
            master_map: MasterMap::ByAddress,
            cfg: cfg.clone(),
            table: SynchronizationTable::new(cfg.st_entries),
            counters: IndexingCounters::new(cfg.num_index_counters),
            memory: BTreeMap::new(),
            inbox: Inbox::new(cfg.inbox_depth),
        }
    }

    /// A coordinator with unbounded state (server core or ideal arbiter).
    pub fn unbounded(unit: usize, mode: Mode, master_map: MasterMap, cfg: &SystemConfig) -> Self {
        SEState {
            backing: Backing::Unbounded,
            master_map,
            table: SynchronizationTable::unbounded(),
            ..SEState::new(unit, mode, cfg)
        }
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn master_of(&self, addr: u64) -> usize {
        match self.master_map {
            MasterMap::Fixed(s) => s,
            MasterMap::ByAddress => (addr / self.cfg.unit_mem_bytes) as usize,
        }
    }

    pub fn is_master(&self, addr: u64) -> bool {
        self.master_of(addr) == self.id
    }

    fn units(&self) -> usize {
        self.cfg.num_units
    }

    fn err(&self, m: &Message, reason: impl Into<String>) -> ProtocolError {
        ProtocolError {
            se: self.id,
            addr: m.addr,
            opcode: m.opcode,
            reason: reason.into(),
        }
    }

    fn core(&self, unit: usize, local: usize) -> Dest {
        Dest::Core(CoreId::new(unit, local))
    }

    fn msg(&self, addr: u64, opcode: Opcode, core_id: u8, info: u64) -> Message {
        Message::new(addr, opcode, core_id, info)
    }

    fn pack(&self, unit: usize, local: usize) -> u8 {
        pack_core(unit, local, self.cfg.cores_per_unit)
    }

    /// Serves one message (Fig.-6 control flow). `now` is only used for
    /// error context by callers; the handler itself is time-independent.
    pub fn handle_message(&mut self, from: Sender, m: Message, _now: u64) -> Result<HandlerOutput, ProtocolError> {
        let mut out = HandlerOutput {
            core_request: matches!(from, Sender::Core(_)),
            ..HandlerOutput::default()
        };
        self.dispatch(from, m, &mut out)?;
        Ok(out)
    }

    fn dispatch(&mut self, from: Sender, m: Message, out: &mut HandlerOutput) -> Result<(), ProtocolError> {
        use Opcode::*;
        if m.opcode == DecreaseIndexingCounter {
            return self
                .counters
                .sub(m.addr, m.info)
                .map(|_| ())
                .map_err(|e| self.err(&m, e.to_string()));
        }
        let master = self.is_master(m.addr);
        if !master {
            if self.mode == Mode::Flat {
                return Err(self.err(&m, "flat routing delivered a request to a non-master SE"));
            }
            if m.opcode.level() == Level::Overflow && classify_opcode(m.opcode) == OpClass::OverflowGrant {
                return self.relay_overflow_reply(m, out);
            }
            if matches!(
                m.opcode,
                LockGrantGlobal | BarrierDepartGlobal | SemGrantGlobal | CondGrantGlobal | CondBroadGlobal
            ) {
                let Some(slot) = self.table.lookup(m.addr) else {
                    return Err(self.err(&m, "reply from master for a variable with no ST entry"));
                };
                return self.run_resident(slot, from, None, m, out);
            }
            let Sender::Core(core) = from else {
                return Err(self.err(&m, "SE-to-SE request sent to a non-master SE"));
            };
            return self.local_request(core, m, out);
        }

        let who = self.requester(from, &m)?;
        if m.opcode.level() == Level::Overflow {
            out.overflowed |= out.core_request;
        }
        match self.table.lookup(m.addr) {
            Some(slot) => self.run_resident(slot, from, Some(who), m, out),
            None => {
                if self.backing == Backing::Unbounded || (self.counters.get(m.addr) == 0 && !self.table.is_full()) {
                    let slot = self.reserve(m.addr, &m, out)?;
                    if let Some(var) = self.memory.remove(&m.addr) {
                        out.memory_ops.push(MemOp {
                            kind: MemOpKind::Read,
                            addr: m.addr,
                            bytes: SYNCRONVAR_BYTES,
                        });
                        self.table.entry_mut(slot).ext = var.state;
                    }
                    self.run_resident(slot, from, Some(who), m, out)
                } else {
                    self.run_memory(who, m, out)
                }
            }
        }
    }

    /// Identifies the requester of a message arriving at the variable's
    /// master.
    fn requester(&self, from: Sender, m: &Message) -> Result<Who, ProtocolError> {
        match from {
            Sender::Core(c) => {
                if c.unit == self.unit {
                    Ok(Who::Own(c.local))
                } else if self.mode == Mode::Flat {
                    Ok(Who::Remote {
                        unit: c.unit,
                        local: c.local,
                    })
                } else {
                    Err(self.err(m, format!("core {c} bypassed its local SE")))
                }
            }
            Sender::Se(s) => match m.opcode.level() {
                Level::Overflow => {
                    let (unit, local) = unpack_core(m.core_id, self.cfg.cores_per_unit);
                    if unit != s {
                        return Err(self.err(m, "overflow message core id does not match sender SE"));
                    }
                    Ok(Who::Remote { unit, local })
                }
                Level::Global
                    if m.opcode == Opcode::BarrierWaitGlobal && m.info != self.cfg.total_clients() as u64 =>
                {
                    let (unit, local) = unpack_core(m.core_id, self.cfg.cores_per_unit);
                    Ok(Who::Remote { unit, local })
                }
                Level::Global => Ok(Who::Se(s)),
                _ => Err(self.err(m, "unexpected SE-to-SE opcode")),
            },
        }
    }

    fn reserve(&mut self, addr: u64, m: &Message, out: &mut HandlerOutput) -> Result<usize, ProtocolError> {
        match self.table.reserve(addr).map_err(|e| self.err(m, e.to_string()))? {
            Reserve::Slot(i) => {
                out.events.push(EngineEvent::StReserve(addr));
                Ok(i)
            }
            Reserve::Full => Err(self.err(m, "reserve on a full table")),
        }
    }

    /// A core request at a non-master SE in hierarchical mode.
    fn local_request(&mut self, core: CoreId, m: Message, out: &mut HandlerOutput) -> Result<(), ProtocolError> {
        use Opcode::*;
        let resident = self.table.lookup(m.addr);
        let overflowed_here = resident.is_none() && self.counters.get(m.addr) > 0;

        // Requests that need no local state are forwarded as they are.
        let stateless = match m.opcode {
            SemPostLocal => Some((SemPostGlobal, semaphore::pack(m.info, 1))),
            CondSignalLocal => Some((CondSignalGlobal, m.info)),
            CondBroadLocal => Some((CondBroadGlobal, m.info)),
            BarrierWaitLocalAcrossUnits if m.info != self.cfg.total_clients() as u64 => {
                let fwd = self.msg(m.addr, BarrierWaitGlobal, self.pack(core.unit, core.local), m.info);
                out.send(Dest::Se(self.master_of(m.addr)), fwd);
                return Ok(());
            }
            _ => None,
        };
        if let Some((global_op, info)) = stateless {
            let master = Dest::Se(self.master_of(m.addr));
            let fwd = if overflowed_here {
                let ov = m.opcode.overflow_variant().expect("local opcode");
                self.msg(m.addr, ov, self.pack(core.unit, core.local), info)
            } else {
                self.msg(m.addr, global_op, self.id as u8, info)
            };
            out.send(master, fwd);
            return Ok(());
        }

        if let Some(slot) = resident {
            return self.run_resident(slot, Sender::Core(core), None, m, out);
        }
        let must_overflow = m.opcode == LockReleaseLocal
            || self.backing == Backing::Table && (self.counters.get(m.addr) > 0 || self.table.is_full());
        if m.opcode == LockReleaseLocal && self.counters.get(m.addr) == 0 {
            return Err(self.err(&m, "release of a lock this SE does not track"));
        }
        if !must_overflow {
            let slot = self.reserve(m.addr, &m, out)?;
            return self.run_resident(slot, Sender::Core(core), None, m, out);
        }

        // Redirect to the master with the overflow opcodes.
        if out.core_request {
            out.overflowed = true;
        }
        let Some(ov) = m.opcode.overflow_variant() else {
            return Err(self.err(&m, "opcode has no overflow form"));
        };
        let info = match m.opcode {
            SemWaitLocal => semaphore::pack(m.info, 1),
            _ => m.info,
        };
        let fwd = self.msg(m.addr, ov, self.pack(core.unit, core.local), info);
        if classify_opcode(ov) == OpClass::OverflowAcquire {
            self.counters.inc(m.addr);
        }
        out.send(Dest::Se(self.master_of(m.addr)), fwd);
        if m.opcode == CondWaitLocal {
            // Registered with the master before the lock is let go.
            let release = self.msg(m.info, LockReleaseLocal, core.local as u8, 0);
            self.dispatch(Sender::Core(core), release, out)?;
        }
        Ok(())
    }

    /// An overflow reply from the master, routed through this SE to one of
    /// its cores.
    fn relay_overflow_reply(&mut self, m: Message, out: &mut HandlerOutput) -> Result<(), ProtocolError> {
        use Opcode::*;
        let (unit, local) = unpack_core(m.core_id, self.cfg.cores_per_unit);
        if unit != self.unit {
            return Err(self.err(&m, "overflow reply for a core of another unit"));
        }
        let dest = self.core(unit, local);
        match m.opcode {
            LockGrantOverflow => {
                let op = if m.info & RESUME != 0 { CondGrantLocal } else { LockGrantLocal };
                out.send(dest, self.msg(m.addr, op, local as u8, 0));
            }
            BarrierDepartureOverflow => out.send(dest, self.msg(m.addr, BarrierDepartLocal, local as u8, 0)),
            SemGrantOverflow => out.send(dest, self.msg(m.addr, SemGrantLocal, local as u8, 1)),
            CondGrantOverflow => {
                let acq = self.msg(m.info, LockAcquireLocal, local as u8, RESUME);
                self.dispatch(Sender::Core(CoreId::new(unit, local)), acq, out)?;
            }
            _ => return Err(self.err(&m, "not an overflow reply")),
        }
        Ok(())
    }

    fn run_resident(
        &mut self,
        slot: usize,
        from: Sender,
        who: Option<Who>,
        m: Message,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        out.touched.push(m.addr);
        let mut st = std::mem::take(&mut self.table.entry_mut(slot).ext);
        let result = match who {
            Some(who) => self.master_apply(&mut st, who, m, out),
            None => self.local_apply(&mut st, from, m, out),
        };
        let master = who.is_some();
        if master && st.lists_empty() {
            self.send_decreases(&mut st, m.addr, out);
        }
        let idle = Self::is_idle(&st, master);
        let entry = self.table.entry_mut(slot);
        entry.ext = st;
        VarState::project_into(entry);
        result?;
        if idle {
            self.table
                .release(m.addr)
                .map_err(|e| self.err(&m, e.to_string()))?;
            out.events.push(EngineEvent::StRelease(m.addr));
        }
        Ok(())
    }

    /// Master-side processing of a variable whose state lives in memory.
    fn run_memory(&mut self, who: Who, m: Message, out: &mut HandlerOutput) -> Result<(), ProtocolError> {
        let units = self.units();
        let mut var = self.memory.remove(&m.addr).unwrap_or_else(|| SyncronVar::new(units));
        out.overflowed |= out.core_request;
        out.touched.push(m.addr);
        out.memory_ops.push(MemOp {
            kind: MemOpKind::Read,
            addr: m.addr,
            bytes: SYNCRONVAR_BYTES,
        });
        if !var.active {
            self.counters.inc(m.addr);
            var.active = true;
        }
        let mut st = std::mem::take(&mut var.state);
        let result = self.master_apply(&mut st, who, m, out);
        if st.lists_empty() {
            self.send_decreases(&mut st, m.addr, out);
            if var.active {
                self.counters
                    .dec(m.addr)
                    .map_err(|e| self.err(&m, e.to_string()))?;
                var.active = false;
            }
        }
        let idle = Self::is_idle(&st, true);
        var.state = st;
        var.project(self.unit, self.cfg.cores_per_unit);
        out.memory_ops.push(MemOp {
            kind: MemOpKind::Write,
            addr: m.addr,
            bytes: SYNCRONVAR_BYTES,
        });
        if !idle || var.active {
            self.memory.insert(m.addr, var);
        }
        result
    }

    fn send_decreases(&mut self, st: &mut VarState, addr: u64, out: &mut HandlerOutput) {
        let mut bits = st.overflow_info;
        while bits != 0 {
            let s = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let n = st.overflow_counts.get(s).copied().unwrap_or(0);
            if n > 0 {
                out.send(
                    Dest::Se(s),
                    self.msg(addr, Opcode::DecreaseIndexingCounter, self.id as u8, n),
                );
            }
        }
        st.overflow_info = 0;
        st.overflow_counts.clear();
    }

    fn is_idle(st: &VarState, master: bool) -> bool {
        match st.prim {
            None => true,
            Some(Primitive::Lock) => {
                if master {
                    st.lists_empty() && st.owner().is_none()
                } else {
                    st.own == 0 && !st.has_rights && !st.requested
                }
            }
            Some(Primitive::Barrier) => st.lists_empty() && st.info == 0 && !st.requested,
            Some(Primitive::Semaphore) => {
                if master {
                    st.lists_empty() && st.initial.is_none_or(|i| st.info == i)
                } else {
                    st.own == 0 && st.pending == 0
                }
            }
            Some(Primitive::CondVar) => st.lists_empty() && !st.requested,
        }
    }

    /// Sets the primitive of a fresh record, or checks it matches.
    fn init_prim(&self, st: &mut VarState, prim: Primitive, m: &Message) -> Result<(), ProtocolError> {
        match st.prim {
            None => {
                st.prim = Some(prim);
                st.info = if prim == Primitive::Lock {
                    crate::sync_table::NO_OWNER
                } else {
                    0
                };
                Ok(())
            }
            Some(p) if p == prim => Ok(()),
            Some(p) => Err(self.err(m, format!("variable already used as {p:?}"))),
        }
    }

    fn master_apply(&mut self, st: &mut VarState, who: Who, m: Message, out: &mut HandlerOutput) -> Result<(), ProtocolError> {
        if m.opcode.level() == Level::Overflow {
            if let Who::Remote { unit, .. } = who {
                st.overflow_info |= bit(unit);
                if classify_opcode(m.opcode) == OpClass::OverflowAcquire {
                    ensure_len(&mut st.overflow_counts, self.units());
                    st.overflow_counts[unit] += 1;
                }
            }
        }
        let prim = m.opcode.primitive().ok_or_else(|| self.err(&m, "control opcode"))?;
        self.init_prim(st, prim, &m)?;
        match prim {
            Primitive::Lock => self.lock_master(st, who, m, out),
            Primitive::Barrier => self.barrier_master(st, who, m, out),
            Primitive::Semaphore => self.sem_master(st, who, m, out),
            Primitive::CondVar => self.cond_master(st, who, m, out),
        }
    }

    fn local_apply(&mut self, st: &mut VarState, from: Sender, m: Message, out: &mut HandlerOutput) -> Result<(), ProtocolError> {
        let prim = m.opcode.primitive().ok_or_else(|| self.err(&m, "control opcode"))?;
        self.init_prim(st, prim, &m)?;
        match prim {
            Primitive::Lock => self.lock_local(st, from, m, out),
            Primitive::Barrier => self.barrier_local(st, from, m, out),
            Primitive::Semaphore => self.sem_local(st, from, m, out),
            Primitive::CondVar => self.cond_local(st, from, m, out),
        }
    }

    /// Next requester to serve. Hierarchical: own cores first (ascending
    /// local id), then other units by ascending SE id. Flat: round-robin
    /// over global core indices starting after the previous grantee.
    fn pick(&self, st: &VarState) -> Option<Who> {
        match self.mode {
            Mode::Hierarchical => {
                if let Some(c) = state::lowest(st.own) {
                    return Some(Who::Own(c));
                }
                (0..self.units()).find_map(|u| {
                    if st.se_level & bit(u) != 0 {
                        Some(Who::Se(u))
                    } else {
                        state::lowest(st.remote.get(u).copied().unwrap_or(0)).map(|l| Who::Remote { unit: u, local: l })
                    }
                })
            }
            Mode::Flat => {
                let cpu = self.cfg.cores_per_unit;
                let n = self.units() * cpu;
                (0..n).find_map(|k| {
                    let g = (st.rr_next + k) % n;
                    let who = self.who_for(CoreId::new(g / cpu, g % cpu));
                    st.contains(who).then_some(who)
                })
            }
        }
    }

    fn who_for(&self, c: CoreId) -> Who {
        if c.unit == self.unit {
            Who::Own(c.local)
        } else {
            Who::Remote {
                unit: c.unit,
                local: c.local,
            }
        }
    }

    fn core_of(&self, who: Who) -> Option<CoreId> {
        match who {
            Who::Own(c) => Some(CoreId::new(self.unit, c)),
            Who::Remote { unit, local } => Some(CoreId::new(unit, local)),
            Who::Se(_) => None,
        }
    }

    fn note_grant(&self, st: &mut VarState, who: Who) {
        if self.mode == Mode::Flat {
            if let Some(c) = self.core_of(who) {
                st.rr_next = c.global(&self.cfg) + 1;
            }
        }
    }

    /// Remote single-core requesters are answered directly under flat
    /// routing and through their SE under the overflow protocol.
    fn remote_via_se(&self) -> bool {
        self.mode == Mode::Hierarchical
    }

    fn barrier_kind_of(&self, m: &Message) -> BarrierKind {
        use Opcode::*;
        match m.opcode {
            BarrierWaitLocalWithinUnit => BarrierKind::WithinUnit,
            BarrierWaitLocalAcrossUnits | BarrierWaitGlobal => {
                if m.info == self.cfg.total_clients() as u64 {
                    BarrierKind::AcrossAll
                } else {
                    BarrierKind::AcrossPartial
                }
            }
            _ => BarrierKind::WithinUnit,
        }
    }

    /// Sum of all indexing counters at this SE.
    pub fn counter_total(&self) -> u64 {
        self.counters.total()
    }
}

#[cfg(test)]
mod tests;
