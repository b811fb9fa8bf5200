//! Per-variable protocol state, and its two physical homes: an ST entry or a
//! memory-resident `SyncronVar`.

use serde::Serialize;

use crate::messages::Primitive;
use crate::sync_table::{STEntry, NO_OWNER};

/// A requester as seen by the coordinator that owns a variable's global
/// state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Who {
    /// A core of the coordinator's own unit.
    Own(usize),
    /// A whole SE, on behalf of all its waiting cores.
    Se(usize),
    /// A single core of another unit (flat routing, overflow redirection,
    /// one-level barriers).
    Remote { unit: usize, local: usize },
}

/// Encoding of a lock owner into `table_info` / `var_info`: SE ids live in
/// the upper half, local core ids in the low bits.
pub fn encode_owner(who: Option<Who>) -> u64 {
    match who {
        None => NO_OWNER,
        Some(Who::Own(c)) => c as u64,
        Some(Who::Se(s)) => ((s as u64) + 1) << 32,
        Some(Who::Remote { unit, local }) => (((unit as u64) + 1) << 32) | (1 << 16) | local as u64,
    }
}

pub fn decode_owner(v: u64) -> Option<Who> {
    if v == NO_OWNER {
        return None;
    }
    let hi = v >> 32;
    if hi == 0 {
        return Some(Who::Own(v as usize & 0xffff));
    }
    let unit = (hi - 1) as usize;
    if v & (1 << 16) != 0 {
        Some(Who::Remote {
            unit,
            local: (v & 0xffff) as usize,
        })
    } else {
        Some(Who::Se(unit))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BarrierKind {
    #[default]
    WithinUnit,
    /// Every client core of the system participates: two-level protocol.
    AcrossAll,
    /// A subset participates: local SEs forward every arrival.
    AcrossPartial,
}

/// Logical state of one synchronization variable at one SE. Which fields
/// are meaningful depends on the primitive and on whether this SE is the
/// variable's master.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarState {
    pub prim: Option<Primitive>,
    /// Requesting/holding cores of this SE's own unit (local waiting list).
    pub own: u64,
    /// SEs registered as a whole (global waiting list, master only).
    pub se_level: u64,
    /// Per-core requesters of other units, indexed by unit (master only).
    pub remote: Vec<u64>,
    /// Lock owner code, semaphore counter, or barrier arrival count.
    pub info: u64,

    /// Lock requesters whose grant completes a condition-variable wait.
    pub resume_own: u64,
    pub resume_remote: Vec<u64>,
    /// Local role: this SE currently holds the lock on behalf of its unit.
    pub has_rights: bool,
    /// Local role: a global request (lock acquire, condvar registration) is
    /// outstanding at the master.
    pub requested: bool,
    /// Local role (semaphore): waiters requested from the master, not yet
    /// granted.
    pub pending: u64,
    /// Semaphore initial resources, as declared by the first request.
    pub initial: Option<u64>,
    /// Semaphore master: outstanding demand per SE.
    pub demand: Vec<u64>,
    pub barrier_total: Option<u64>,
    pub barrier_kind: BarrierKind,
    /// Lock associated with a condition variable.
    pub cond_lock: Option<u64>,
    /// Flat round-robin arbitration pointer (global core index).
    pub rr_next: usize,
    /// SEs that redirected requests through the overflow protocol, and how
    /// many acquire-type overflow messages each sent during this episode.
    pub overflow_info: u64,
    pub overflow_counts: Vec<u64>,
}

pub(crate) fn bit(i: usize) -> u64 {
    1u64 << i
}

pub(crate) fn lowest(mask: u64) -> Option<usize> {
    (mask != 0).then(|| mask.trailing_zeros() as usize)
}

pub(crate) fn ensure_len(v: &mut Vec<u64>, n: usize) {
    if v.len() < n {
        v.resize(n, 0);
    }
}

impl VarState {
    pub fn remote_any(&self) -> bool {
        self.remote.iter().any(|&m| m != 0)
    }

    /// No core or SE is waiting on (or holding) this variable.
    pub fn lists_empty(&self) -> bool {
        self.own == 0 && self.se_level == 0 && !self.remote_any() && self.demand.iter().all(|&d| d == 0)
    }

    pub fn set_remote(&mut self, units: usize, unit: usize, local: usize) {
        ensure_len(&mut self.remote, units);
        self.remote[unit] |= bit(local);
    }

    pub fn clear_remote(&mut self, unit: usize, local: usize) {
        if let Some(m) = self.remote.get_mut(unit) {
            *m &= !bit(local);
        }
    }

    pub fn has_remote(&self, unit: usize, local: usize) -> bool {
        self.remote.get(unit).is_some_and(|m| m & bit(local) != 0)
    }

    pub fn owner(&self) -> Option<Who> {
        decode_owner(self.info)
    }

    pub fn set_owner(&mut self, who: Option<Who>) {
        self.info = encode_owner(who);
    }

    pub fn add(&mut self, units: usize, who: Who) {
        match who {
            Who::Own(c) => self.own |= bit(c),
            Who::Se(s) => self.se_level |= bit(s),
            Who::Remote { unit, local } => self.set_remote(units, unit, local),
        }
    }

    pub fn remove(&mut self, who: Who) {
        match who {
            Who::Own(c) => self.own &= !bit(c),
            Who::Se(s) => self.se_level &= !bit(s),
            Who::Remote { unit, local } => self.clear_remote(unit, local),
        }
    }

    pub fn contains(&self, who: Who) -> bool {
        match who {
            Who::Own(c) => self.own & bit(c) != 0,
            Who::Se(s) => self.se_level & bit(s) != 0,
            Who::Remote { unit, local } => self.has_remote(unit, local),
        }
    }

    pub fn mark_resume(&mut self, units: usize, who: Who) {
        match who {
            Who::Own(c) => self.resume_own |= bit(c),
            Who::Remote { unit, local } => {
                ensure_len(&mut self.resume_remote, units);
                self.resume_remote[unit] |= bit(local);
            }
            Who::Se(_) => {}
        }
    }

    /// Clears and returns the resume mark for `who`.
    pub fn take_resume(&mut self, who: Who) -> bool {
        match who {
            Who::Own(c) => {
                let had = self.resume_own & bit(c) != 0;
                self.resume_own &= !bit(c);
                had
            }
            Who::Remote { unit, local } => match self.resume_remote.get_mut(unit) {
                Some(m) if *m & bit(local) != 0 => {
                    *m &= !bit(local);
                    true
                }
                _ => false,
            },
            Who::Se(_) => false,
        }
    }

    /// Writes the hardware-visible fields of an ST entry from this state.
    pub fn project_into(entry: &mut STEntry<VarState>) {
        entry.local_wait = entry.ext.own;
        entry.global_wait = entry.ext.se_level;
        for (u, m) in entry.ext.remote.iter().enumerate() {
            if *m != 0 {
                entry.global_wait |= bit(u);
            }
        }
        for (u, d) in entry.ext.demand.iter().enumerate() {
            if *d != 0 {
                entry.global_wait |= bit(u);
            }
        }
        entry.table_info = entry.ext.info;
    }
}

/// Memory-resident fallback record for a variable whose master ST overflowed.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncronVar {
    /// One list per SE, one bit per core of that SE's unit. An SE that is
    /// registered as a whole has every bit of its list set.
    pub wait_lists: Vec<u64>,
    pub var_info: u64,
    /// One bit per SE that redirected requests via overflow messages.
    pub overflow_info: u64,
    /// Set while the master's indexing counter accounts for this record.
    pub active: bool,
    pub state: VarState,
}

/// Bytes read or written per syncronVar access.
pub const SYNCRONVAR_BYTES: u64 = 64;

impl SyncronVar {
    pub fn new(units: usize) -> Self {
        SyncronVar {
            wait_lists: vec![0; units],
            var_info: NO_OWNER,
            overflow_info: 0,
            active: false,
            state: VarState::default(),
        }
    }

    /// Rebuilds the in-memory image from the logical state.
    pub fn project(&mut self, self_unit: usize, cores_per_unit: usize) {
        let all = if cores_per_unit >= 64 {
            u64::MAX
        } else {
            (1u64 << cores_per_unit) - 1
        };
        let st = &self.state;
        for (u, list) in self.wait_lists.iter_mut().enumerate() {
            let mut v = st.remote.get(u).copied().unwrap_or(0);
            if st.se_level & bit(u) != 0 || st.demand.get(u).is_some_and(|&d| d > 0) {
                v = all;
            }
            if u == self_unit {
                v |= st.own;
            }
            *list = v;
        }
        self.var_info = st.info;
        self.overflow_info = st.overflow_info;
    }
}
