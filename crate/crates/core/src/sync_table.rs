//! The Synchronization Table and indexing counters owned by each SE.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::error::TableError;

/// `table_info` value meaning "no owner". Cannot collide with a 6-bit id.
pub const NO_OWNER: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryState {
    Free,
    Occupied,
}

/// One ST entry. `ext` holds the per-primitive bookkeeping the SE keeps next
/// to the hardware-visible fields.
#[derive(Debug, Clone, PartialEq)]
pub struct STEntry<X = ()> {
    pub addr: u64,
    /// One bit per SE.
    pub global_wait: u64,
    /// One bit per local core.
    pub local_wait: u64,
    pub state: EntryState,
    pub table_info: u64,
    pub ext: X,
}

impl<X: Default> STEntry<X> {
    fn free() -> Self {
        STEntry {
            addr: 0,
            global_wait: 0,
            local_wait: 0,
            state: EntryState::Free,
            table_info: NO_OWNER,
            ext: X::default(),
        }
    }

    pub fn is_occupied(&self) -> bool {
        self.state == EntryState::Occupied
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reserve {
    Slot(usize),
    Full,
}

#[derive(Debug, Clone)]
pub struct SynchronizationTable<X = ()> {
    entries: Vec<STEntry<X>>,
    /// `None` for the unbounded tables used to model server-core state.
    capacity: Option<usize>,
    index: HashMap<u64, usize>,
    free: BTreeSet<usize>,
}

impl<X: Default + Clone> SynchronizationTable<X> {
    pub fn new(size: usize) -> Self {
        SynchronizationTable {
            entries: (0..size).map(|_| STEntry::free()).collect(),
            capacity: Some(size),
            index: HashMap::new(),
            free: (0..size).collect(),
        }
    }

    pub fn unbounded() -> Self {
        SynchronizationTable {
            entries: Vec::new(),
            capacity: None,
            index: HashMap::new(),
            free: BTreeSet::new(),
        }
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn occupied(&self) -> usize {
        self.index.len()
    }

    pub fn is_full(&self) -> bool {
        self.capacity.is_some_and(|c| self.index.len() >= c)
    }

    pub fn lookup(&self, addr: u64) -> Option<usize> {
        self.index.get(&addr).copied()
    }

    /// Reserves the lowest-index free entry for `addr`.
    pub fn reserve(&mut self, addr: u64) -> Result<Reserve, TableError> {
        if self.index.contains_key(&addr) {
            return Err(TableError::DuplicateReserve(addr));
        }
        let idx = match self.free.pop_first() {
            Some(i) => i,
            None if self.capacity.is_none() => {
                self.entries.push(STEntry::free());
                self.entries.len() - 1
            }
            None => return Ok(Reserve::Full),
        };
        let e = &mut self.entries[idx];
        *e = STEntry::free();
        e.addr = addr;
        e.state = EntryState::Occupied;
        self.index.insert(addr, idx);
        self.debug_check();
        Ok(Reserve::Slot(idx))
    }

    pub fn release(&mut self, addr: u64) -> Result<(), TableError> {
        let idx = self.lookup(addr).ok_or(TableError::NotResident(addr))?;
        let e = &mut self.entries[idx];
        if e.global_wait != 0 || e.local_wait != 0 {
            return Err(TableError::WaitersPresent(addr));
        }
        *e = STEntry::free();
        self.index.remove(&addr);
        self.free.insert(idx);
        Ok(())
    }

    pub fn entry(&self, idx: usize) -> &STEntry<X> {
        &self.entries[idx]
    }

    pub fn entry_mut(&mut self, idx: usize) -> &mut STEntry<X> {
        &mut self.entries[idx]
    }

    pub fn get(&self, addr: u64) -> Option<&STEntry<X>> {
        self.lookup(addr).map(|i| &self.entries[i])
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = &STEntry<X>> {
        self.entries.iter().filter(|e| e.is_occupied())
    }

    fn debug_check(&self) {
        if cfg!(debug_assertions) {
            let n = self.iter_occupied().count();
            debug_assert_eq!(n, self.index.len(), "two occupied entries share an address");
        }
    }
}

/// Index into a 256-entry counter array: the 8 least-significant address bits.
pub fn counter_index(addr: u64) -> usize {
    (addr & 0xff) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexingCounters {
    counters: Vec<u64>,
}

impl IndexingCounters {
    /// `size` must be a power of two; indices are the low log2(size) bits.
    pub fn new(size: usize) -> Self {
        assert!(size.is_power_of_two());
        IndexingCounters {
            counters: vec![0; size],
        }
    }

    pub fn index(&self, addr: u64) -> usize {
        (addr as usize) & (self.counters.len() - 1)
    }

    pub fn get(&self, addr: u64) -> u64 {
        self.counters[self.index(addr)]
    }

    pub fn inc(&mut self, addr: u64) -> u64 {
        let i = self.index(addr);
        self.counters[i] += 1;
        self.counters[i]
    }

    pub fn dec(&mut self, addr: u64) -> Result<u64, TableError> {
        self.sub(addr, 1)
    }

    pub fn sub(&mut self, addr: u64, n: u64) -> Result<u64, TableError> {
        let i = self.index(addr);
        if self.counters[i] < n {
            return Err(TableError::CounterUnderflow { index: i });
        }
        self.counters[i] -= n;
        Ok(self.counters[i])
    }

    pub fn total(&self) -> u64 {
        self.counters.iter().sum()
    }
}
