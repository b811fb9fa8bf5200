//! Server-core comparison schemes. Central and Hier run the same protocol
//! state machine as the SEs, with variable state living in the server's
//! memory hierarchy; Ideal resolves every request instantly.

use std::num::NonZeroUsize;

use lru::LruCache;

use crate::engine::{HandlerOutput, MasterMap, Mode, SEState, Sender};
use crate::error::ProtocolError;
use crate::messages::Message;
use crate::topology::{CoreId, Scheme, SystemConfig};

/// 16 KB L1 of 64 B lines.
pub const SERVER_CACHE_LINES: usize = 256;
pub const LINE_BYTES: u64 = 64;

/// Write-back LRU cache over synchronization-variable lines.
#[derive(Debug)]
pub struct ServerCache {
    lines: LruCache<u64, bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CacheOutcome {
    pub hits: u64,
    /// Lines fetched from memory.
    pub misses: Vec<u64>,
    /// Dirty lines evicted to memory.
    pub writebacks: Vec<u64>,
}

impl ServerCache {
    pub fn new(lines: usize) -> Self {
        ServerCache {
            lines: LruCache::new(NonZeroUsize::new(lines.max(1)).expect("nonzero")),
        }
    }

    pub fn line_of(addr: u64) -> u64 {
        addr & !(LINE_BYTES - 1)
    }

    pub fn contains(&self, addr: u64) -> bool {
        self.lines.contains(&Self::line_of(addr))
    }

    /// Read-modify-write of the line holding `addr`.
    pub fn update(&mut self, addr: u64, outcome: &mut CacheOutcome) {
        let line = Self::line_of(addr);
        if let Some(dirty) = self.lines.get_mut(&line) {
            *dirty = true;
            outcome.hits += 2;
            return;
        }
        outcome.misses.push(line);
        // the write after the fill hits
        outcome.hits += 1;
        if let Some((old, dirty)) = self.lines.push(line, true) {
            if dirty && old != line {
                outcome.writebacks.push(old);
            }
        }
    }
}

impl Clone for ServerCache {
    fn clone(&self) -> Self {
        ServerCache {
            lines: self.lines.clone(),
        }
    }
}

/// A core dedicated to serving synchronization requests.
#[derive(Debug, Clone)]
pub struct ServerCore {
    pub core: CoreId,
    pub engine: SEState,
    pub cache: ServerCache,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServerStep {
    pub out: HandlerOutput,
    pub cache: CacheOutcome,
}

impl ServerCore {
    /// The single server of the Central scheme, on unit 0.
    pub fn central(cfg: &SystemConfig) -> Self {
        ServerCore {
            core: CoreId::new(0, cfg.server_local_id()),
            engine: SEState::unbounded(0, Mode::Flat, MasterMap::Fixed(0), cfg),
            cache: ServerCache::new(SERVER_CACHE_LINES),
        }
    }

    /// The server of `unit` under the Hier scheme.
    pub fn hier(unit: usize, cfg: &SystemConfig) -> Self {
        ServerCore {
            core: CoreId::new(unit, cfg.server_local_id()),
            engine: SEState::unbounded(unit, Mode::Hierarchical, MasterMap::ByAddress, cfg),
            cache: ServerCache::new(SERVER_CACHE_LINES),
        }
    }

    pub fn step(&mut self, from: Sender, m: Message, now: u64) -> Result<ServerStep, ProtocolError> {
        let out = self.engine.handle_message(from, m, now)?;
        let mut cache = CacheOutcome::default();
        for &addr in &out.touched {
            self.cache.update(addr, &mut cache);
        }
        Ok(ServerStep { out, cache })
    }
}

pub fn central_step(server: &mut ServerCore, from: Sender, m: Message, now: u64) -> Result<ServerStep, ProtocolError> {
    debug_assert_eq!(server.engine.mode, Mode::Flat);
    server.step(from, m, now)
}

pub fn hier_step(server: &mut ServerCore, from: Sender, m: Message, now: u64) -> Result<ServerStep, ProtocolError> {
    debug_assert_eq!(server.engine.mode, Mode::Hierarchical);
    server.step(from, m, now)
}

/// The zero-cost arbiter of the Ideal scheme.
pub fn ideal_arbiter(cfg: &SystemConfig) -> SEState {
    SEState::unbounded(0, Mode::Flat, MasterMap::Fixed(0), cfg)
}

pub fn ideal_step(arbiter: &mut SEState, from: Sender, m: Message) -> Result<HandlerOutput, ProtocolError> {
    arbiter.handle_message(from, m, 0)
}

/// Whether `core` runs workload code under `scheme`.
pub fn is_client(core: CoreId, cfg: &SystemConfig) -> bool {
    core.local < cfg.clients_per_unit && !(cfg.scheme.uses_server_core() && core.local == cfg.server_local_id())
}

pub fn servers(cfg: &SystemConfig) -> Vec<ServerCore> {
    match cfg.scheme {
        Scheme::Central => vec![ServerCore::central(cfg)],
        Scheme::Hier => (0..cfg.num_units).map(|u| ServerCore::hier(u, cfg)).collect(),
        _ => Vec::new(),
    }
}
