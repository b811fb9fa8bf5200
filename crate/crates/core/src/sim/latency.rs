//! Timing and energy constants, and the network model built on them.
//!
//! Time is kept in integer picoseconds, energy in integer tenths of a
//! picojoule, so every composed value is exact.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const PS_PER_NS: u64 = 1000;

/// Converts a configured nanosecond value to picoseconds.
pub fn ns_to_ps(ns: f64) -> u64 {
    (ns * PS_PER_NS as f64).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MemoryTech {
    #[default]
    Hbm,
    Hmc,
    Ddr4,
}

impl MemoryTech {
    pub const ALL: [MemoryTech; 3] = [MemoryTech::Hbm, MemoryTech::Hmc, MemoryTech::Ddr4];

    pub fn name(self) -> &'static str {
        match self {
            MemoryTech::Hbm => "hbm",
            MemoryTech::Hmc => "hmc",
            MemoryTech::Ddr4 => "ddr4",
        }
    }
}

impl fmt::Display for MemoryTech {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MemoryTech {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MemoryTech::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown memory technology '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemOpKind {
    Read,
    Write,
}

/// Fixed access latency of one technology, in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemTiming {
    pub read_ns: f64,
    pub write_ns: f64,
}

impl MemTiming {
    /// read = tRCD(read) + tRAS, write = tRCD(write) + tWR.
    pub fn from_timing(rcd_read: f64, rcd_write: f64, ras: f64, wr: f64) -> Self {
        MemTiming {
            read_ns: rcd_read + ras,
            write_ns: rcd_write + wr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModel {
    pub core_clock_mhz: u64,
    pub se_clock_mhz: u64,
    pub hop_cycles: u64,
    pub arbiter_cycles: u64,
    /// Hops between any two endpoints of one unit.
    pub intra_hops: u64,
    /// SE cycles to serve one message.
    pub se_service_cycles: u64,
    pub link_ns_per_line: f64,
    pub link_fixed_cycles: u64,
    pub link_gbytes_per_s: f64,
    pub line_bytes: u64,
    pub l1_hit_cycles: u64,
    pub memory: MemoryTech,
    pub hbm: MemTiming,
    pub hmc: MemTiming,
    pub ddr4: MemTiming,
    /// Utilization window of the queueing model.
    pub queue_window_ns: u64,
    /// Queueing delay cap, in multiples of the port service time.
    pub queue_cap: u64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            core_clock_mhz: 2500,
            se_clock_mhz: 1000,
            hop_cycles: 1,
            arbiter_cycles: 1,
            intra_hops: 1,
            se_service_cycles: 12,
            link_ns_per_line: 40.0,
            link_fixed_cycles: 20,
            link_gbytes_per_s: 12.8,
            line_bytes: 64,
            l1_hit_cycles: 4,
            memory: MemoryTech::Hbm,
            hbm: MemTiming::from_timing(7.0, 6.0, 17.0, 8.0),
            hmc: MemTiming::from_timing(17.0, 17.0, 34.0, 19.0),
            ddr4: MemTiming::from_timing(16.0, 16.0, 39.0, 18.0),
            queue_window_ns: 1000,
            queue_cap: 10,
        }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |what: &str| Err(ConfigError::Invalid(format!("{what} must be positive")));
        if self.core_clock_mhz == 0 || 1_000_000 % self.core_clock_mhz != 0 {
            return Err(ConfigError::Invalid("core_clock_mhz must divide 1 THz".into()));
        }
        if self.se_clock_mhz == 0 || 1_000_000 % self.se_clock_mhz != 0 {
            return Err(ConfigError::Invalid("se_clock_mhz must divide 1 THz".into()));
        }
        if self.hop_cycles + self.arbiter_cycles == 0 {
            return bad("intra-unit latency");
        }
        if self.se_service_cycles == 0 {
            return bad("se_service_cycles");
        }
        if !(self.link_ns_per_line > 0.0) || !self.link_ns_per_line.is_finite() {
            return bad("link_ns_per_line");
        }
        if !(self.link_gbytes_per_s > 0.0) || !self.link_gbytes_per_s.is_finite() {
            return bad("link_gbytes_per_s");
        }
        if self.line_bytes == 0 || self.l1_hit_cycles == 0 || self.queue_window_ns == 0 {
            return bad("line_bytes, l1_hit_cycles and queue_window_ns");
        }
        for t in [self.hbm, self.hmc, self.ddr4] {
            if !(t.read_ns > 0.0 && t.write_ns > 0.0) {
                return bad("memory latency");
            }
        }
        Ok(())
    }

    pub fn core_cycle_ps(&self) -> u64 {
        1_000_000 / self.core_clock_mhz
    }

    pub fn se_cycle_ps(&self) -> u64 {
        1_000_000 / self.se_clock_mhz
    }

    pub fn se_service_ps(&self) -> u64 {
        self.se_service_cycles * self.se_cycle_ps()
    }

    pub fn l1_hit_ps(&self) -> u64 {
        self.l1_hit_cycles * self.core_cycle_ps()
    }

    /// One intra-unit traversal on an idle network.
    pub fn intra_ps(&self) -> u64 {
        (self.intra_hops * self.hop_cycles + self.arbiter_cycles) * self.core_cycle_ps()
    }

    /// Serialization plus fixed cost of one inter-unit link crossing.
    pub fn link_ps(&self, bytes: u64) -> u64 {
        let lines = bytes.div_ceil(self.line_bytes);
        lines * ns_to_ps(self.link_ns_per_line) + self.link_fixed_cycles * self.core_cycle_ps()
    }

    /// Time a transfer occupies a link at its bandwidth.
    pub fn link_occupancy_ps(&self, bytes: u64) -> u64 {
        (bytes as f64 * PS_PER_NS as f64 / self.link_gbytes_per_s).ceil() as u64
    }

    /// Latency of a transfer on an idle network.
    pub fn transfer_latency(&self, src_unit: usize, dst_unit: usize, bytes: u64) -> Result<u64, ConfigError> {
        if bytes == 0 {
            return Err(ConfigError::Invalid("transfer of zero bytes".into()));
        }
        if src_unit == dst_unit {
            Ok(self.intra_ps())
        } else {
            Ok(self.link_ps(bytes) + 2 * self.intra_ps())
        }
    }

    pub fn timing(&self, tech: MemoryTech) -> MemTiming {
        match tech {
            MemoryTech::Hbm => self.hbm,
            MemoryTech::Hmc => self.hmc,
            MemoryTech::Ddr4 => self.ddr4,
        }
    }

    pub fn memory_latency(&self, tech: MemoryTech, op: MemOpKind) -> u64 {
        let t = self.timing(tech);
        ns_to_ps(match op {
            MemOpKind::Read => t.read_ns,
            MemOpKind::Write => t.write_ns,
        })
    }
}

/// Energy constants in pJ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    pub hop_pj_per_bit: f64,
    pub link_pj_per_bit: f64,
    pub memory_pj_per_bit: f64,
    pub l1_hit_pj: f64,
    pub l1_miss_pj: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            hop_pj_per_bit: 0.4,
            link_pj_per_bit: 4.0,
            memory_pj_per_bit: 7.0,
            l1_hit_pj: 23.0,
            l1_miss_pj: 47.0,
        }
    }
}

/// pJ to tenths of a pJ.
fn dpj(pj: f64) -> u64 {
    (pj * 10.0).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyEvent {
    Message { bytes: u64, hops: u64, links: u64 },
    Memory { bytes: u64 },
    Cache { hit: bool },
}

/// Accumulated energy, in tenths of a pJ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub cache_dpj: u64,
    pub network_dpj: u64,
    pub memory_dpj: u64,
}

impl EnergyBreakdown {
    pub fn total_dpj(&self) -> u64 {
        self.cache_dpj + self.network_dpj + self.memory_dpj
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let all = [
            self.hop_pj_per_bit,
            self.link_pj_per_bit,
            self.memory_pj_per_bit,
            self.l1_hit_pj,
            self.l1_miss_pj,
        ];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(ConfigError::Invalid("energy constants must be finite and non-negative".into()))
        }
    }

    pub fn account_energy(&self, acc: &mut EnergyBreakdown, event: EnergyEvent) {
        match event {
            EnergyEvent::Message { bytes, hops, links } => {
                let bits = bytes * 8;
                acc.network_dpj += bits * hops * dpj(self.hop_pj_per_bit) + bits * links * dpj(self.link_pj_per_bit);
            }
            EnergyEvent::Memory { bytes } => acc.memory_dpj += bytes * 8 * dpj(self.memory_pj_per_bit),
            EnergyEvent::Cache { hit } => {
                acc.cache_dpj += dpj(if hit { self.l1_hit_pj } else { self.l1_miss_pj });
            }
        }
    }
}

/// Contention point of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    Core(usize),
    Se(usize),
    /// A unit's router towards the inter-unit links.
    Link(usize),
    /// A unit's memory controller.
    Mem(usize),
}

/// Delivery plan for one transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub latency_ps: u64,
    pub queue_ps: u64,
    pub hops: u64,
    pub links: u64,
}

/// Stateful network: M/D/1 queueing at each destination port with the
/// utilization measured over a trailing window, and FIFO occupancy of each
/// directed inter-unit link.
#[derive(Debug, Clone)]
pub struct Network {
    model: LatencyModel,
    arrivals: HashMap<Port, VecDeque<u64>>,
    link_free_at: HashMap<(usize, usize), u64>,
    pub saturated: u64,
}

impl Network {
    pub fn new(model: &LatencyModel) -> Self {
        Network {
            model: model.clone(),
            arrivals: HashMap::new(),
            link_free_at: HashMap::new(),
            saturated: 0,
        }
    }

    pub fn model(&self) -> &LatencyModel {
        &self.model
    }

    /// Queueing delay at `port` for a message arriving at `now`, then
    /// records the arrival.
    fn queue(&mut self, port: Port, now: u64) -> u64 {
        let d = self.model.core_cycle_ps();
        let window = self.model.queue_window_ns * PS_PER_NS;
        let cap = self.model.queue_cap * d;
        let q = self.arrivals.entry(port).or_default();
        while q.front().is_some_and(|&t| t + window <= now) {
            q.pop_front();
        }
        let busy = q.len() as u64 * d;
        let w = if busy >= window {
            self.saturated += 1;
            cap
        } else {
            // W = rho * D / (2 (1 - rho)), rho = busy / window
            let num = busy as u128 * d as u128;
            let den = 2 * (window - busy) as u128;
            (num / den).min(cap as u128) as u64
        };
        q.push_back(now);
        w
    }

    /// Sends `bytes` from `src` (in `src_unit`) to `dst` (in `dst_unit`) at
    /// `now`.
    pub fn transfer(&mut self, now: u64, src_unit: usize, dst: Port, dst_unit: usize, bytes: u64) -> Delivery {
        debug_assert!(bytes > 0);
        let intra = self.model.intra_ps();
        let hops = self.model.intra_hops;
        if src_unit == dst_unit {
            let q = self.queue(dst, now);
            return Delivery {
                latency_ps: intra + q,
                queue_ps: q,
                hops,
                links: 0,
            };
        }
        let q1 = self.queue(Port::Link(src_unit), now);
        let at_link = now + intra + q1;
        let free = self.link_free_at.entry((src_unit, dst_unit)).or_insert(0);
        let start = at_link.max(*free);
        *free = start + self.model.link_occupancy_ps(bytes);
        let at_dst_unit = start + self.model.link_ps(bytes);
        let q2 = self.queue(dst, at_dst_unit);
        let arrive = at_dst_unit + intra + q2;
        Delivery {
            latency_ps: arrive - now,
            queue_ps: q1 + q2 + (start - at_link),
            hops: 2 * hops,
            links: 1,
        }
    }
}
