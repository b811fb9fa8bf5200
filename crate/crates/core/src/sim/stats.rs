use serde::{Deserialize, Serialize};

use crate::sim::latency::EnergyBreakdown;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Traffic {
    pub intra: u64,
    pub inter: u64,
}

impl Traffic {
    pub fn total(&self) -> u64 {
        self.intra + self.inter
    }

    pub fn add(&mut self, inter: bool, n: u64) {
        if inter {
            self.inter += n;
        } else {
            self.intra += n;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub lock: u64,
    pub barrier: u64,
    pub semaphore: u64,
    pub condvar: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryAccesses {
    /// Workload accesses to the issuing core's unit.
    pub local: u64,
    /// Workload accesses to another unit.
    pub remote: u64,
    /// Accesses to synchronization variables in memory: syncronVar reads and
    /// writes by SEs, and server-core cache fills and writebacks.
    pub sync_var: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyPj {
    pub cache: f64,
    pub network: f64,
    pub memory: f64,
    pub total: f64,
}

impl From<EnergyBreakdown> for EnergyPj {
    fn from(e: EnergyBreakdown) -> Self {
        EnergyPj {
            cache: e.cache_dpj as f64 / 10.0,
            network: e.network_dpj as f64 / 10.0,
            memory: e.memory_dpj as f64 / 10.0,
            total: e.total_dpj() as f64 / 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    /// Time-weighted mean fraction of ST entries in use.
    pub avg: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub total_time_ps: u64,
    pub total_time_ns: f64,
    /// Synchronization operations granted, per primitive.
    pub sync_ops: OpCounts,
    /// Workload operations completed.
    pub workload_ops: u64,
    /// Workload operations per microsecond.
    pub throughput: f64,
    /// Synchronization messages.
    pub messages: Traffic,
    pub bytes: Traffic,
    /// Workload data moved over the network.
    pub data_bytes: Traffic,
    pub memory_accesses: MemoryAccesses,
    pub energy: EnergyPj,
    /// The part of `energy` spent on synchronization.
    pub sync_energy: EnergyPj,
    pub energy_dpj: EnergyBreakdown,
    pub sync_energy_dpj: EnergyBreakdown,
    /// Per SE; empty for schemes without SEs.
    pub st_occupancy: Vec<Occupancy>,
    pub messages_per_coordinator: Vec<u64>,
    pub core_requests: u64,
    pub overflowed_requests: u64,
    pub overflowed_fraction: f64,
    pub inbox_stalls: u64,
    pub queue_saturations: u64,
    /// Indexing-counter sums per SE at the end of the run.
    pub final_counters: Vec<u64>,
    pub digest: String,
}

impl Stats {
    pub fn finalize(&mut self) {
        self.total_time_ns = self.total_time_ps as f64 / 1000.0;
        self.throughput = if self.total_time_ps == 0 {
            0.0
        } else {
            self.workload_ops as f64 * 1e6 / self.total_time_ps as f64
        };
        self.overflowed_fraction = if self.core_requests == 0 {
            0.0
        } else {
            self.overflowed_requests as f64 / self.core_requests as f64
        };
        self.energy = self.energy_dpj.into();
        self.sync_energy = self.sync_energy_dpj.into();
    }
}

/// Time-weighted occupancy of one table.
#[derive(Debug, Clone, Default)]
pub struct OccupancyTracker {
    capacity: u64,
    current: u64,
    max: u64,
    last_t: u64,
    area: u128,
}

impl OccupancyTracker {
    pub fn new(capacity: usize) -> Self {
        OccupancyTracker {
            capacity: capacity as u64,
            ..Default::default()
        }
    }

    pub fn set(&mut self, t: u64, occupied: usize) {
        self.area += self.current as u128 * (t - self.last_t) as u128;
        self.last_t = t;
        self.current = occupied as u64;
        self.max = self.max.max(self.current);
    }

    pub fn finish(&mut self, end: u64) -> Occupancy {
        self.set(end.max(self.last_t), self.current as usize);
        if self.capacity == 0 {
            return Occupancy::default();
        }
        let avg = if end == 0 {
            0.0
        } else {
            self.area as f64 / (end as f64 * self.capacity as f64)
        };
        Occupancy {
            avg,
            max: self.max as f64 / self.capacity as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupancy_is_time_weighted() {
        let mut t = OccupancyTracker::new(4);
        t.set(0, 1);
        t.set(100, 3);
        t.set(200, 0);
        let o = t.finish(400);
        assert_eq!(o.max, 0.75);
        // (1*100 + 3*100) / (4 * 400)
        assert_eq!(o.avg, 0.25);
    }

    #[test]
    fn finalize_derives_ratios() {
        let mut s = Stats {
            total_time_ps: 2_000_000,
            workload_ops: 10,
            core_requests: 8,
            overflowed_requests: 2,
            ..Stats::default()
        };
        s.finalize();
        assert_eq!(s.throughput, 5.0);
        assert_eq!(s.overflowed_fraction, 0.25);
        assert_eq!(s.total_time_ns, 2000.0);
    }
}
