//! System shape: NDP units, cores, synchronization engines and the mapping
//! from a synchronization variable's address to its Master SE.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::sim::latency::{EnergyModel, LatencyModel};

pub const GIB: u64 = 1 << 30;

/// Synchronization scheme under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Syncron,
    Flat,
    Central,
    Hier,
    Ideal,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Syncron,
        Scheme::Flat,
        Scheme::Central,
        Scheme::Hier,
        Scheme::Ideal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Syncron => "syncron",
            Scheme::Flat => "flat",
            Scheme::Central => "central",
            Scheme::Hier => "hier",
            Scheme::Ideal => "ideal",
        }
    }

    /// Schemes that dedicate a core per unit (or one per system) as a server.
    pub fn uses_server_core(self) -> bool {
        matches!(self, Scheme::Central | Scheme::Hier)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub num_units: usize,
    pub cores_per_unit: usize,
    /// Cores that execute the workload. The remaining core of each unit is
    /// either disabled (SE-based schemes) or acts as the server.
    pub clients_per_unit: usize,
    pub st_entries: usize,
    pub num_index_counters: usize,
    /// Depth of the SPU message buffer, in messages.
    pub inbox_depth: usize,
    pub scheme: Scheme,
    pub unit_mem_bytes: u64,
    pub latency: LatencyModel,
    pub energy: EnergyModel,
    /// Grant-fairness threshold. Not modeled; any value is rejected.
    pub fairness_threshold: Option<u64>,
    /// SE-side read-modify-write operations. Not modeled; must stay off.
    pub se_rmw: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_units: 4,
            cores_per_unit: 16,
            clients_per_unit: 15,
            st_entries: 64,
            num_index_counters: 256,
            inbox_depth: 16,
            scheme: Scheme::Syncron,
            unit_mem_bytes: GIB,
            latency: LatencyModel::default(),
            energy: EnergyModel::default(),
            fairness_threshold: None,
            se_rmw: false,
        }
    }
}

impl SystemConfig {
    /// Shorthand for a system of `units × cores_per_unit` with one core per
    /// unit reserved for synchronization.
    pub fn with_shape(units: usize, cores_per_unit: usize, scheme: Scheme) -> Self {
        SystemConfig {
            num_units: units,
            cores_per_unit,
            clients_per_unit: cores_per_unit.saturating_sub(1).max(1),
            scheme,
            ..SystemConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.num_units == 0 {
            return bad("num_units must be at least 1");
        }
        if self.num_units > 64 {
            return bad("num_units must be at most 64");
        }
        if self.cores_per_unit == 0 || self.cores_per_unit > 64 {
            return bad("cores_per_unit must be in 1..=64");
        }
        if self.scheme.uses_server_core() && self.cores_per_unit < 2 {
            return bad("central/hier need at least 2 cores per unit (one server)");
        }
        if self.clients_per_unit == 0 || self.clients_per_unit > self.cores_per_unit {
            return bad("clients_per_unit must be in 1..=cores_per_unit");
        }
        if self.scheme.uses_server_core() && self.clients_per_unit == self.cores_per_unit {
            return bad("central/hier need a spare core per unit for the server");
        }
        if self.st_entries == 0 {
            return bad("st_entries must be at least 1");
        }
        if self.num_index_counters == 0 || !self.num_index_counters.is_power_of_two() {
            return bad("num_index_counters must be a nonzero power of two");
        }
        if self.inbox_depth == 0 {
            return bad("inbox_depth must be at least 1");
        }
        if self.unit_mem_bytes == 0 {
            return bad("unit_mem_bytes must be nonzero");
        }
        if self.total_cores() > 64 {
            return bad("at most 64 cores in total (6-bit core ids)");
        }
        if self.fairness_threshold.is_some() {
            return bad("fairness_threshold is not supported");
        }
        if self.se_rmw {
            return bad("se_rmw is not supported");
        }
        self.latency.validate()?;
        self.energy.validate()?;
        Ok(())
    }

    pub fn total_cores(&self) -> usize {
        self.num_units * self.cores_per_unit
    }

    pub fn total_clients(&self) -> usize {
        self.num_units * self.clients_per_unit
    }

    pub fn address_space(&self) -> u64 {
        self.num_units as u64 * self.unit_mem_bytes
    }

    /// Local index of the core that acts as server under central/hier.
    pub fn server_local_id(&self) -> usize {
        self.cores_per_unit - 1
    }

    /// All client cores in ascending global order.
    pub fn clients(&self) -> impl Iterator<Item = CoreId> + '_ {
        (0..self.num_units).flat_map(move |u| {
            (0..self.clients_per_unit).map(move |l| CoreId::new(u, l))
        })
    }

    /// First byte of unit `unit`'s memory.
    pub fn unit_base(&self, unit: usize) -> u64 {
        unit as u64 * self.unit_mem_bytes
    }

    /// Unit whose memory contains `addr`.
    pub fn home_unit(&self, addr: u64) -> Result<usize, ConfigError> {
        master_se_of(addr, self)
    }
}

/// A core, identified by its unit and its index within the unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoreId {
    pub unit: usize,
    pub local: usize,
}

impl CoreId {
    pub fn new(unit: usize, local: usize) -> Self {
        CoreId { unit, local }
    }

    pub fn global(self, cfg: &SystemConfig) -> usize {
        self.unit * cfg.cores_per_unit + self.local
    }
}

impl fmt::Display for CoreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.unit, self.local)
    }
}

/// The SE of the unit whose (contiguous) memory range holds `addr`.
pub fn master_se_of(addr: u64, cfg: &SystemConfig) -> Result<usize, ConfigError> {
    let total = cfg.address_space();
    if addr >= total {
        return Err(ConfigError::AddressOutOfRange { addr, total });
    }
    Ok((addr / cfg.unit_mem_bytes) as usize)
}

pub fn resolve_core(global_id: usize, cfg: &SystemConfig) -> Result<CoreId, ConfigError> {
    let total = cfg.total_cores();
    if global_id >= total {
        return Err(ConfigError::CoreOutOfRange { id: global_id, total });
    }
    Ok(CoreId::new(
        global_id / cfg.cores_per_unit,
        global_id % cfg.cores_per_unit,
    ))
}
