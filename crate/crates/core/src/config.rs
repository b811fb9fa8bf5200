//! Run configuration: one TOML document describing a complete simulation.
//!
//! ```toml
//! seed = 1
//! trace = false
//!
//! [system]
//! num_units = 4
//! cores_per_unit = 16
//! clients_per_unit = 15
//! st_entries = 64
//! scheme = "syncron"
//!
//! [system.latency]
//! memory = "hbm"
//! link_ns_per_line = 40.0
//!
//! [workload]
//! kind = "data_structure"
//! structure = "queue"
//!
//! [workload.params]
//! ops_per_core = 50
//! ```
//!
//! Every key is optional; missing keys take the defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::topology::SystemConfig;
use crate::workloads::WorkloadSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub trace: bool,
    pub verify: bool,
    /// Output directory; none means print the stats to stdout only.
    pub out: Option<String>,
    pub system: SystemConfig,
    pub workload: WorkloadSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            trace: false,
            verify: false,
            out: None,
            system: SystemConfig::default(),
            workload: "microbench:lock:200".parse().expect("default workload parses"),
        }
    }
}

/// Keys accepted by [`RunConfig::set`], for flags and sweeps.
pub const KEYS: [&str; 11] = [
    "scheme",
    "workload",
    "units",
    "cores-per-unit",
    "clients-per-unit",
    "st-entries",
    "link-latency-ns",
    "memory",
    "seed",
    "ops",
    "interval",
];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(one_line(&e.to_string())))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.system.validate()
    }

    /// Applies one `key=value` override. Setting `cores-per-unit` keeps one
    /// spare core per unit unless `clients-per-unit` is set afterwards.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::Invalid(format!("bad value `{value}` for `{key}`"));
        let int = || value.parse::<u64>().map_err(|_| bad());
        let sys = &mut self.system;
        match key {
            "scheme" => sys.scheme = value.parse()?,
            "workload" => self.workload = value.parse()?,
            "units" => sys.num_units = int()? as usize,
            "cores-per-unit" => {
                sys.cores_per_unit = int()? as usize;
                sys.clients_per_unit = sys.cores_per_unit.saturating_sub(1).max(1);
            }
            "clients-per-unit" => sys.clients_per_unit = int()? as usize,
            "st-entries" => sys.st_entries = int()? as usize,
            "link-latency-ns" => {
                sys.latency.link_ns_per_line = value.parse::<f64>().map_err(|_| bad())?
            }
            "memory" => sys.latency.memory = value.parse()?,
            "seed" => self.seed = int()?,
            "ops" => match &mut self.workload {
                WorkloadSpec::Microbench { iterations, .. } => *iterations = int()?,
                WorkloadSpec::DataStructure { params, .. } => params.ops_per_core = int()?,
            },
            "interval" => match &mut self.workload {
                WorkloadSpec::Microbench { interval, .. } => *interval = int()?,
                WorkloadSpec::DataStructure { params, .. } => params.compute = int()?,
            },
            _ => {
                return Err(ConfigError::Invalid(format!(
                    "unknown key `{key}` (expected one of {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }
}

/// Parses `KEY=v1,v2,...`.
pub fn parse_sweep(arg: &str) -> Result<(String, Vec<String>), ConfigError> {
    let (k, vs) = arg
        .split_once('=')
        .ok_or_else(|| ConfigError::Invalid(format!("sweep `{arg}` is not KEY=v1,v2,...")))?;
    if !KEYS.contains(&k) {
        return Err(ConfigError::Invalid(format!("unknown sweep key `{k}`")));
    }
    let values: Vec<String> = vs.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
    if values.is_empty() {
        return Err(ConfigError::Invalid(format!("sweep `{k}` has no values")));
    }
    Ok((k.to_string(), values))
}

/// The cartesian product of all sweeps applied to `base`, first sweep
/// varying slowest.
pub fn expand(base: &RunConfig, sweeps: &[(String, Vec<String>)]) -> Result<Vec<RunConfig>, ConfigError> {
    let mut out = vec![base.clone()];
    for (key, values) in sweeps {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for cfg in &out {
            for v in values {
                let mut c = cfg.clone();
                c.set(key, v)?;
                next.push(c);
            }
        }
        out = next;
    }
    Ok(out)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
