//! Run orchestration and output files.
//!
//! * `stats.json`: `{schema_version, config, stats, verification}`. The
//!   embedded config omits `out` so that a run is byte-identical wherever
//!   it is written.
//! * `stats.csv`: a header row of [`CSV_COLUMNS`] then one row per run.
//! * `trace.bin`: every synchronization message in send order, 18 bytes
//!   each in the wire layout of [`crate::messages`]. The i-th record is the
//!   i-th `msg_send` entry of `trace.jsonl`.
//! * `trace.jsonl`: one [`TraceRecord`] per line.
//!
//! A sweep writes `stats.csv` with one row per run at the top of the output
//! directory and each run's other files under `run-<index>/`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::SimError;
use crate::messages::MESSAGE_BYTES;
use crate::sim::stats::Stats;
use crate::sim::trace::{self, TraceRecord};
use crate::sim::{run, SimOptions};
use crate::verifier::{verify_all, Report};
use crate::workloads::build;

pub const SCHEMA_VERSION: u32 = 1;

/// Columns of `stats.csv`, in order. Energies are in pJ.
pub const CSV_COLUMNS: [&str; 31] = [
    "scheme",
    "workload",
    "units",
    "cores_per_unit",
    "clients_per_unit",
    "st_entries",
    "link_ns_per_line",
    "memory",
    "seed",
    "total_time_ns",
    "throughput_ops_per_us",
    "workload_ops",
    "lock_ops",
    "barrier_ops",
    "semaphore_ops",
    "condvar_ops",
    "messages_intra",
    "messages_inter",
    "bytes_intra",
    "bytes_inter",
    "mem_local",
    "mem_remote",
    "mem_sync_var",
    "energy_cache_pj",
    "energy_network_pj",
    "energy_memory_pj",
    "sync_energy_network_pj",
    "st_occupancy_avg",
    "st_occupancy_max",
    "overflowed_fraction",
    "verified",
];

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub stats: Stats,
    pub verification: Option<Report>,
    pub trace: Vec<TraceRecord>,
    pub wire: Vec<(u64, [u8; MESSAGE_BYTES])>,
}

impl RunOutput {
    pub fn verified(&self) -> Option<bool> {
        self.verification.as_ref().map(Report::passed)
    }
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let workload = build(&cfg.system, &cfg.workload, cfg.seed)?;
    let expected_ops = workload.expected.ops;
    let opts = SimOptions {
        trace: cfg.trace || cfg.verify,
        ..SimOptions::default()
    };
    let r = run(&cfg.system, workload, opts)?;
    let verification = cfg.verify.then(|| verify_all(&r.trace, expected_ops));
    Ok(RunOutput {
        config: cfg.clone(),
        stats: r.stats,
        verification,
        trace: if cfg.trace { r.trace } else { Vec::new() },
        wire: if cfg.trace { r.wire } else { Vec::new() },
    })
}

/// Runs every configuration in parallel; results keep the input order.
pub fn execute_all(cfgs: &[RunConfig]) -> Vec<Result<RunOutput, SimError>> {
    cfgs.par_iter().map(execute).collect()
}

#[derive(Serialize)]
struct StatsFile<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    stats: &'a Stats,
    verification: Option<&'a Report>,
}

pub fn stats_json(out: &RunOutput) -> String {
    let config = RunConfig {
        out: None,
        ..out.config.clone()
    };
    let file = StatsFile {
        schema_version: SCHEMA_VERSION,
        config: &config,
        stats: &out.stats,
        verification: out.verification.as_ref(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("stats serialize");
    s.push('\n');
    s
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

pub fn csv_row(out: &RunOutput) -> String {
    let c = &out.config.system;
    let s = &out.stats;
    let occ_avg = mean(s.st_occupancy.iter().map(|o| o.avg));
    let occ_max = s.st_occupancy.iter().map(|o| o.max).fold(0.0, f64::max);
    let verified = match out.verified() {
        None => "",
        Some(true) => "pass",
        Some(false) => "fail",
    };
    let fields: Vec<String> = vec![
        c.scheme.to_string(),
        out.config.workload.to_string(),
        c.num_units.to_string(),
        c.cores_per_unit.to_string(),
        c.clients_per_unit.to_string(),
        c.st_entries.to_string(),
        c.latency.link_ns_per_line.to_string(),
        c.latency.memory.to_string(),
        out.config.seed.to_string(),
        s.total_time_ns.to_string(),
        format!("{:.6}", s.throughput),
        s.workload_ops.to_string(),
        s.sync_ops.lock.to_string(),
        s.sync_ops.barrier.to_string(),
        s.sync_ops.semaphore.to_string(),
        s.sync_ops.condvar.to_string(),
        s.messages.intra.to_string(),
        s.messages.inter.to_string(),
        s.bytes.intra.to_string(),
        s.bytes.inter.to_string(),
        s.memory_accesses.local.to_string(),
        s.memory_accesses.remote.to_string(),
        s.memory_accesses.sync_var.to_string(),
        s.energy.cache.to_string(),
        s.energy.network.to_string(),
        s.energy.memory.to_string(),
        s.sync_energy.network.to_string(),
        format!("{occ_avg:.6}"),
        format!("{occ_max:.6}"),
        format!("{:.6}", s.overflowed_fraction),
        verified.to_string(),
    ];
    debug_assert_eq!(fields.len(), CSV_COLUMNS.len());
    fields.join(",")
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn trace_bin(out: &RunOutput) -> Vec<u8> {
    out.wire.iter().flat_map(|(_, b)| b.iter().copied()).collect()
}

fn write_run(dir: &Path, out: &RunOutput) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("stats.json"), stats_json(out))?;
    if out.config.trace {
        fs::write(dir.join("trace.bin"), trace_bin(out))?;
        fs::write(dir.join("trace.jsonl"), trace::to_jsonl(&out.trace))?;
    }
    Ok(())
}

/// Writes one run's files, or a sweep's CSV plus per-run directories.
pub fn write_outputs(dir: &Path, outs: &[RunOutput]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = csv_header();
    csv.push('\n');
    for o in outs {
        csv.push_str(&csv_row(o));
        csv.push('\n');
    }
    fs::write(dir.join("stats.csv"), csv)?;
    match outs {
        [one] => write_run(dir, one),
        many => many
            .iter()
            .enumerate()
            .try_for_each(|(i, o)| write_run(&dir.join(format!("run-{i}")), o)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::messages::decode_message;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.set("units", "2").unwrap();
        c.set("cores-per-unit", "4").unwrap();
        c.set("workload", "microbench:lock:50:4").unwrap();
        c
    }

    #[test]
    fn json_embeds_config_and_schema() {
        let out = execute(&small()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&stats_json(&out)).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["config"]["system"]["num_units"], 2);
        assert_eq!(v["stats"]["workload_ops"], 24);
        assert!(v["verification"].is_null());
    }

    #[test]
    fn csv_row_matches_header() {
        let out = execute(&small()).unwrap();
        let row = csv_row(&out);
        assert_eq!(row.split(',').count(), CSV_COLUMNS.len());
        assert!(row.starts_with("syncron,microbench:lock:50:4,2,4,3,64,40,hbm,1,"));
    }

    #[test]
    fn trace_bin_decodes() {
        let mut c = small();
        c.trace = true;
        let out = execute(&c).unwrap();
        let bin = trace_bin(&out);
        assert_eq!(bin.len(), out.wire.len() * MESSAGE_BYTES);
        for chunk in bin.chunks(MESSAGE_BYTES) {
            decode_message(chunk).unwrap();
        }
    }

    #[test]
    fn verify_flag_attaches_report() {
        let mut c = small();
        c.verify = true;
        let out = execute(&c).unwrap();
        assert_eq!(out.verified(), Some(true));
        assert!(out.trace.is_empty());
        assert!(csv_row(&out).ends_with(",pass"));
    }

    #[test]
    fn sweep_outputs() {
        let mut c = small();
        c.trace = true;
        let runs = crate::config::expand(&c, &[crate::config::parse_sweep("seed=1,2").unwrap()]).unwrap();
        let outs: Vec<RunOutput> = execute_all(&runs).into_iter().map(Result::unwrap).collect();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &outs).unwrap();
        let csv = fs::read_to_string(dir.path().join("stats.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(dir.path().join("run-1/trace.jsonl").exists());
        assert!(dir.path().join("run-0/stats.json").exists());
    }
}
