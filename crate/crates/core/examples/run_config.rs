//! Drives a run from a TOML document and writes the standard output files
//! (stats.json, stats.csv, trace.bin, trace.jsonl) to a directory.
//! Usage: run_config [config.toml] [out_dir]

use std::path::PathBuf;

use syncron::config::RunConfig;
use syncron::report::{execute, write_outputs};

const EXAMPLE: &str = r#"
seed = 7
trace = true
verify = true

[system]
num_units = 2
cores_per_unit = 8
clients_per_unit = 7
st_entries = 16
scheme = "syncron"

[system.latency]
memory = "hmc"
link_ns_per_line = 100.0

[workload]
kind = "data_structure"
structure = "hash_table"

[workload.params]
ops_per_core = 40
buckets = 32
"#;

fn main() {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(path) => RunConfig::load(path.as_ref()).unwrap_or_else(|e| panic!("{e}")),
        None => RunConfig::from_toml(EXAMPLE).unwrap(),
    };
    let out = execute(&cfg).unwrap();
    let dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("syncron-run"));
    write_outputs(&dir, std::slice::from_ref(&out)).unwrap();

    println!("{}", cfg.to_toml());
    println!("throughput {:.3} ops/us over {:.1} ns", out.stats.throughput, out.stats.total_time_ns);
    if let Some(report) = &out.verification {
        print!("{report}");
    }
    println!("wrote {}", dir.display());
}
