//! Time-weighted Synchronization Table occupancy per SE for a
//! single-variable microbenchmark and for the fine-grained linked list.

use syncron::sim::{run, SimOptions};
use syncron::topology::{Scheme, SystemConfig};
use syncron::workloads::build;

fn main() {
    let cfg = SystemConfig::with_shape(4, 16, Scheme::Syncron);
    for workload in ["microbench:lock:200", "microbench:barrier:200", "hash_table", "linked_list"] {
        let w = build(&cfg, &workload.parse().unwrap(), 1).unwrap();
        let s = run(&cfg, w, SimOptions::default()).unwrap().stats;
        println!("{workload}");
        for (se, o) in s.st_occupancy.iter().enumerate() {
            println!(
                "  SE{se}: avg {:6.2}%  max {:6.2}% ({} of {} entries)",
                100.0 * o.avg,
                100.0 * o.max,
                (o.max * cfg.st_entries as f64).round(),
                cfg.st_entries
            );
        }
    }
}
