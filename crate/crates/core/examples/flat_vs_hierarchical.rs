//! Hierarchical SynCron against its flat variant, where every request goes
//! straight to the variable's Master SE.

use syncron::sim::{run, SimOptions};
use syncron::topology::{Scheme, SystemConfig};
use syncron::workloads::build;

fn throughput(scheme: Scheme, link_ns: f64, workload: &str) -> f64 {
    let mut cfg = SystemConfig::with_shape(4, 16, scheme);
    cfg.latency.link_ns_per_line = link_ns;
    let w = build(&cfg, &workload.parse().unwrap(), 1).unwrap();
    run(&cfg, w, SimOptions::default()).unwrap().stats.throughput
}

fn main() {
    println!("{:<12} {:>8} {:>10} {:>10} {:>8}", "workload", "link ns", "syncron", "flat", "ratio");
    for workload in ["queue", "stack", "hash_table", "linked_list"] {
        for link in [40.0, 500.0] {
            let h = throughput(Scheme::Syncron, link, workload);
            let f = throughput(Scheme::Flat, link, workload);
            println!("{workload:<12} {link:>8} {h:>10.3} {f:>10.3} {:>8.3}", h / f);
        }
    }
}
