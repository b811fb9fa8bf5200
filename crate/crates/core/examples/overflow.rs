//! Hand-over-hand linked-list traversal with shrinking Synchronization
//! Tables. Overflowed variables fall back to memory-resident records.

use syncron::sim::{run, SimOptions};
use syncron::topology::{Scheme, SystemConfig};
use syncron::workloads::build;

fn main() {
    println!("{:>4} {:>10} {:>12} {:>14}   {}", "ST", "ops/us", "overflowed", "syncVar mem", "counters");
    for st in [1, 2, 4, 8, 16, 32, 64] {
        let mut cfg = SystemConfig::with_shape(4, 16, Scheme::Syncron);
        cfg.st_entries = st;
        let w = build(&cfg, &"linked_list".parse().unwrap(), 1).unwrap();
        let s = run(&cfg, w, SimOptions::default()).unwrap().stats;
        println!(
            "{st:>4} {:>10.3} {:>11.1}% {:>14}   {:?}",
            s.throughput,
            100.0 * s.overflowed_fraction,
            s.memory_accesses.sync_var,
            s.final_counters
        );
    }
}
