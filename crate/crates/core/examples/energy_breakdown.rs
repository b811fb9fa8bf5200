//! Data movement and energy split into cache, network and memory, for the
//! whole run and for synchronization alone.

use syncron::sim::{run, SimOptions};
use syncron::topology::{Scheme, SystemConfig};
use syncron::workloads::build;

fn main() {
    let workload = std::env::args().nth(1).unwrap_or_else(|| "microbench:lock:200".into());
    println!("{workload}");
    println!(
        "{:<8} {:>10} {:>10} {:>12} {:>12} {:>12} {:>12} {:>8}",
        "scheme", "msgs in", "msgs out", "cache pJ", "network pJ", "memory pJ", "sync net pJ", "syncVar"
    );
    for scheme in Scheme::ALL {
        let cfg = SystemConfig::with_shape(4, 16, scheme);
        let w = build(&cfg, &workload.parse().unwrap(), 1).unwrap();
        let s = run(&cfg, w, SimOptions::default()).unwrap().stats;
        println!(
            "{:<8} {:>10} {:>10} {:>12.1} {:>12.1} {:>12.1} {:>12.1} {:>8}",
            scheme.name(),
            s.messages.intra,
            s.messages.inter,
            s.energy.cache,
            s.energy.network,
            s.energy.memory,
            s.sync_energy.network,
            s.memory_accesses.sync_var
        );
    }
}
