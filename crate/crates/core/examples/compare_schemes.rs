//! Lock, barrier, semaphore and condition-variable microbenchmarks under
//! every scheme. Usage: compare_schemes [interval] [units] [cores_per_unit]

use syncron::sim::{run, SimOptions};
use syncron::topology::{Scheme, SystemConfig};
use syncron::workloads::build;

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer")).collect();
    let interval = args.first().copied().unwrap_or(200);
    let units = args.get(1).copied().unwrap_or(4) as usize;
    let cores = args.get(2).copied().unwrap_or(16) as usize;

    println!("interval {interval}, {units} units x {cores} cores (throughput in ops/us)");
    println!("{:<10} {:>10} {:>10} {:>10} {:>10}", "scheme", "lock", "barrier", "semaphore", "condvar");
    for scheme in Scheme::ALL {
        let cfg = SystemConfig::with_shape(units, cores, scheme);
        let row: Vec<f64> = ["lock", "barrier", "semaphore", "condvar"]
            .iter()
            .map(|p| {
                let spec = format!("microbench:{p}:{interval}").parse().unwrap();
                let w = build(&cfg, &spec, 1).unwrap();
                run(&cfg, w, SimOptions::default()).unwrap().stats.throughput
            })
            .collect();
        println!(
            "{:<10} {:>10.2} {:>10.2} {:>10.2} {:>10.2}",
            scheme.name(),
            row[0],
            row[1],
            row[2],
            row[3]
        );
    }
}
