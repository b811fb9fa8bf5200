//! Runs a workload with tracing, checks it with every monitor, then shows
//! what a dropped grant looks like to the simulator and to the monitors.

use syncron::sim::trace::Action;
use syncron::sim::{run, FaultPlan, SimOptions};
use syncron::topology::{Scheme, SystemConfig};
use syncron::verifier::{check_mutual_exclusion, check_termination, verify_all};
use syncron::workloads::build;

fn main() {
    let cfg = SystemConfig::with_shape(4, 8, Scheme::Syncron);
    let spec = "microbench:condvar:50:10".parse().unwrap();
    let traced = SimOptions {
        trace: true,
        ..Default::default()
    };

    let w = build(&cfg, &spec, 1).unwrap();
    let ops = w.expected.ops;
    let r = run(&cfg, w, traced.clone()).unwrap();
    println!("{} trace records", r.trace.len());
    print!("{}", verify_all(&r.trace, ops));

    // A grant lost in the network leaves a core blocked forever.
    let lossy = SimOptions {
        faults: FaultPlan {
            drop_core_grant: Some(5),
        },
        ..traced
    };
    let w = build(&cfg, &spec, 1).unwrap();
    match run(&cfg, w, lossy) {
        Ok(_) => println!("\nunexpectedly finished"),
        Err(e) => println!("\nwith a dropped grant: {}", e.to_string().lines().next().unwrap()),
    }

    // Tampering with a clean trace: shift one critical section onto another.
    let mut bad = r.trace.clone();
    let enters: Vec<usize> = (0..bad.len()).filter(|&i| bad[i].action == Action::CsEnter).collect();
    bad[enters[1]].time_ps = bad[enters[0]].time_ps;
    println!("{}", check_mutual_exclusion(&bad));
    // Cut the trace in half: half the requests never see their grants.
    println!("{}", check_termination(&r.trace[..r.trace.len() / 2], ops));
}
