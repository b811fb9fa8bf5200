//! The five lock-based data structures under every scheme, with the final
//! shared-state digest to show all schemes compute the same result.

use syncron::sim::{run, SimOptions};
use syncron::topology::{Scheme, SystemConfig};
use syncron::workloads::{build, DsKind};

fn main() {
    for ds in DsKind::ALL {
        println!("{}", ds.name());
        let mut digests = Vec::new();
        for scheme in Scheme::ALL {
            let cfg = SystemConfig::with_shape(4, 16, scheme);
            let w = build(&cfg, &ds.name().parse().unwrap(), 1).unwrap();
            let s = run(&cfg, w, SimOptions::default()).unwrap().stats;
            println!(
                "  {:<8} {:>8.3} ops/us  {:>7} msgs  digest {}",
                scheme.name(),
                s.throughput,
                s.messages.total(),
                &s.digest[..12]
            );
            digests.push(s.digest);
        }
        assert!(digests.windows(2).all(|w| w[0] == w[1]));
    }
}
