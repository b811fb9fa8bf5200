//! Slowdown of each scheme relative to Ideal on the queue as the inter-unit
//! link gets slower. The sweep runs in parallel.

use syncron::config::{expand, parse_sweep, RunConfig};
use syncron::report::execute_all;
use syncron::topology::Scheme;

fn main() {
    let mut base = RunConfig::default();
    base.set("workload", "queue").unwrap();
    let sweeps = [
        parse_sweep("link-latency-ns=40,100,200,500").unwrap(),
        parse_sweep("scheme=syncron,flat,central,hier,ideal").unwrap(),
    ];
    let runs = expand(&base, &sweeps).unwrap();
    let outs: Vec<_> = execute_all(&runs).into_iter().map(Result::unwrap).collect();

    println!("{:>8} {:>9} {:>9} {:>9} {:>9}", "link ns", "syncron", "flat", "central", "hier");
    for chunk in outs.chunks(Scheme::ALL.len()) {
        let time = |s: Scheme| {
            chunk
                .iter()
                .find(|o| o.config.system.scheme == s)
                .unwrap()
                .stats
                .total_time_ps as f64
        };
        let ideal = time(Scheme::Ideal);
        println!(
            "{:>8} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            chunk[0].config.system.latency.link_ns_per_line,
            time(Scheme::Syncron) / ideal,
            time(Scheme::Flat) / ideal,
            time(Scheme::Central) / ideal,
            time(Scheme::Hier) / ideal
        );
    }
}
