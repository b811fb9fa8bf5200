//! Two units with two cores each contend for one lock homed in unit 0.
//! Prints every message and critical-section entry in time order.

use syncron::messages::decode_message;
use syncron::sim::trace::{Action, Actor};
use syncron::sim::{run, SimOptions};
use syncron::topology::{Scheme, SystemConfig};
use syncron::workloads::build;

fn main() {
    let mut cfg = SystemConfig::with_shape(2, 2, Scheme::Syncron);
    cfg.clients_per_unit = 2;
    let w = build(&cfg, &"microbench:lock:0:1".parse().unwrap(), 1).unwrap();
    let opts = SimOptions {
        trace: true,
        ..Default::default()
    };
    let r = run(&cfg, w, opts).unwrap();

    let mut wire = r.wire.iter();
    for t in &r.trace {
        let who = match t.actor {
            Actor::Core(g) => format!("core ({},{})", g / cfg.cores_per_unit, g % cfg.cores_per_unit),
            Actor::Se(s) => format!("SE{s}"),
        };
        let what = match t.action {
            Action::MsgSend => {
                let (_, bytes) = wire.next().unwrap();
                format!("sends {}", decode_message(bytes).unwrap().opcode.name())
            }
            Action::CsEnter => "enters the critical section".into(),
            Action::CsExit => "leaves the critical section".into(),
            _ => continue,
        };
        println!("{:>8.1} ns  {who:<10} {what}", t.time_ps as f64 / 1000.0);
    }
    println!(
        "\n{} messages, {} of them between units",
        r.stats.messages.total(),
        r.stats.messages.inter
    );
}
