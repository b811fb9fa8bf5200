//! The 18-byte message format and the opcode classes.

use syncron::messages::{classify_opcode, decode_message, encode_message, pack_core, Message, Opcode};

fn main() {
    let m = Message::new(0x4000_1100, Opcode::LockAcquireGlobal, 3, 0);
    let bytes = encode_message(&m).unwrap();
    println!("{m:?}");
    println!("  -> {}", bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" "));
    assert_eq!(decode_message(&bytes).unwrap(), m);

    // Overflow messages carry {global SE, local core} in the core field.
    let packed = pack_core(2, 5, 16);
    let o = Message::new(0x1100, Opcode::LockAcquireOverflow, packed, 0);
    println!("overflow request from SE2 core 5: core_id = {}", o.core_id);

    let too_big = Message::new(0, Opcode::LockAcquireLocal, 64, 0);
    println!("core id 64: {}", encode_message(&too_big).unwrap_err());

    println!("\n{:<32} {:>5}  class", "opcode", "index");
    for op in Opcode::ALL {
        println!("{:<32} {:>5}  {:?}", op.name(), op.index(), classify_opcode(op));
    }
}
