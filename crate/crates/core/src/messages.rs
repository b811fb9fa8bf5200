//! Synchronization messages exchanged between cores and SEs, and their
//! 18-byte wire encoding.
//!
//! Layout (little-endian):
//!
//! ```text
//! bytes  0..8   address of the synchronization variable
//! byte   8      opcode      (low 6 bits, high 2 bits reserved = 0)
//! byte   9      core id     (low 6 bits, high 2 bits reserved = 0)
//! bytes 10..18  message info
//! ```

use serde::{Deserialize, Serialize};

use crate::error::CodecError;

pub const MESSAGE_BYTES: usize = 18;
const SIX_BITS: u64 = 0x3f;

macro_rules! opcodes {
    ($($name:ident = $idx:expr => $text:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        #[repr(u8)]
        pub enum Opcode {
            $($name = $idx,)*
        }

        impl Opcode {
            pub const ALL: [Opcode; 38] = [$(Opcode::$name,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Opcode::$name => $text,)*
                }
            }
        }
    };
}

opcodes! {
    LockAcquireGlobal = 0 => "lock_acquire_global",
    LockAcquireLocal = 1 => "lock_acquire_local",
    LockReleaseGlobal = 2 => "lock_release_global",
    LockReleaseLocal = 3 => "lock_release_local",
    LockGrantGlobal = 4 => "lock_grant_global",
    LockGrantLocal = 5 => "lock_grant_local",
    LockAcquireOverflow = 6 => "lock_acquire_overflow",
    LockReleaseOverflow = 7 => "lock_release_overflow",
    LockGrantOverflow = 8 => "lock_grant_overflow",
    BarrierWaitGlobal = 9 => "barrier_wait_global",
    BarrierWaitLocalWithinUnit = 10 => "barrier_wait_local_within_unit",
    BarrierWaitLocalAcrossUnits = 11 => "barrier_wait_local_across_units",
    BarrierDepartGlobal = 12 => "barrier_depart_global",
    BarrierDepartLocal = 13 => "barrier_depart_local",
    BarrierWaitOverflow = 14 => "barrier_wait_overflow",
    BarrierDepartureOverflow = 15 => "barrier_departure_overflow",
    SemWaitGlobal = 16 => "sem_wait_global",
    SemWaitLocal = 17 => "sem_wait_local",
    SemGrantGlobal = 18 => "sem_grant_global",
    SemGrantLocal = 19 => "sem_grant_local",
    SemPostGlobal = 20 => "sem_post_global",
    SemPostLocal = 21 => "sem_post_local",
    SemWaitOverflow = 22 => "sem_wait_overflow",
    SemGrantOverflow = 23 => "sem_grant_overflow",
    SemPostOverflow = 24 => "sem_post_overflow",
    CondWaitGlobal = 25 => "cond_wait_global",
    CondWaitLocal = 26 => "cond_wait_local",
    CondSignalGlobal = 27 => "cond_signal_global",
    CondSignalLocal = 28 => "cond_signal_local",
    CondBroadGlobal = 29 => "cond_broad_global",
    CondBroadLocal = 30 => "cond_broad_local",
    CondGrantGlobal = 31 => "cond_grant_global",
    CondGrantLocal = 32 => "cond_grant_local",
    CondWaitOverflow = 33 => "cond_wait_overflow",
    CondSignalOverflow = 34 => "cond_signal_overflow",
    CondBroadOverflow = 35 => "cond_broad_overflow",
    CondGrantOverflow = 36 => "cond_grant_overflow",
    DecreaseIndexingCounter = 37 => "decrease_indexing_counter",
}

/// Synchronization primitive an opcode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Lock,
    Barrier,
    Semaphore,
    CondVar,
}

/// Semantic class of an opcode. Acquire-type messages block the issuing
/// core (`req_sync`); release-type ones are fire-and-forget (`req_async`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpClass {
    Acquire,
    Release,
    Grant,
    Depart,
    OverflowAcquire,
    OverflowRelease,
    OverflowGrant,
    Control,
}

/// Which network level a message travels on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Local,
    Global,
    Overflow,
    Other,
}

impl Opcode {
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(idx: u8) -> Result<Opcode, CodecError> {
        Opcode::ALL
            .get(idx as usize)
            .copied()
            .ok_or(CodecError::UnknownOpcode(idx))
    }

    pub fn primitive(self) -> Option<Primitive> {
        use Opcode::*;
        Some(match self {
            LockAcquireGlobal | LockAcquireLocal | LockReleaseGlobal | LockReleaseLocal
            | LockGrantGlobal | LockGrantLocal | LockAcquireOverflow | LockReleaseOverflow
            | LockGrantOverflow => Primitive::Lock,
            BarrierWaitGlobal | BarrierWaitLocalWithinUnit | BarrierWaitLocalAcrossUnits
            | BarrierDepartGlobal | BarrierDepartLocal | BarrierWaitOverflow
            | BarrierDepartureOverflow => Primitive::Barrier,
            SemWaitGlobal | SemWaitLocal | SemGrantGlobal | SemGrantLocal | SemPostGlobal
            | SemPostLocal | SemWaitOverflow | SemGrantOverflow | SemPostOverflow => {
                Primitive::Semaphore
            }
            CondWaitGlobal | CondWaitLocal | CondSignalGlobal | CondSignalLocal
            | CondBroadGlobal | CondBroadLocal | CondGrantGlobal | CondGrantLocal
            | CondWaitOverflow | CondSignalOverflow | CondBroadOverflow | CondGrantOverflow => {
                Primitive::CondVar
            }
            DecreaseIndexingCounter => return None,
        })
    }

    pub fn level(self) -> Level {
        let name = self.name();
        if name.ends_with("_overflow") {
            Level::Overflow
        } else if name.contains("_local") {
            Level::Local
        } else if name.ends_with("_global") {
            Level::Global
        } else {
            Level::Other
        }
    }

    /// The overflow-protocol counterpart of a core-issued local opcode.
    pub fn overflow_variant(self) -> Option<Opcode> {
        use Opcode::*;
        Some(match self {
            LockAcquireLocal => LockAcquireOverflow,
            LockReleaseLocal => LockReleaseOverflow,
            LockGrantLocal => LockGrantOverflow,
            BarrierWaitLocalWithinUnit | BarrierWaitLocalAcrossUnits => BarrierWaitOverflow,
            BarrierDepartLocal => BarrierDepartureOverflow,
            SemWaitLocal => SemWaitOverflow,
            SemPostLocal => SemPostOverflow,
            SemGrantLocal => SemGrantOverflow,
            CondWaitLocal => CondWaitOverflow,
            CondSignalLocal => CondSignalOverflow,
            CondBroadLocal => CondBroadOverflow,
            CondGrantLocal => CondGrantOverflow,
            _ => return None,
        })
    }
}

pub fn classify_opcode(op: Opcode) -> OpClass {
    use Opcode::*;
    match op {
        LockAcquireGlobal | LockAcquireLocal | BarrierWaitGlobal | BarrierWaitLocalWithinUnit
        | BarrierWaitLocalAcrossUnits | SemWaitGlobal | SemWaitLocal | CondWaitGlobal
        | CondWaitLocal => OpClass::Acquire,
        LockReleaseGlobal | LockReleaseLocal | SemPostGlobal | SemPostLocal
        | CondSignalGlobal | CondSignalLocal | CondBroadGlobal | CondBroadLocal => {
            OpClass::Release
        }
        LockGrantGlobal | LockGrantLocal | SemGrantGlobal | SemGrantLocal | CondGrantGlobal
        | CondGrantLocal => OpClass::Grant,
        BarrierDepartGlobal | BarrierDepartLocal => OpClass::Depart,
        LockAcquireOverflow | BarrierWaitOverflow | SemWaitOverflow | CondWaitOverflow => {
            OpClass::OverflowAcquire
        }
        LockReleaseOverflow | SemPostOverflow | CondSignalOverflow | CondBroadOverflow => {
            OpClass::OverflowRelease
        }
        LockGrantOverflow | BarrierDepartureOverflow | SemGrantOverflow | CondGrantOverflow => {
            OpClass::OverflowGrant
        }
        DecreaseIndexingCounter => OpClass::Control,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub addr: u64,
    pub opcode: Opcode,
    /// Local core id, SE id, or a packed {SE, local core} pair on overflow
    /// messages.
    pub core_id: u8,
    pub info: u64,
}

impl Message {
    pub fn new(addr: u64, opcode: Opcode, core_id: u8, info: u64) -> Self {
        Message {
            addr,
            opcode,
            core_id,
            info,
        }
    }

    pub fn class(&self) -> OpClass {
        classify_opcode(self.opcode)
    }
}

/// Packs `{global SE id, local core id}` into a core-id field. The packing
/// is the core's global index, so it fits 6 bits whenever the whole system
/// has at most 64 cores.
pub fn pack_core(se: usize, local: usize, cores_per_unit: usize) -> u8 {
    (se * cores_per_unit + local) as u8
}

pub fn unpack_core(core_id: u8, cores_per_unit: usize) -> (usize, usize) {
    let g = core_id as usize;
    (g / cores_per_unit, g % cores_per_unit)
}

pub fn encode_message(m: &Message) -> Result<[u8; MESSAGE_BYTES], CodecError> {
    let op = m.opcode.index() as u64;
    if op > SIX_BITS {
        return Err(CodecError::FieldOverflow {
            field: "opcode",
            value: op,
        });
    }
    if m.core_id as u64 > SIX_BITS {
        return Err(CodecError::FieldOverflow {
            field: "core_id",
            value: m.core_id as u64,
        });
    }
    let mut out = [0u8; MESSAGE_BYTES];
    out[0..8].copy_from_slice(&m.addr.to_le_bytes());
    out[8] = op as u8;
    out[9] = m.core_id;
    out[10..18].copy_from_slice(&m.info.to_le_bytes());
    Ok(out)
}

pub fn decode_message(bytes: &[u8]) -> Result<Message, CodecError> {
    if bytes.len() != MESSAGE_BYTES {
        return Err(CodecError::Length(bytes.len()));
    }
    for idx in [8, 9] {
        if bytes[idx] & 0xc0 != 0 {
            return Err(CodecError::ReservedBits(idx));
        }
    }
    let mut word = [0u8; 8];
    word.copy_from_slice(&bytes[0..8]);
    let addr = u64::from_le_bytes(word);
    word.copy_from_slice(&bytes[10..18]);
    let info = u64::from_le_bytes(word);
    Ok(Message {
        addr,
        opcode: Opcode::from_index(bytes[8])?,
        core_id: bytes[9],
        info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thirty_eight_opcodes_in_six_bits() {
        assert_eq!(Opcode::ALL.len(), 38);
        for (i, op) in Opcode::ALL.iter().enumerate() {
            assert_eq!(op.index() as usize, i);
            assert!(op.index() < 64);
            assert_eq!(Opcode::from_index(i as u8).unwrap(), *op);
        }
        assert_eq!(Opcode::from_index(38), Err(CodecError::UnknownOpcode(38)));
    }

    #[test]
    fn all_zero_message() {
        let m = Message::new(0, Opcode::from_index(0).unwrap(), 0, 0);
        assert_eq!(encode_message(&m).unwrap(), [0u8; 18]);
    }

    #[test]
    fn address_is_little_endian() {
        let m = Message::new(0x0102030405060708, Opcode::LockAcquireLocal, 5, 9);
        let b = encode_message(&m).unwrap();
        assert_eq!(&b[0..8], &[8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(b[8], 1);
        assert_eq!(b[9], 5);
        assert_eq!(b[10], 9);
    }

    #[test]
    fn core_id_overflow_rejected() {
        let m = Message::new(0, Opcode::LockAcquireLocal, 64, 0);
        assert!(matches!(
            encode_message(&m),
            Err(CodecError::FieldOverflow { field: "core_id", .. })
        ));
    }

    #[test]
    fn decode_errors() {
        assert_eq!(decode_message(&[0u8; 17]), Err(CodecError::Length(17)));
        let mut b = [0u8; 18];
        b[9] = 0x40;
        assert_eq!(decode_message(&b), Err(CodecError::ReservedBits(9)));
        b[9] = 0;
        b[8] = 0x80;
        assert_eq!(decode_message(&b), Err(CodecError::ReservedBits(8)));
        b[8] = 50;
        assert_eq!(decode_message(&b), Err(CodecError::UnknownOpcode(50)));
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_opcode(Opcode::LockAcquireLocal), OpClass::Acquire);
        assert_eq!(classify_opcode(Opcode::SemPostGlobal), OpClass::Release);
        assert_eq!(
            classify_opcode(Opcode::DecreaseIndexingCounter),
            OpClass::Control
        );
        assert_eq!(classify_opcode(Opcode::CondBroadLocal), OpClass::Release);
        assert_eq!(
            classify_opcode(Opcode::BarrierDepartureOverflow),
            OpClass::OverflowGrant
        );
    }

    #[test]
    fn overflow_variants_are_overflow_class() {
        for op in Opcode::ALL {
            if let Some(ov) = op.overflow_variant() {
                assert_eq!(ov.level(), Level::Overflow, "{op:?}");
                let base = classify_opcode(op);
                let expect = match base {
                    OpClass::Acquire => OpClass::OverflowAcquire,
                    OpClass::Release => OpClass::OverflowRelease,
                    OpClass::Grant | OpClass::Depart => OpClass::OverflowGrant,
                    other => panic!("unexpected base class {other:?}"),
                };
                assert_eq!(classify_opcode(ov), expect, "{op:?}");
                assert_eq!(ov.primitive(), op.primitive());
            }
        }
    }

    #[test]
    fn levels() {
        assert_eq!(Opcode::BarrierWaitLocalAcrossUnits.level(), Level::Local);
        assert_eq!(Opcode::LockGrantGlobal.level(), Level::Global);
        assert_eq!(Opcode::DecreaseIndexingCounter.level(), Level::Other);
    }

    /// Layout written out byte by byte, independent of the slice-copy
    /// implementation above.
    fn reference_encode(addr: u64, op: u8, core: u8, info: u64) -> Vec<u8> {
        let mut v = Vec::with_capacity(18);
        for i in 0..8 {
            v.push(((addr >> (8 * i)) & 0xff) as u8);
        }
        v.push(op);
        v.push(core);
        for i in 0..8 {
            v.push(((info >> (8 * i)) & 0xff) as u8);
        }
        v
    }

    proptest! {
        #[test]
        fn round_trip(addr: u64, op in 0u8..38, core in 0u8..64, info: u64) {
            let m = Message::new(addr, Opcode::from_index(op).unwrap(), core, info);
            let bytes = encode_message(&m).unwrap();
            prop_assert_eq!(bytes.to_vec(), reference_encode(addr, op, core, info));
            prop_assert_eq!(decode_message(&bytes).unwrap(), m);
        }
    }
}
