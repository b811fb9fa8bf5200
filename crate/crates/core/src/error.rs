use thiserror::Error;

use crate::messages::Opcode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("address {addr:#x} outside the {total:#x}-byte system address space")]
    AddressOutOfRange { addr: u64, total: u64 },
    #[error("core {id} out of range (system has {total} cores)")]
    CoreOutOfRange { id: usize, total: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("field `{field}` value {value} does not fit in 6 bits")]
    FieldOverflow { field: &'static str, value: u64 },
    #[error("expected 18 bytes, got {0}")]
    Length(usize),
    #[error("reserved bits set in byte {0}")]
    ReservedBits(usize),
    #[error("unknown opcode index {0}")]
    UnknownOpcode(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("address {0:#x} already has an occupied entry")]
    DuplicateReserve(u64),
    #[error("address {0:#x} is not resident")]
    NotResident(u64),
    #[error("entry for {0:#x} still has waiters")]
    WaitersPresent(u64),
    #[error("indexing counter {index} decremented below zero")]
    CounterUnderflow { index: usize },
}

/// A violation of the synchronization protocol. Carries enough context to
/// locate the offending message in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("protocol error at SE {se} on {addr:#x} ({opcode:?}): {reason}")]
pub struct ProtocolError {
    pub se: usize,
    pub addr: u64,
    pub opcode: Opcode,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("deadlock at t={time_ps}ps: {blocked} core(s) blocked\n{dump}")]
    Deadlock {
        time_ps: u64,
        blocked: usize,
        dump: String,
    },
    #[error("simulation did not drain: {0}")]
    Undrained(String),
}
