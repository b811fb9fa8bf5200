//! Discrete-event model of SynCron-style hardware synchronization for
//! near-data-processing systems.

pub mod baselines;
pub mod config;
pub mod engine;
pub mod error;
pub mod messages;
pub mod report;
pub mod sim;
pub mod sync_table;
pub mod topology;
pub mod verifier;
pub mod workloads;
