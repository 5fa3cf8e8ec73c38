//! Discrete-event simulator of a hybrid cloud-edge offloading framework
//! over an information-centric network.

pub mod compute;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod ndn;
pub mod policy;
pub mod sim;
pub mod sync;
pub mod topology;
pub mod workload;
