//! Radio-resource side-channel toolkit.
//!
//! The crate is organised along the attack chain:
//!
//! * [`radio`]: cell, grant and bitmap value types.
//! * [`profiles`] and [`sim`]: application traffic generators and a
//!   subframe-stepped MAC scheduler that emits a plaintext DCI log.
//! * [`sniffer`]: passive reconstruction of a victim's UL/DL throughput
//!   from that log.
//! * [`pipeline`]: trace cleaning, outlier capping and feature extraction.
//! * [`ensemble`]: Random Forest and Extra Trees classifiers with metrics.
//! * [`experiment`]: the seeded end-to-end synthetic corpus and evaluation.

pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod pipeline;
pub mod profiles;
pub mod radio;
pub mod seed;
pub mod sim;
pub mod sniffer;

pub use error::{Error, Result};
