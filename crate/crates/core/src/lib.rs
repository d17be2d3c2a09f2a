//! Early warning of grid faults from synchrophasor measurements.
//!
//! Three stages: online quartile outlier detection per station, fault
//! classification from autocorrelation features of the differenced signal,
//! and DTW/PAM clustering of stations by their fault response.

pub mod anomaly;
pub mod classify;
pub mod cluster;
pub mod error;
pub mod features;
pub mod ingest;
pub mod pipeline;
mod kv;
pub mod rng;
pub mod svg;

pub use error::{Error, Result};
