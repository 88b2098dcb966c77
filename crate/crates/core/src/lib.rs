//! Single-sensor activity recognition trained with multi-sensor data.
//!
//! Multi-sensor window features are clustered per sensor into a shared
//! representation space; a regression mapping learned from one sensor's
//! features into that space lets a classifier trained on the representation
//! run with only that sensor at test time. A two-stage SAMME ensemble can
//! combine it with the classifier trained directly on the single sensor.

pub mod classify;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod linalg;
pub mod mapping;
pub mod model_io;
pub mod optim;
pub mod representation;
pub mod seed;

pub use error::{Error, Result};
pub use seed::RngSeed;
