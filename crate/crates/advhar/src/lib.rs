//! Adversarial feature learning for human activity recognition from worn
//! inertial sensors: an activity-based user-discrimination task trained
//! against a windowed activity classifier, evaluated leave-one-person-out.

pub mod config;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod losses;
pub mod model;
pub mod nn;
pub mod pairset;
pub mod pipeline;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
