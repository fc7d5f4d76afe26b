//! Analytical benchmarking and design-space exploration for customized DNN
//! accelerators on FPGAs.
//!
//! Three architecture paradigms are modeled: a layer-dedicated pipeline
//! (one stage per layer), a reusable generic MAC array, and a hybrid that
//! pipelines the first SP layers and runs the rest on a generic structure.
//! The hybrid design space is searched with a two-level optimizer: particle
//! swarm over resource-allocation vectors on top of per-structure local
//! optimizers.

pub mod error;
pub mod generic;
pub mod hybrid;
pub mod model;
pub mod pipeline;
pub mod profile;
pub mod report;
pub mod resource;
pub mod zoo;

pub use error::{Error, Result};
