//! Experiment configuration, deterministic parallel execution, and result
//! emission.

pub mod records;
