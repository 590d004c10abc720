//! Command-line and HTTP front ends over the pipeline crates.

pub mod cli;
pub mod service;
pub mod store;
