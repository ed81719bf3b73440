//! CLI and HTTP service over the coverage and jitter engines.

pub mod api;
pub mod cli;
pub mod error;
pub mod jobs;
pub mod report;
pub mod store;
