//! Command-line runner for `gibbs-core`: strict TOML configs, a binary
//! cache for spectral tables, CSV/JSON/SVG outputs with a checksummed run
//! manifest, and a bounded worker pool for independent jobs.

pub mod build;
pub mod cache;
pub mod commands;
pub mod config;
pub mod expr;
pub mod output;
pub mod plot;
