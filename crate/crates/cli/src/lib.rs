//! Command-line front end: CSV ingestion, JSON configuration and the
//! `geometry`, `fit`, `predict`, `evaluate` and `simulate` subcommands.
//!
//! Every command is a plain function over paths so it can be driven from
//! tests as well as from the binary.

pub mod commands;
pub mod config;
pub mod ingest;

pub use config::{Config, EvalConfig, IngestOptions};
