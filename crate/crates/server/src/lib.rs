//! HTTP API and command line over the `classalg` engine.

pub mod api;
pub mod cli;
pub mod ops;
