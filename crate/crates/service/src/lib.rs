//! HTTP API and command-line entry points for the ScatterUQ engine.

pub mod api;
pub mod cli;

pub use api::{router, AppState, SharedState};
