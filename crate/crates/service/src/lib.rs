//! HTTP API and command-line front end for handover tuning sessions.

pub mod api;
pub mod cli;

pub use api::{router, AppState};
