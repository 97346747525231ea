//! Service, live stream and command line around the `antsteer` solver.

pub mod config;
pub mod service;
pub mod solve;
pub mod wire;

pub use service::{router, AppState, ServiceConfig};
pub use wire::{Control, WireKind, WireMessage};
