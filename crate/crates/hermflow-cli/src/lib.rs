//! Batch front door for the fiber-geometry engine: seeded field generation,
//! geodesic integration with drift monitoring, the invariant verification
//! suite, and energy/criticality reports. All commands are callable
//! in-process; the `hermflow` binary is a thin argument parser on top.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

pub use commands::{cmd_energy, cmd_generate, cmd_integrate, cmd_verify};
pub use config::{QuadratureSpec, RunConfig, VelocitySpec};
pub use error::CliError;
