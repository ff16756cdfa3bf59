//! Configuration, sweeps, CSV output and figure bundles for `phase-pump-lab`.

pub mod config;
pub mod csv;
pub mod figures;
pub mod sweep;

pub use config::{parse_config, ConfigError, Mode, RunConfig, Section};
pub use sweep::{run_sweep, SweepSummary};
