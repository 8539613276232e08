//! Experiment front-end for the IATF relaying model: configuration,
//! sweeps and CSV reports. Powers are given in dBm here and converted to
//! watts once, in [`config::dbm_to_watts`].

pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use config::{Config, Point};
pub use error::{CliError, Result};
pub use sweep::{run_sweep, SweepKind, SweepRow, SweepSpec};
