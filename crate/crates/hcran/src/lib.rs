//! Experiment harness for `hcran-core`: experiment files, preset sweeps,
//! CSV and JSON output.
//!
//! [`config::ExperimentSpec`] is what a user writes. Resolving it gives an
//! [`config::Experiment`] with every default filled in, and
//! [`experiments::run_experiment`] turns that into CSV [`io::Table`]s.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod policy;

pub use config::{Experiment, ExperimentSpec, Preset, Sweep, SweepVar};
pub use error::{HarnessError, Result};
pub use experiments::{optimize_one, run_experiment};
