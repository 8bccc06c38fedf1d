//! Planning toolkit for capacity expansion of multi-carrier energy systems
//! under climate uncertainty.
//!
//! The crate is organized along the pipeline:
//!
//! * [`model`] — the planning instance, its file formats and validation,
//! * [`climate`] — multi-year climate samples,
//! * [`cluster`] — selection of representative periods with probabilities,
//! * [`program`] — extensive-form LP construction and solution extraction,
//! * [`benders`] — stabilized decomposition into top and period problems,
//! * [`sim`] — Monte-Carlo adequacy simulation of a finished plan,
//! * [`runconfig`] — the run configuration shared by the CLI commands.

pub mod benders;
pub mod climate;
pub mod cluster;
pub mod error;
pub mod model;
pub mod model_io;
pub mod program;
pub mod runconfig;
pub mod series;
pub mod sim;

pub use error::CoreError;
