//! Experiment drivers, configuration, data ingestion and result emission
//! for Volterra-signature learning studies, plus ad-hoc signature and
//! Gram-matrix computation. The numerics live in `vsig-core`; this crate
//! carries everything that touches files, JSON and the CLI.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod report;

pub use error::{AppError, Result};
