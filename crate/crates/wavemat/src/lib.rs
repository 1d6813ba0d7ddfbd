//! Files and command-line front end for `wavemat-core`: dataset CSVs,
//! model checkpoints, report CSVs, configuration files and run
//! directories.

pub mod checkpoint;
pub mod cli;
pub mod dataset_io;
mod error;
pub mod reports;
pub mod run;

pub use error::{Error, Result};
