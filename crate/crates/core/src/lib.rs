//! Material classification from full-waveform flash-lidar returns.
//!
//! This crate is `no_std` (with `alloc`) and holds every algorithm: the
//! parametric return-pulse simulator, a from-scratch random forest, a
//! temporal convolutional network with hand-written backpropagation, and
//! the IOU metrics used to score them. File formats, configuration files
//! and the command-line tool live in the `wavemat` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ablation;
pub mod config;
mod error;
pub mod experiment;
pub mod forest;
pub mod metrics;
pub mod rng;
pub mod semantic;
pub mod simgen;
pub mod tcn;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    split_by_repetition, CaptureMeta, ClassId, Dataset, LabeledSample, MaterialClass, PowerMode,
    Waveform, WAVEFORM_LEN,
};
