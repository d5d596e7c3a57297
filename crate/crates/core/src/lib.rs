//! Stress detection from wrist PPG.
//!
//! The pipeline windows a PPG series, turns each window into a 64×64 Morlet
//! scalogram, classifies it with a two-conv CNN, then shrinks the network
//! with structured pruning and int8 post-training quantization so it fits a
//! microcontroller-class flash/RAM budget. An integer-only engine runs the
//! quantized model inside a planned activation arena.
//!
//! - [`signal`] CSV ingest, synthetic PPG, windowing
//! - [`scalogram`] CWT, image rendering, augmentation, `SCLG` files
//! - [`model`] float kernels, architecture, `SDM1` files
//! - [`train`] loss, backprop, Adam, the epoch loop
//! - [`compress`] unit pruning, calibration, PTQ
//! - [`qengine`] int8 inference, memory planning, budget checks
//! - [`eval`] accuracy, PR curve, ROC-AUC

mod bytes;
pub mod compress;
pub mod error;
pub mod eval;
pub mod model;
pub mod qengine;
pub mod scalogram;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
pub use signal::Class;
