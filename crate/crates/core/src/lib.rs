//! Contamination-robust graph-level anomaly detection.
//!
//! A graph autoencoder is trained on a possibly contaminated set of
//! graphs by alternating reconstruction steps with a contrastive
//! denoising step that pulls encoder outputs towards anchors taken from
//! pseudo-normal graphs. Graphs are then scored by how poorly a small
//! head reconstructs their aggregated reconstruction errors.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! live in the companion `denoise-cli` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod anchor;
pub mod autodiff;
pub mod discriminator;
pub mod error;
pub mod graph;
pub mod losses;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod protocol;
pub mod scorer;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{Dataset, Graph, Label};
pub use matrix::Matrix;

/// Floor for norms, log arguments and the sigmoid clamp.
pub const EPS: f64 = 1e-8;
