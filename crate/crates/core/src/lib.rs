//! Hyperspectral unmixing with a per-pixel, feature-guided choice between
//! linear and nonlinear mixing.
//!
//! Pipeline: [`abundance`] estimates constrained abundances, [`features`]
//! describes every pixel with six physical features, [`models`] supplies the
//! bilinear, post-nonlinear and Hapke residuals, and [`regime`] learns the
//! gate `ξ` and attention `α` that decide how much of which residual each
//! pixel receives. [`metrics`] scores reconstructions, [`synth`] builds
//! scenes with known regimes, and [`eval`] compares the learned model with
//! uniform baselines.

pub mod abundance;
pub mod config;
pub mod cube;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod manifest;
mod math;
pub mod metrics;
pub mod models;
pub mod regime;
pub mod synth;

pub use cube::{Cube, EndmemberSet, MapF64, PixelMatrix};
pub use error::{Error, Result};
pub use math::sigmoid;
