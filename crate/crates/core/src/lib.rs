//! 2D acoustic seismic simulation toolkit.
//!
//! Synthesizes paired clean / gas-chimney-degraded seismic images with
//! pixel-level chimney masks from velocity models, and evaluates
//! detection/enhancement outputs.

pub mod chimney;
pub mod config;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod rtm;
pub mod solver;
pub mod synth;
pub mod wavelet;

pub use error::Error;
pub use grid::{Grid2D, MaskGrid, VelocityModel};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
