//! Simulation and analysis of the Hodgkin–Huxley cable equation under relay
//! (sliding-mode) feedback `I = −ρ sign(v − v*)`.
//!
//! * [`model`]: rate functions, membrane coefficients and their bounds.
//! * [`relay`]: the multivalued sign and its regularisation.
//! * [`numerics`]: meshes, the Neumann Laplacian and both time integrators.
//! * [`coupled`]: the block Picard iteration between potential and gating.
//! * [`sliding`]: the sufficient sliding condition and onset detection.
//! * [`presets`], [`config`], [`report`], [`plot`], [`cli`]: the driver.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod coupled;
pub mod error;
pub mod model;
pub mod numerics;
pub mod plot;
pub mod presets;
pub mod relay;
pub mod report;
pub mod sliding;

pub use error::{Error, Result};
