//! Numerical kernels for inverse backscattering by small time-dependent
//! potentials in three space dimensions: wave propagation, progressive wave
//! expansion, Radon transforms, data synthesis and reconstruction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod arrayio;
pub mod born;
pub mod error;
pub mod field;
pub mod geometry;
pub mod inversion;
pub mod mollifier;
pub mod norms;
pub mod potential;
pub mod radon;
pub mod reduce;
pub mod scattering;
pub mod solver;

pub use error::{Error, Result};

/// `c_3 = 1 / (4 pi)`, the translation-representation constant in 3-D.
pub const C3: f64 = 1.0 / (4.0 * std::f64::consts::PI);
/// `c_3^- = -1 / (4 pi)`, the wave-profile constant in 3-D.
pub const C3_MINUS: f64 = -1.0 / (4.0 * std::f64::consts::PI);
