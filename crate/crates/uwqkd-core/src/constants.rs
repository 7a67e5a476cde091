//! Physical constants shared across the noise and Monte Carlo modules.
//!
//! Pinned to the CODATA exact values so that results are bit-reproducible.

/// Planck's constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Speed of light in vacuum in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
