//! Shared numerical kernels: Bessel functions, adaptive quadrature, binary
//! entropy, and reproducible random streams.

mod bessel;
mod entropy;
mod quadrature;
mod rng;

pub use bessel::{bessel_j0, bessel_j1, bessel_j2};
pub use entropy::binary_entropy;
pub use quadrature::{integrate, QuadratureSpec};
pub use rng::RandomStream;

pub(crate) use bessel::{j0_deficit, j1_raw};

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    /// Argument was NaN or infinite where a finite value is required.
    #[error("argument must be finite, got {0}")]
    NonFinite(f64),
    /// A probability argument fell outside `[0, 1]`.
    #[error("probability must lie in [0, 1], got {0}")]
    ProbabilityRange(f64),
    /// Integration bounds were not an increasing finite pair.
    #[error("integration interval must satisfy a < b with finite endpoints, got [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
    /// A [`QuadratureSpec`] violated its invariants.
    #[error("quadrature spec invalid: {0}")]
    BadSpec(String),
    /// The subdivision budget ran out before the error target was met.
    /// The best estimate obtained so far is carried along with its error bound.
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (best estimate {estimate:e}, error bound {error_bound:e})"
    )]
    NoConvergence {
        estimate: f64,
        error_bound: f64,
        subdivisions: u32,
    },
}

impl NumericsError {
    /// Best integral estimate carried by a [`NumericsError::NoConvergence`].
    pub fn best_estimate(&self) -> Option<f64> {
        match self {
            NumericsError::NoConvergence { estimate, .. } => Some(*estimate),
            _ => None,
        }
    }
}
