//! Background-light and detector-noise budgets.
//!
//! Solar (or lunar) photons filtering down the water column are the dominant
//! noise source; dark counts add a floor that survives even at depth. The
//! receiver sees `n_N = n_B/2 + n_D` per detector: half the background,
//! because a polarizing beam splitter routes an unpolarized photon to either
//! detector with equal probability, plus the dark counts of that detector.
//!
//! Relay links accumulate background at every hop. Each relay re-transmits
//! what it detected, so noise picked up `i` hops back arrives attenuated by
//! `γ^i` and the receiver-side total is a geometric series in the hop
//! transmittance.

use crate::channel::{path_loss, ChannelError, LinkGeometry, WaterType};
use crate::constants::{PLANCK, SPEED_OF_LIGHT};

use std::f64::consts::PI;

/// Errors raised by the noise-budget operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NoiseError {
    /// A hop transmittance used as a geometric ratio must be a probability.
    #[error("hop transmittance must lie in [0, 1], got {0}")]
    GammaRange(f64),
    /// A parameter violated a documented invariant.
    #[error("invalid {field}: {message}")]
    InvalidParameter {
        field: &'static str,
        message: String,
    },
    /// Path-loss evaluation failed while accumulating relay noise.
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Ambient light conditions at the operating depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    /// Downwelling irradiance at the surface, R_d(λ, 0), in W/m².
    pub surface_irradiance: f64,
    /// Asymptotic diffuse attenuation coefficient K∞ in 1/m.
    pub diffuse_attenuation: f64,
    /// Operating depth z_d in m.
    pub depth: f64,
    /// Free-text description of the sky condition.
    pub label: String,
}

impl Environment {
    /// Clear night with a full moon: R_d(λ,0) = 1e-3 W/m², K∞ = 0.08 /m,
    /// 100 m depth.
    pub fn night_full_moon() -> Self {
        Environment {
            surface_irradiance: 1e-3,
            diffuse_attenuation: 0.08,
            depth: 100.0,
            label: "clear night, full moon".into(),
        }
    }

    /// Same depth profile under a caller-supplied surface irradiance, for
    /// daytime skies whose irradiance comes from measurement tables.
    pub fn with_surface_irradiance(irradiance: f64, label: impl Into<String>) -> Self {
        Environment {
            surface_irradiance: irradiance,
            label: label.into(),
            ..Self::night_full_moon()
        }
    }

    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<(), NoiseError> {
        for (field, value) in [
            ("surface_irradiance", self.surface_irradiance),
            ("diffuse_attenuation", self.diffuse_attenuation),
            ("depth", self.depth),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(NoiseError::InvalidParameter {
                    field,
                    message: format!("must be non-negative and finite, got {value}"),
                });
            }
        }
        Ok(())
    }
}

/// Receiver-side detection parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverParams {
    /// Field of view half-angle Ω in rad, at most π.
    pub fov: f64,
    /// Optical filter spectral width Δλ in m.
    pub filter_width: f64,
    /// Bit period Δt in s (the dark-count integration window).
    pub bit_period: f64,
    /// Receiver gate time Δt′ in s (the background integration window).
    pub gate_time: f64,
    /// Dark current count rate I_dc in Hz.
    pub dark_rate: f64,
    /// Detector quantum efficiency η.
    pub quantum_efficiency: f64,
    /// Total transmittance of Bob's receiving optics, η_Bob.
    pub bob_transmittance: f64,
    /// Collecting aperture area A in m².
    pub aperture_area: f64,
}

impl ReceiverParams {
    /// Typical blue-green photon-counting receiver: 30 nm filter, 35 ns bit
    /// period, 200 ps gate, 60 Hz dark rate, η = 0.5, η_Bob = 0.045, with
    /// the aperture area derived from the given diameter and a wide-open
    /// 180° field of view.
    pub fn standard(rx_diameter: f64) -> Self {
        ReceiverParams {
            fov: PI,
            filter_width: 30e-9,
            bit_period: 35e-9,
            gate_time: 200e-12,
            dark_rate: 60.0,
            quantum_efficiency: 0.5,
            bob_transmittance: 0.045,
            aperture_area: aperture_area_from_diameter(rx_diameter),
        }
    }

    /// Same parameters with a different field of view.
    pub fn with_fov(mut self, fov: f64) -> Self {
        self.fov = fov;
        self
    }

    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.fov > 0.0 && self.fov <= PI) {
            return Err(NoiseError::InvalidParameter {
                field: "fov",
                message: format!("must lie in (0, π] rad, got {}", self.fov),
            });
        }
        for (field, value) in [
            ("filter_width", self.filter_width),
            ("bit_period", self.bit_period),
            ("gate_time", self.gate_time),
            ("aperture_area", self.aperture_area),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(NoiseError::InvalidParameter {
                    field,
                    message: format!("must be positive and finite, got {value}"),
                });
            }
        }
        if !self.dark_rate.is_finite() || self.dark_rate < 0.0 {
            return Err(NoiseError::InvalidParameter {
                field: "dark_rate",
                message: format!("must be non-negative and finite, got {}", self.dark_rate),
            });
        }
        for (field, value) in [
            ("quantum_efficiency", self.quantum_efficiency),
            ("bob_transmittance", self.bob_transmittance),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(NoiseError::InvalidParameter {
                    field,
                    message: format!("must lie in (0, 1], got {value}"),
                });
            }
        }
        Ok(())
    }
}

/// Collecting area of a circular aperture of the given diameter.
pub fn aperture_area_from_diameter(diameter: f64) -> f64 {
    PI * (diameter / 2.0) * (diameter / 2.0)
}

/// Downwelling irradiance at the operating depth,
/// `R_d(λ, z_d) = R_d(λ, 0)·exp(−K∞·z_d)`.
pub fn irradiance_at_depth(env: &Environment) -> f64 {
    env.surface_irradiance * (-env.diffuse_attenuation * env.depth).exp()
}

/// Mean background photons per polarization branch collected in one gate:
/// `n_B0 = π R_d A Δt′ λ Δλ (1 − cos Ω) / (2 h c)`.
pub fn background_photons_per_polarization(
    env: &Environment,
    rx: &ReceiverParams,
    wavelength: f64,
) -> f64 {
    let r_d = irradiance_at_depth(env);
    PI * r_d
        * rx.aperture_area
        * rx.gate_time
        * wavelength
        * rx.filter_width
        * (1.0 - rx.fov.cos())
        / (2.0 * PLANCK * SPEED_OF_LIGHT)
}

/// Mean dark counts per bit period, `n_D = I_dc·Δt`.
pub fn dark_counts(rx: &ReceiverParams) -> f64 {
    rx.dark_rate * rx.bit_period
}

/// Mean noise photons per detector on a direct link,
/// `n_N = n_B0/2 + n_D`.
pub fn noise_per_detector(env: &Environment, rx: &ReceiverParams, wavelength: f64) -> f64 {
    background_photons_per_polarization(env, rx, wavelength) / 2.0 + dark_counts(rx)
}

/// Total noise yield across all four detectors of a decoy-state receiver,
/// `Y0 = 4 I_dc Δt + π R_d A Δt′ λ Δλ (1 − cos Ω)/(h c)`, which is exactly
/// four single-detector budgets.
pub fn decoy_noise_yield_y0(env: &Environment, rx: &ReceiverParams, wavelength: f64) -> f64 {
    4.0 * noise_per_detector(env, rx, wavelength)
}

/// Geometric accumulation ratio `(1 − γ^(K+1))/(1 − γ)`, with the γ→1
/// limit `K+1` handled by explicit summation.
pub(crate) fn geometric_ratio(gamma: f64, relays: u32) -> f64 {
    if (1.0 - gamma).abs() < 1e-9 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for _ in 0..=relays {
            sum += term;
            term *= gamma;
        }
        sum
    } else {
        (1.0 - gamma.powi(relays as i32 + 1)) / (1.0 - gamma)
    }
}

/// Background accumulated over a K-relay chain whose hops each transmit a
/// fraction γ: `n_B = n_B0 (1 − γ^(K+1))/(1 − γ) = n_B0 Σ_{i=0..K} γ^i`.
pub fn relay_accumulated_background(n_b0: f64, gamma: f64, relays: u32) -> Result<f64, NoiseError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(NoiseError::GammaRange(gamma));
    }
    Ok(n_b0 * geometric_ratio(gamma, relays))
}

/// Upper bound on the per-detector noise at the end of a relay chain.
///
/// Every relay contributes its local background, attenuated by the hops
/// still ahead of it, so the receiver sees
/// `n̂_N = (n_B0/2)·(1 − h^(K+1))/(1 − h) + n_D` with `h` the transmittance
/// of a single hop. K = 0 collapses to the direct-link budget.
pub fn relay_noise_upper(
    env: &Environment,
    rx: &ReceiverParams,
    water: &WaterType,
    geom: &LinkGeometry,
) -> Result<f64, NoiseError> {
    let hop = path_loss(geom, water, geom.hop_length())?;
    let n_b0 = background_photons_per_polarization(env, rx, geom.wavelength);
    Ok(n_b0 / 2.0 * geometric_ratio(hop, geom.relay_count) + dark_counts(rx))
}
