//! Two-term Henyey-Greenstein scattering phase function.
//!
//! Seawater scatters strongly forward with a small backscattered tail, which
//! a single Henyey-Greenstein (HG) lobe cannot capture. The two-term model
//! mixes a forward lobe `p_HG(g_F)` with weight `a` and a backward lobe
//! `p_HG(−g_B)` with weight `1 − a`. Published regressions tie `g_B` and `a`
//! to `g_F`, so a single measured quantity, the backscatter fraction `B`
//! (equivalently the mean scattering cosine), pins the whole shape.
//!
//! Sampling exploits the mixture form directly: choose a lobe by its weight,
//! then invert the closed-form HG distribution for that lobe. This is exact,
//! so the numeric inversion of the printed density is only needed as a test
//! oracle.

use super::McError;
use crate::numerics::RandomStream;

use std::f64::consts::PI;

/// Backward asymmetry parameter regression `g_B(g_F)`.
fn backward_asymmetry(g_f: f64) -> f64 {
    -0.3061446 + 1.000568 * g_f - 0.01826338 * g_f * g_f + 0.03643748 * g_f * g_f * g_f
}

/// Forward-lobe weight regression `a(g_F, g_B)`.
fn forward_weight(g_f: f64, g_b: f64) -> f64 {
    g_b * (1.0 + g_b) / ((g_f + g_b) * (1.0 + g_b - g_f))
}

/// Composite mean cosine `a·(g_F + g_B) − g_B` of the two-term mixture.
fn composite_mean_cosine(g_f: f64) -> f64 {
    let g_b = backward_asymmetry(g_f);
    forward_weight(g_f, g_b) * (g_f + g_b) - g_b
}

/// Solves the two-term HG shape from the backscatter fraction.
///
/// The mean cosine follows from `cosθ̄ = 2(1 − 2B)/(2 + B)`; the forward
/// asymmetry `g_F` is then the root of the composite-mean-cosine equation
/// under the two printed regressions. Returns
/// `(mean_cosine, g_F, g_B, a)`.
pub fn tthg_params_from_b(backscatter_fraction: f64) -> Result<(f64, f64, f64, f64), McError> {
    if !backscatter_fraction.is_finite() || !(0.0..1.0).contains(&backscatter_fraction)
        || backscatter_fraction == 0.0
    {
        return Err(McError::InvalidParameter {
            field: "backscatter_fraction",
            message: format!("must lie in (0, 1), got {backscatter_fraction}"),
        });
    }
    let mean = 2.0 * (1.0 - 2.0 * backscatter_fraction) / (2.0 + backscatter_fraction);

    // The composite mean cosine runs from 0 at g_F → 0 to 1 at g_F → 1, so a
    // mean outside that range has no admissible forward lobe.
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    let (f_lo, f_hi) = (
        composite_mean_cosine(lo) - mean,
        composite_mean_cosine(hi) - mean,
    );
    if f_lo.signum() == f_hi.signum() {
        return Err(McError::NoPhaseRoot {
            mean_cosine: mean,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = composite_mean_cosine(mid) - mean;
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g_f = 0.5 * (lo + hi);
    let g_b = backward_asymmetry(g_f);
    Ok((mean, g_f, g_b, forward_weight(g_f, g_b)))
}

/// Homogeneous-water scattering model with a two-term HG phase function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterModel {
    /// Absorption coefficient α in 1/m.
    pub absorption: f64,
    /// Scattering coefficient β in 1/m.
    pub scattering: f64,
    /// Backscatter fraction B of the phase function.
    pub backscatter_fraction: f64,
    /// Mean scattering cosine implied by B.
    pub mean_cosine: f64,
    /// Forward HG asymmetry parameter g_F.
    pub g_forward: f64,
    /// Backward HG asymmetry parameter g_B (used as −g_B in the mixture).
    pub g_backward: f64,
    /// Forward-lobe mixture weight a.
    pub forward_weight: f64,
}

impl ScatterModel {
    /// Builds the model, solving the phase-function shape from `B`.
    pub fn new(
        absorption: f64,
        scattering: f64,
        backscatter_fraction: f64,
    ) -> Result<Self, McError> {
        if !absorption.is_finite() || absorption < 0.0 {
            return Err(McError::InvalidParameter {
                field: "absorption",
                message: format!("must be a non-negative rate, got {absorption}"),
            });
        }
        if !scattering.is_finite() || scattering < 0.0 {
            return Err(McError::InvalidParameter {
                field: "scattering",
                message: format!("must be a non-negative rate, got {scattering}"),
            });
        }
        if absorption + scattering <= 0.0 {
            return Err(McError::InvalidParameter {
                field: "scattering",
                message: "absorption and scattering cannot both vanish".into(),
            });
        }
        let (mean_cosine, g_forward, g_backward, forward_weight) =
            tthg_params_from_b(backscatter_fraction)?;
        Ok(ScatterModel {
            absorption,
            scattering,
            backscatter_fraction,
            mean_cosine,
            g_forward,
            g_backward,
            forward_weight,
        })
    }

    /// Extinction coefficient ς = α + β in 1/m.
    pub fn extinction(&self) -> f64 {
        self.absorption + self.scattering
    }

    /// Survival fraction β/ς of an interaction.
    pub fn albedo(&self) -> f64 {
        self.scattering / self.extinction()
    }
}

/// Inverse CDF of the HG distribution in `cosθ` for one lobe.
///
/// `cosθ = (1 + g² − ((1 − g²)/(1 − g + 2gq))²)/(2g)`, with the isotropic
/// `g → 0` limit `2q − 1`.
fn hg_sample_cosine(g: f64, q: f64) -> f64 {
    if g.abs() < 1e-9 {
        return 2.0 * q - 1.0;
    }
    let frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * q);
    ((1.0 + g * g - frac * frac) / (2.0 * g)).clamp(-1.0, 1.0)
}

/// Draws a scattering deflection `(θ, φ)` from the two-term HG density.
///
/// The polar angle comes from the mixture: the forward lobe with
/// probability `a`, otherwise the backward lobe with asymmetry `−g_B`. The
/// azimuth is uniform.
pub fn sample_scatter_angle(model: &ScatterModel, rng: &mut RandomStream) -> (f64, f64) {
    let g = if rng.next_bool(model.forward_weight) {
        model.g_forward
    } else {
        -model.g_backward
    };
    let cos_theta = hg_sample_cosine(g, rng.next_unit());
    let phi = rng.next_in(0.0, 2.0 * PI);
    (cos_theta.acos(), phi)
}
