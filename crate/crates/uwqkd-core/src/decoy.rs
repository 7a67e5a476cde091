//! Two-decoy-state BB84 gain, yield, and key-rate bounds.
//!
//! A vacuum decoy pins the noise yield `Y0` and a weak decoy pins the
//! low-photon-number gains, so Alice and Bob can corner the single-photon
//! contribution without ever measuring it directly. Turbulence makes the
//! channel transmittance a random variable; by convexity of `e^(-x)` the
//! measured gains then sit on known sides of the deterministic-channel
//! expressions, which turns every estimate into a one-sided bound: gains
//! from below, QBER from above, and finally the key rate from below.
//!
//! The bounds are only claims while they stay meaningful. A non-positive
//! single-photon yield or a single-photon error above 1/2 says the decoy
//! estimate collapsed, and [`decoy_link_report`] then reports a zero rate
//! with the corresponding [`DecoyFlags`] entry set instead of propagating
//! numbers that no longer bound anything.

use crate::bb84::{bracketed_distance_search, BracketError};
use crate::channel::{
    path_loss, power_transfer_mu, power_transfer_mu0, ChannelError, LinkGeometry,
    TurbulenceParams, WaterType,
};
use crate::noise::{decoy_noise_yield_y0, Environment, ReceiverParams};
use crate::numerics::{binary_entropy, NumericsError, QuadratureSpec};

/// Errors raised by the decoy-state operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecoyError {
    /// A gain or yield used as a denominator vanished.
    #[error("decoy bound is indeterminate: {0}")]
    IndeterminateBound(&'static str),
    /// A parameter violated a documented invariant.
    #[error("invalid {field}: {message}")]
    InvalidParameter {
        field: &'static str,
        message: String,
    },
    /// The positive-rate criterion did not change state over the search
    /// range.
    #[error("criterion is not bracketed on [{lo} m, {hi} m]: {reason}")]
    NoBracket { lo: f64, hi: f64, reason: String },
    /// Channel-physics evaluation failed.
    #[error(transparent)]
    Channel(#[from] ChannelError),
    /// Numerical evaluation failed.
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl BracketError for DecoyError {
    fn no_bracket(lo: f64, hi: f64, reason: String) -> Self {
        DecoyError::NoBracket { lo, hi, reason }
    }
}

fn check_probability(field: &'static str, value: f64) -> Result<(), DecoyError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(DecoyError::InvalidParameter {
            field,
            message: format!("must lie in [0, 1], got {value}"),
        })
    }
}

fn check_count(field: &'static str, value: f64) -> Result<(), DecoyError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(DecoyError::InvalidParameter {
            field,
            message: format!("must be a non-negative count, got {value}"),
        })
    }
}

/// Protocol parameters of the two-decoy scheme.
///
/// The signal and decoy intensities are mean photon numbers per pulse; the
/// weak decoy must be strictly weaker than the signal or the yield solve
/// degenerates. `noise_error`, `sift_factor`, and `ec_efficiency` are fixed
/// by the protocol analysis (a noise photon is random in the measurement
/// basis, basis sifting keeps half the pulses, and the error-correcting
/// code leaks 22% above the Shannon limit) and the defaults carry those
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoyParams {
    /// Signal-state mean photon number μ.
    pub signal_intensity: f64,
    /// Weak-decoy mean photon number ν, strictly below μ.
    pub decoy_intensity: f64,
    /// Detector misalignment error probability e_det.
    pub detector_error: f64,
    /// Error probability of a noise photon, e0 = 1/2.
    pub noise_error: f64,
    /// Basis-sifting factor q = 1/2.
    pub sift_factor: f64,
    /// Error-correction inefficiency f_ec ≥ 1.
    pub ec_efficiency: f64,
}

impl Default for DecoyParams {
    fn default() -> Self {
        DecoyParams {
            signal_intensity: 0.48,
            decoy_intensity: 0.05,
            detector_error: 0.033,
            noise_error: 0.5,
            sift_factor: 0.5,
            ec_efficiency: 1.22,
        }
    }
}

impl DecoyParams {
    /// Checks the documented invariants: `0 < ν < μ`, `0 ≤ e_det < 1/2`,
    /// probabilities in range, and `f_ec ≥ 1`.
    pub fn validate(&self) -> Result<(), DecoyError> {
        if !self.signal_intensity.is_finite() || self.signal_intensity <= 0.0 {
            return Err(DecoyError::InvalidParameter {
                field: "signal_intensity",
                message: format!("must be positive, got {}", self.signal_intensity),
            });
        }
        if !self.decoy_intensity.is_finite()
            || self.decoy_intensity <= 0.0
            || self.decoy_intensity >= self.signal_intensity
        {
            return Err(DecoyError::InvalidParameter {
                field: "decoy_intensity",
                message: format!(
                    "must satisfy 0 < ν < μ = {}, got {}",
                    self.signal_intensity, self.decoy_intensity
                ),
            });
        }
        if !self.detector_error.is_finite()
            || !(0.0..0.5).contains(&self.detector_error)
        {
            return Err(DecoyError::InvalidParameter {
                field: "detector_error",
                message: format!("must lie in [0, 1/2), got {}", self.detector_error),
            });
        }
        check_probability("noise_error", self.noise_error)?;
        if !self.sift_factor.is_finite() || self.sift_factor <= 0.0 || self.sift_factor > 1.0 {
            return Err(DecoyError::InvalidParameter {
                field: "sift_factor",
                message: format!("must lie in (0, 1], got {}", self.sift_factor),
            });
        }
        if !self.ec_efficiency.is_finite() || self.ec_efficiency < 1.0 {
            return Err(DecoyError::InvalidParameter {
                field: "ec_efficiency",
                message: format!("must be at least 1, got {}", self.ec_efficiency),
            });
        }
        Ok(())
    }
}

/// Overall single-photon transfer fraction `η = l · α · η_Bob`.
///
/// Path loss, turbulent power transfer, and Bob's internal transmittance
/// are independent survival probabilities, so the end-to-end fraction is
/// their product.
pub fn eta_fraction(transmittance: f64, alpha_power: f64, eta_bob: f64) -> Result<f64, DecoyError> {
    check_probability("transmittance", transmittance)?;
    check_probability("alpha_power", alpha_power)?;
    check_probability("eta_bob", eta_bob)?;
    Ok(transmittance * alpha_power * eta_bob)
}

/// Expected detection fraction `1 − e^(−x·η_Bob·l)` for intensity `x`.
fn detection_fraction(intensity: f64, eta_bob: f64, transmittance: f64) -> f64 {
    -(-intensity * eta_bob * transmittance).exp_m1()
}

/// Lower bounds on the decoy and signal gains, `(Q_ν^L, Q_μ^L)`.
///
/// Convexity of `e^(−x)` in the fluctuating transmittance pushes the
/// measured gain above `Y0 + α·(1 − e^(−x·η_Bob·l))`, where the average
/// power transfer `α` enters linearly.
pub fn gains_lower(
    y0: f64,
    alpha_power: f64,
    transmittance: f64,
    eta_bob: f64,
    p: &DecoyParams,
) -> Result<(f64, f64), DecoyError> {
    p.validate()?;
    check_count("y0", y0)?;
    check_probability("alpha_power", alpha_power)?;
    check_probability("transmittance", transmittance)?;
    check_probability("eta_bob", eta_bob)?;
    let q_nu = y0 + alpha_power * detection_fraction(p.decoy_intensity, eta_bob, transmittance);
    let q_mu = y0 + alpha_power * detection_fraction(p.signal_intensity, eta_bob, transmittance);
    Ok((q_nu, q_mu))
}

/// Upper bound on the signal gain, `Q_μ^U = Y0 + 1 − e^(−μ·η_Bob·l)`.
///
/// Dropping diffraction and turbulence losses (α = 1) can only
/// overestimate the gain.
pub fn gain_upper_mu(
    y0: f64,
    transmittance: f64,
    eta_bob: f64,
    p: &DecoyParams,
) -> Result<f64, DecoyError> {
    p.validate()?;
    check_count("y0", y0)?;
    check_probability("transmittance", transmittance)?;
    check_probability("eta_bob", eta_bob)?;
    Ok(y0 + detection_fraction(p.signal_intensity, eta_bob, transmittance))
}

/// Upper bound on the signal-state QBER,
/// `E_μ^U = (e0·Y0 + e_det·(1 − e^(−μ·η_Bob·l))) / Q_μ^L`.
///
/// The worst case pairs every error source with the smallest admissible
/// gain. The ratio saturates at 1 when the misalignment term outweighs a
/// turbulence-starved gain, so the result is clamped to a probability.
pub fn qber_upper_mu(
    y0: f64,
    q_mu_lower: f64,
    transmittance: f64,
    eta_bob: f64,
    p: &DecoyParams,
) -> Result<f64, DecoyError> {
    p.validate()?;
    check_count("y0", y0)?;
    check_count("q_mu_lower", q_mu_lower)?;
    check_probability("transmittance", transmittance)?;
    check_probability("eta_bob", eta_bob)?;
    if q_mu_lower == 0.0 {
        return Err(DecoyError::IndeterminateBound(
            "signal gain lower bound is zero",
        ));
    }
    let errors = p.noise_error * y0
        + p.detector_error * detection_fraction(p.signal_intensity, eta_bob, transmittance);
    Ok((errors / q_mu_lower).min(1.0))
}

/// Single-photon yield and gain lower bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonBounds {
    /// Lower bound `Y1^L` on the single-photon yield, 0 when collapsed.
    pub y1_lower: f64,
    /// Lower bound `Q1^L = μ·e^(−μ)·Y1^L` on the single-photon gain.
    pub q1_lower: f64,
    /// The raw yield bound came out non-positive, so 0 is reported and the
    /// rate built on it carries no claim.
    pub collapsed: bool,
}

/// Bounds the single-photon yield from the two measured gains.
///
/// `Y1^L = μ/(μν − ν²) · (Q_ν^L·e^ν − Q_μ^U·e^μ·ν²/μ² − (μ² − ν²)/μ² · Y0)`:
/// the weak decoy sees mostly low photon numbers, so subtracting the
/// (rescaled) signal gain and the vacuum yield isolates the one-photon
/// term. Noise can drive the bracket negative, in which case the bound is
/// vacuous and reported as a collapsed 0.
pub fn single_photon_bounds(
    q_nu_lower: f64,
    q_mu_upper: f64,
    y0: f64,
    p: &DecoyParams,
) -> Result<SinglePhotonBounds, DecoyError> {
    p.validate()?;
    check_count("q_nu_lower", q_nu_lower)?;
    check_count("q_mu_upper", q_mu_upper)?;
    check_count("y0", y0)?;
    let mu = p.signal_intensity;
    let nu = p.decoy_intensity;
    let bracket = q_nu_lower * nu.exp()
        - q_mu_upper * mu.exp() * nu * nu / (mu * mu)
        - (mu * mu - nu * nu) / (mu * mu) * y0;
    let y1 = mu / (mu * nu - nu * nu) * bracket;
    if y1 <= 0.0 {
        return Ok(SinglePhotonBounds {
            y1_lower: 0.0,
            q1_lower: 0.0,
            collapsed: true,
        });
    }
    Ok(SinglePhotonBounds {
        y1_lower: y1,
        q1_lower: mu * (-mu).exp() * y1,
        collapsed: false,
    })
}

/// Upper bound on the single-photon error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonError {
    /// Upper bound `e1^U`, clamped into [0, 1].
    pub e1_upper: f64,
    /// The raw bound left [0, 1] or the yield bound was non-positive, so
    /// the value is a clamp artifact, not a claim.
    pub invalid: bool,
}

/// Bounds the single-photon error rate from the weak-decoy error counts.
///
/// `e1^U = ((e0·Y0 + e_det·(1 − e^(−ν·η_Bob·l)))·e^ν − e0·Y0) / (Y1^L·ν)`:
/// the weak decoy's error tally minus the vacuum contribution, charged
/// entirely to the single-photon pulses. A collapsed yield bound makes the
/// ratio diverge, which is flagged rather than returned.
pub fn single_photon_error_upper(
    transmittance: f64,
    eta_bob: f64,
    y1_lower: f64,
    y0: f64,
    p: &DecoyParams,
) -> Result<SinglePhotonError, DecoyError> {
    p.validate()?;
    check_probability("transmittance", transmittance)?;
    check_probability("eta_bob", eta_bob)?;
    check_count("y1_lower", y1_lower)?;
    check_count("y0", y0)?;
    if y1_lower <= 0.0 {
        return Ok(SinglePhotonError {
            e1_upper: 1.0,
            invalid: true,
        });
    }
    let nu = p.decoy_intensity;
    let vacuum_errors = p.noise_error * y0;
    let numerator = (vacuum_errors
        + p.detector_error * detection_fraction(nu, eta_bob, transmittance))
        * nu.exp()
        - vacuum_errors;
    let raw = numerator / (y1_lower * nu);
    Ok(SinglePhotonError {
        e1_upper: raw.clamp(0.0, 1.0),
        invalid: !(0.0..=1.0).contains(&raw),
    })
}

/// Lower bound on the secret key rate,
/// `R^L = q·(−Q_μ^U·f_ec·H₂(E_μ^U) + Q1^L·(1 − H₂(e1^U)))`.
///
/// Error correction is charged against the full (over-estimated) gain at
/// the worst-case QBER, while privacy amplification credits only the
/// provably single-photon part. The result may be negative; interpreting
/// it is the caller's job (see [`decoy_link_report`]).
pub fn decoy_rate_lower(
    q_mu_upper: f64,
    e_mu_upper: f64,
    q1_lower: f64,
    e1_upper: f64,
    p: &DecoyParams,
) -> Result<f64, DecoyError> {
    p.validate()?;
    check_count("q_mu_upper", q_mu_upper)?;
    check_probability("e_mu_upper", e_mu_upper)?;
    check_count("q1_lower", q1_lower)?;
    check_probability("e1_upper", e1_upper)?;
    let leak = q_mu_upper * p.ec_efficiency * binary_entropy(e_mu_upper)?;
    let secret = q1_lower * (1.0 - binary_entropy(e1_upper)?);
    Ok(p.sift_factor * (secret - leak))
}

/// Single-photon bound for the no-decoy benchmark protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealBb84Bound {
    /// Single-photon error rate e1.
    pub error_rate: f64,
    /// Single-photon gain Q1 = (Y0 + η)·μ·e^(−μ).
    pub gain: f64,
    /// Key-rate lower bound R = Q1/2 · (1 − (1 + f_ec)·H₂(e1)).
    pub rate_lower: f64,
}

/// Benchmark BB84 rate with perfect single-photon knowledge.
///
/// Without decoys the analysis assumes every detection behaves like the
/// single-photon average: `e1 = (Y0/2 + e_det·η)/(Y0 + η)` mixes the
/// random noise errors with misaligned signal detections, and both error
/// correction and privacy amplification are charged at that one rate.
pub fn ideal_bb84_rate(
    eta_total: f64,
    y0: f64,
    p: &DecoyParams,
) -> Result<IdealBb84Bound, DecoyError> {
    p.validate()?;
    check_probability("eta_total", eta_total)?;
    check_count("y0", y0)?;
    let detected = y0 + eta_total;
    if detected == 0.0 {
        return Err(DecoyError::IndeterminateBound(
            "noise yield and transfer fraction are both zero",
        ));
    }
    let e1 = (p.noise_error * y0 + p.detector_error * eta_total) / detected;
    let mu = p.signal_intensity;
    let gain = detected * mu * (-mu).exp();
    let rate = gain / 2.0 * (1.0 - (1.0 + p.ec_efficiency) * binary_entropy(e1)?);
    Ok(IdealBb84Bound {
        error_rate: e1,
        gain,
        rate_lower: rate,
    })
}

/// Why a reported rate was zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecoyFlags {
    /// The single-photon yield bound collapsed to 0.
    pub yield_collapsed: bool,
    /// The single-photon or signal error bound reached 1/2, so no secret
    /// key is extractable from the estimate.
    pub error_saturated: bool,
}

impl DecoyFlags {
    /// True when any flag is set and the rate was zeroed.
    pub fn any(&self) -> bool {
        self.yield_collapsed || self.error_saturated
    }
}

/// Full decoy-bound evaluation at one distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoyReport {
    /// Link distance in m.
    pub distance: f64,
    /// Upper bound Q_μ^U on the signal gain.
    pub gain_mu_upper: f64,
    /// Lower bound Q_μ^L on the signal gain.
    pub gain_mu_lower: f64,
    /// Lower bound Q_ν^L on the decoy gain.
    pub gain_nu_lower: f64,
    /// Upper bound E_μ^U on the signal QBER.
    pub qber_mu_upper: f64,
    /// Lower bound Y1^L on the single-photon yield.
    pub y1_lower: f64,
    /// Lower bound Q1^L on the single-photon gain.
    pub q1_lower: f64,
    /// Upper bound e1^U on the single-photon error rate.
    pub e1_upper: f64,
    /// Lower bound R^L on the secret key rate, zeroed when flagged.
    pub rate_lower: f64,
    /// Average power transfer α feeding the lower gains.
    pub alpha: f64,
    /// Path-loss transmittance l.
    pub path_loss: f64,
    /// Vacuum-decoy noise yield Y0.
    pub y0: f64,
    /// Diagnostic state of the bound pipeline.
    pub flags: DecoyFlags,
}

/// Everything needed to evaluate the decoy bounds at any distance.
#[derive(Debug, Clone)]
pub struct DecoyScenario {
    pub environment: Environment,
    pub receiver: ReceiverParams,
    pub water: WaterType,
    pub geometry: LinkGeometry,
    /// `None` evaluates the non-turbulent benchmark (α = μ₀).
    pub turbulence: Option<TurbulenceParams>,
    pub params: DecoyParams,
}

/// Evaluates the whole decoy pipeline at one distance.
///
/// When the yield bound collapses or either error bound reaches 1/2 the
/// rate is reported as 0 with the corresponding flag set: past that point
/// the formula output no longer bounds a real key rate.
pub fn decoy_link_report(
    scenario: &DecoyScenario,
    distance: f64,
    quad: &QuadratureSpec,
) -> Result<DecoyReport, DecoyError> {
    let p = &scenario.params;
    p.validate()?;
    let geom = &scenario.geometry;
    let transmittance = path_loss(geom, &scenario.water, distance)?;
    let alpha = match &scenario.turbulence {
        Some(t) => power_transfer_mu(geom, t, distance, quad)?,
        None => power_transfer_mu0(geom, distance, quad)?,
    };
    let y0 = decoy_noise_yield_y0(&scenario.environment, &scenario.receiver, geom.wavelength);
    let eta_bob = scenario.receiver.bob_transmittance;

    let (q_nu_l, q_mu_l) = gains_lower(y0, alpha, transmittance, eta_bob, p)?;
    let q_mu_u = gain_upper_mu(y0, transmittance, eta_bob, p)?;
    let e_mu_u = qber_upper_mu(y0, q_mu_l, transmittance, eta_bob, p)?;
    let bounds = single_photon_bounds(q_nu_l, q_mu_u, y0, p)?;
    let error = single_photon_error_upper(transmittance, eta_bob, bounds.y1_lower, y0, p)?;

    let flags = DecoyFlags {
        yield_collapsed: bounds.collapsed,
        error_saturated: error.invalid || error.e1_upper > 0.5 || e_mu_u >= 0.5,
    };
    let rate = if flags.any() {
        0.0
    } else {
        decoy_rate_lower(q_mu_u, e_mu_u, bounds.q1_lower, error.e1_upper, p)?
    };

    Ok(DecoyReport {
        distance,
        gain_mu_upper: q_mu_u,
        gain_mu_lower: q_mu_l,
        gain_nu_lower: q_nu_l,
        qber_mu_upper: e_mu_u,
        y1_lower: bounds.y1_lower,
        q1_lower: bounds.q1_lower,
        e1_upper: error.e1_upper,
        rate_lower: rate,
        alpha,
        path_loss: transmittance,
        y0,
        flags,
    })
}

/// Benchmark BB84 bound over the same link at one distance.
///
/// The benchmark ignores turbulence, so the transfer fraction is
/// `η = l·μ₀·η_Bob` regardless of the scenario's turbulence entry.
pub fn ideal_bb84_link_rate(
    scenario: &DecoyScenario,
    distance: f64,
    quad: &QuadratureSpec,
) -> Result<IdealBb84Bound, DecoyError> {
    let geom = &scenario.geometry;
    let transmittance = path_loss(geom, &scenario.water, distance)?;
    let mu0 = power_transfer_mu0(geom, distance, quad)?;
    let y0 = decoy_noise_yield_y0(&scenario.environment, &scenario.receiver, geom.wavelength);
    let eta = eta_fraction(transmittance, mu0, scenario.receiver.bob_transmittance)?;
    ideal_bb84_rate(eta, y0, &scenario.params)
}

/// Largest distance with a strictly positive decoy key rate.
///
/// Same scan-plus-bisection kernel as the direct link: walk a 1 m grid
/// until the rate stops being positive, then bisect to decimetre width.
pub fn decoy_achievable_distance(
    scenario: &DecoyScenario,
    lo: f64,
    hi: f64,
    quad: &QuadratureSpec,
) -> Result<f64, DecoyError> {
    scenario.params.validate()?;
    bracketed_distance_search(
        |d| Ok(decoy_link_report(scenario, d, quad)?.rate_lower > 0.0),
        lo,
        hi,
    )
}

/// Largest distance with a strictly positive benchmark BB84 rate.
pub fn ideal_bb84_achievable_distance(
    scenario: &DecoyScenario,
    lo: f64,
    hi: f64,
    quad: &QuadratureSpec,
) -> Result<f64, DecoyError> {
    scenario.params.validate()?;
    bracketed_distance_search(
        |d| Ok(ideal_bb84_link_rate(scenario, d, quad)?.rate_lower > 0.0),
        lo,
        hi,
    )
}
