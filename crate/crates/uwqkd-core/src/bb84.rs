//! Direct-link BB84 performance bounds.
//!
//! The channel only degrades the key: background photons masquerade as
//! signal and path loss starves the signal term, so the quantum bit error
//! rate (QBER) is bounded from above and the secret key rate (SKR) from
//! below. Both bounds come from treating the sifted key as a binary
//! symmetric channel and charging the LDPC reconciliation leakage
//! `f·h(QBER)` plus the eavesdropper bound `h(QBER)` against the raw rate.
//!
//! [`achievable_distance`] inverts the bounds: it walks a 1 m grid to
//! bracket the last distance where a criterion (QBER cap or positive SKR)
//! still holds, then bisects the bracketing cell down to decimetre width.

use crate::channel::{
    path_loss, power_transfer_mu, power_transfer_mu0, ChannelError, LinkGeometry,
    TurbulenceParams, WaterType,
};
use crate::noise::{noise_per_detector, Environment, NoiseError, ReceiverParams};
use crate::numerics::{binary_entropy, NumericsError, QuadratureSpec};

/// Errors raised by the BB84 performance operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Bb84Error {
    /// Noise and signal terms vanished together, leaving 0/0.
    #[error("QBER is indeterminate: noise and signal terms are both zero")]
    IndeterminateQber,
    /// A parameter violated a documented invariant.
    #[error("invalid {field}: {message}")]
    InvalidParameter {
        field: &'static str,
        message: String,
    },
    /// The achievable-distance criterion did not change state over the
    /// search range.
    #[error("criterion is not bracketed on [{lo} m, {hi} m]: {reason}")]
    NoBracket { lo: f64, hi: f64, reason: String },
    /// Channel-physics evaluation failed.
    #[error(transparent)]
    Channel(#[from] ChannelError),
    /// Noise-budget evaluation failed.
    #[error(transparent)]
    Noise(#[from] NoiseError),
    /// A numerical kernel failed.
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn check_count(field: &'static str, value: f64) -> Result<(), Bb84Error> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Bb84Error::InvalidParameter {
            field,
            message: format!("must be a non-negative count, got {value}"),
        })
    }
}

fn check_positive(field: &'static str, value: f64) -> Result<(), Bb84Error> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Bb84Error::InvalidParameter {
            field,
            message: format!("must be positive, got {value}"),
        })
    }
}

fn check_probability(field: &'static str, value: f64) -> Result<(), Bb84Error> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Bb84Error::InvalidParameter {
            field,
            message: format!("must lie in [0, 1], got {value}"),
        })
    }
}

/// Protocol-level knobs: source intensity and LDPC reconciliation code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bb84Params {
    /// Mean photon number n_S of the source.
    pub mean_photon_number: f64,
    /// LDPC code rate R_c.
    pub ldpc_rate: f64,
    /// Design threshold QBER_th of the LDPC code.
    pub qber_threshold: f64,
    /// Security cutoff used by QBER-based distance criteria.
    pub qber_security_limit: f64,
}

impl Default for Bb84Params {
    /// n_S = 1, R_c = 0.5 LDPC with QBER_th = 0.1071, security limit 0.11.
    fn default() -> Self {
        Bb84Params {
            mean_photon_number: 1.0,
            ldpc_rate: 0.5,
            qber_threshold: 0.1071,
            qber_security_limit: 0.11,
        }
    }
}

impl Bb84Params {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<(), Bb84Error> {
        if !(self.mean_photon_number.is_finite() && self.mean_photon_number > 0.0) {
            return Err(Bb84Error::InvalidParameter {
                field: "mean_photon_number",
                message: format!("must be positive, got {}", self.mean_photon_number),
            });
        }
        if !(self.ldpc_rate > 0.0 && self.ldpc_rate < 1.0) {
            return Err(Bb84Error::InvalidParameter {
                field: "ldpc_rate",
                message: format!("must lie in (0, 1), got {}", self.ldpc_rate),
            });
        }
        if !(self.qber_threshold > 0.0 && self.qber_threshold < 0.5) {
            return Err(Bb84Error::InvalidParameter {
                field: "qber_threshold",
                message: format!("must lie in (0, 0.5), got {}", self.qber_threshold),
            });
        }
        if !(self.qber_security_limit > 0.0 && self.qber_security_limit < 0.5) {
            return Err(Bb84Error::InvalidParameter {
                field: "qber_security_limit",
                message: format!("must lie in (0, 0.5), got {}", self.qber_security_limit),
            });
        }
        Ok(())
    }
}

/// One evaluated operating point of a link; the row type of every sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkReport {
    /// Link distance in m.
    pub distance: f64,
    /// Upper bound on the QBER.
    pub qber_upper: f64,
    /// Lower bound on the SKR, in bits per sifted bit (may be negative).
    pub skr_lower: f64,
    /// Turbulent average power transfer μ.
    pub mu: f64,
    /// Vacuum power transfer μ₀.
    pub mu0: f64,
    /// Path-loss transmittance.
    pub path_loss: f64,
    /// Per-detector noise count n_N.
    pub noise: f64,
}

/// Everything needed to evaluate a direct link at any distance.
#[derive(Debug, Clone)]
pub struct LinkScenario {
    pub environment: Environment,
    pub receiver: ReceiverParams,
    pub water: WaterType,
    pub geometry: LinkGeometry,
    /// `None` evaluates the non-turbulent benchmark (μ = μ₀).
    pub turbulence: Option<TurbulenceParams>,
    pub params: Bb84Params,
}

/// Upper bound on the QBER of a turbulent direct link.
///
/// `QBER ≤ n_N·S / [(n_S·l/2)·μ·e^(−η n_S l) + 2·n_N·S]` with
/// `S = 1 − μ + μ·e^(−η n_S l)`: the numerator counts noise photons that
/// survive sifting, the first denominator term the signal photons that do.
pub fn qber_upper_bound(
    n_n: f64,
    n_s: f64,
    mu: f64,
    transmittance: f64,
    eta: f64,
) -> Result<f64, Bb84Error> {
    check_count("n_n", n_n)?;
    check_positive("n_s", n_s)?;
    check_probability("mu", mu)?;
    check_probability("transmittance", transmittance)?;
    check_probability("eta", eta)?;

    let decay = (-eta * n_s * transmittance).exp();
    let survival = 1.0 - mu + mu * decay;
    let noise_term = n_n * survival;
    let signal_term = n_s * transmittance / 2.0 * mu * decay;
    if noise_term == 0.0 && signal_term == 0.0 {
        return Err(Bb84Error::IndeterminateQber);
    }
    Ok(noise_term / (signal_term + 2.0 * noise_term))
}

/// Exact QBER of the non-turbulent benchmark link,
/// `QBER = 2 n_N / (n_S μ₀ l + 4 n_N)`.
pub fn qber_nonturbulent(
    n_n: f64,
    n_s: f64,
    mu0: f64,
    transmittance: f64,
) -> Result<f64, Bb84Error> {
    check_count("n_n", n_n)?;
    check_positive("n_s", n_s)?;
    check_probability("mu0", mu0)?;
    check_probability("transmittance", transmittance)?;

    let signal = n_s * mu0 * transmittance;
    if n_n == 0.0 && signal == 0.0 {
        return Err(Bb84Error::IndeterminateQber);
    }
    Ok(2.0 * n_n / (signal + 4.0 * n_n))
}

/// LDPC reconciliation efficiency `f = (1 − R_c)/h(QBER_th)`.
///
/// Values below 1 are arithmetically possible for rates close to 1 and are
/// returned as computed; the SKR bound only makes physical sense for f ≥ 1.
pub fn reconciliation_efficiency(p: &Bb84Params) -> Result<f64, Bb84Error> {
    p.validate()?;
    Ok((1.0 - p.ldpc_rate) / binary_entropy(p.qber_threshold)?)
}

/// Lower bound on the secret key rate, `R = 1 − (1 + f)·h(QBER)`, in bits
/// per sifted bit. Negative values mean no secret key is distillable; they
/// are reported as-is. QBER inputs above the 0.5 crossover are clamped.
pub fn skr_lower_bound(qber: f64, p: &Bb84Params) -> Result<f64, Bb84Error> {
    if !qber.is_finite() || qber < 0.0 {
        return Err(Bb84Error::InvalidParameter {
            field: "qber",
            message: format!("must be a probability, got {qber}"),
        });
    }
    let f = reconciliation_efficiency(p)?;
    Ok(1.0 - (1.0 + f) * binary_entropy(qber.min(0.5))?)
}

/// Evaluates the full direct-link bound chain at one distance.
pub fn direct_link_report(
    scenario: &LinkScenario,
    distance: f64,
    quad: &QuadratureSpec,
) -> Result<LinkReport, Bb84Error> {
    scenario.params.validate()?;
    let geom = &scenario.geometry;
    let transmittance = path_loss(geom, &scenario.water, distance)?;
    let mu0 = power_transfer_mu0(geom, distance, quad)?;
    let n_n = noise_per_detector(&scenario.environment, &scenario.receiver, geom.wavelength);
    let n_s = scenario.params.mean_photon_number;

    let (mu, qber) = match &scenario.turbulence {
        Some(t) => {
            let mu = power_transfer_mu(geom, t, distance, quad)?;
            let qber = qber_upper_bound(
                n_n,
                n_s,
                mu,
                transmittance,
                scenario.receiver.quantum_efficiency,
            )?;
            (mu, qber)
        }
        None => (mu0, qber_nonturbulent(n_n, n_s, mu0, transmittance)?),
    };

    Ok(LinkReport {
        distance,
        qber_upper: qber,
        skr_lower: skr_lower_bound(qber, &scenario.params)?,
        mu,
        mu0,
        path_loss: transmittance,
        noise: n_n,
    })
}

/// Pass/fail criterion for [`achievable_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceCriterion {
    /// The QBER upper bound must stay at or below this limit.
    QberAtMost(f64),
    /// The SKR lower bound must stay strictly positive.
    PositiveSkr,
}

impl DistanceCriterion {
    fn holds(&self, report: &LinkReport) -> bool {
        self.holds_values(report.qber_upper, report.skr_lower)
    }

    /// Criterion check on bare bound values, shared with the relay solver.
    pub(crate) fn holds_values(&self, qber_upper: f64, skr_lower: f64) -> bool {
        match self {
            DistanceCriterion::QberAtMost(limit) => qber_upper <= *limit,
            DistanceCriterion::PositiveSkr => skr_lower > 0.0,
        }
    }
}

/// Largest distance in `[lo, hi]` where the criterion still holds, to
/// ±0.1 m.
///
/// A 1 m coarse scan finds the bracketing cell (tolerating non-monotone
/// pockets by keeping the last passing grid point); bisection then shrinks
/// the cell. Errors if the criterion already fails at `lo` or still holds
/// at `hi`.
pub fn achievable_distance(
    scenario: &LinkScenario,
    criterion: DistanceCriterion,
    lo: f64,
    hi: f64,
    quad: &QuadratureSpec,
) -> Result<f64, Bb84Error> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(Bb84Error::InvalidParameter {
            field: "search range",
            message: format!("need 0 < lo < hi, got [{lo}, {hi}]"),
        });
    }
    let holds_at = |d: f64| -> Result<bool, Bb84Error> {
        Ok(criterion.holds(&direct_link_report(scenario, d, quad)?))
    };
    bracketed_distance_search(holds_at, lo, hi)
}

/// Implemented by module error types that can report a failed bracket, so
/// the distance-search kernel can be shared across bound families.
pub(crate) trait BracketError: Sized {
    fn no_bracket(lo: f64, hi: f64, reason: String) -> Self;
}

impl BracketError for Bb84Error {
    fn no_bracket(lo: f64, hi: f64, reason: String) -> Self {
        Bb84Error::NoBracket { lo, hi, reason }
    }
}

/// Shared scan-plus-bisection kernel for distance solving.
///
/// `holds_at` evaluates the criterion; the function returns the largest
/// distance where it holds, refined to ±0.1 m.
pub(crate) fn bracketed_distance_search<E, F>(
    mut holds_at: F,
    lo: f64,
    hi: f64,
) -> Result<f64, E>
where
    E: BracketError,
    F: FnMut(f64) -> Result<bool, E>,
{
    if !holds_at(lo)? {
        return Err(E::no_bracket(
            lo,
            hi,
            "criterion already fails at the lower end".into(),
        ));
    }
    if holds_at(hi)? {
        return Err(E::no_bracket(
            lo,
            hi,
            "criterion still holds at the upper end".into(),
        ));
    }

    // Coarse 1 m walk; remember the last passing point and its failing
    // successor so an isolated non-monotone pocket cannot derail the
    // bracket.
    let mut last_pass = lo;
    let mut d = lo + 1.0;
    let mut first_fail = hi;
    while d < hi {
        if holds_at(d)? {
            last_pass = d;
        }
        d += 1.0;
    }
    // Find the failing successor of the last passing grid point.
    let candidate = (last_pass + 1.0).min(hi);
    if !holds_at(candidate)? {
        first_fail = candidate;
    }

    let (mut pass, mut fail) = (last_pass, first_fail);
    while fail - pass > 0.1 {
        let mid = 0.5 * (pass + fail);
        if holds_at(mid)? {
            pass = mid;
        } else {
            fail = mid;
        }
    }
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const SIX_DEGREES: f64 = 6.0 * PI / 180.0;

    fn clear_scenario(turbulence: Option<TurbulenceParams>) -> LinkScenario {
        LinkScenario {
            environment: Environment::night_full_moon(),
            receiver: ReceiverParams::standard(0.10),
            water: WaterType::clear_ocean(SIX_DEGREES, 0.10).unwrap(),
            geometry: LinkGeometry::new(100.0, 0.10, 0.10, SIX_DEGREES, 530e-9, 0).unwrap(),
            turbulence,
            params: Bb84Params::default(),
        }
    }

    #[test]
    fn qber_reference_value() {
        // Composed from the frozen channel/noise oracles at clear ocean,
        // strong turbulence, d = 10 cm, L = 100 m.
        let q = qber_upper_bound(
            2.1662528081593977e-6,
            1.0,
            0.045085992570325869,
            7.6611241455182822e-4,
            0.5,
        )
        .unwrap();
        assert_relative_eq!(q, 0.10030499783067366, max_relative = 1e-12);
    }

    #[test]
    fn qber_limits() {
        // No noise, live signal: error-free.
        assert_eq!(qber_upper_bound(0.0, 1.0, 0.5, 1e-3, 0.5).unwrap(), 0.0);
        // Signal extinguished: coin-flip limit.
        let q = qber_upper_bound(1e-6, 1.0, 0.5, 0.0, 0.5).unwrap();
        assert_relative_eq!(q, 0.5, max_relative = 1e-12);
        // Both dead: indeterminate.
        assert!(matches!(
            qber_upper_bound(0.0, 1.0, 0.5, 0.0, 0.5),
            Err(Bb84Error::IndeterminateQber)
        ));
        assert!(qber_upper_bound(-1e-9, 1.0, 0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn qber_turbid_limit_reduction() {
        // With μ = 1 and η n_S l ≪ 1 the bound collapses to
        // 2 n_N / (n_S l + 4 n_N).
        let (n_n, n_s, l) = (3e-6, 1.0, 1e-4);
        let full = qber_upper_bound(n_n, n_s, 1.0, l, 1e-12).unwrap();
        let reduced = 2.0 * n_n / (n_s * l + 4.0 * n_n);
        assert_relative_eq!(full, reduced, max_relative = 1e-9);
    }

    #[test]
    fn nonturbulent_algebraic_points() {
        // n_S μ₀ l = 2 n_N → 1/3 and = 4 n_N → 1/4, straight from the form
        // 2 n_N / (n_S μ₀ l + 4 n_N).
        let n_n = 1e-6;
        assert_relative_eq!(
            qber_nonturbulent(n_n, 1.0, 0.5, 4e-6).unwrap(),
            1.0 / 3.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            qber_nonturbulent(n_n, 1.0, 0.5, 8e-6).unwrap(),
            0.25,
            max_relative = 1e-12
        );
        assert_eq!(qber_nonturbulent(0.0, 1.0, 0.5, 1e-3).unwrap(), 0.0);
        assert!(matches!(
            qber_nonturbulent(0.0, 1.0, 0.5, 0.0),
            Err(Bb84Error::IndeterminateQber)
        ));
    }

    #[test]
    fn reconciliation_reference_values() {
        let f = reconciliation_efficiency(&Bb84Params::default()).unwrap();
        assert_relative_eq!(f, 1.0181096611728617, max_relative = 1e-12);
        let loose = Bb84Params {
            qber_threshold: 0.11,
            ..Bb84Params::default()
        };
        assert_relative_eq!(
            reconciliation_efficiency(&loose).unwrap(),
            0.5 / 0.499915958164528,
            max_relative = 1e-12
        );
        // Rates near 1 push f below 1; the value is returned as computed.
        let aggressive = Bb84Params {
            ldpc_rate: 0.999,
            ..Bb84Params::default()
        };
        assert!(reconciliation_efficiency(&aggressive).unwrap() < 1.0);
    }

    #[test]
    fn skr_reference_and_limits() {
        let p = Bb84Params::default();
        assert_eq!(skr_lower_bound(0.0, &p).unwrap(), 1.0);
        // Crossover: h = 1, so R = −f < 0.
        let half = skr_lower_bound(0.5, &p).unwrap();
        assert_relative_eq!(half, -1.0181096611728617, max_relative = 1e-12);
        // At the 0.11 security limit the rate sits just below zero.
        let at_limit = skr_lower_bound(0.11, &p).unwrap();
        assert!(at_limit < 0.0 && at_limit > -0.01);
        // Frozen composed value at the strong-turbulence 100 m QBER.
        assert_relative_eq!(
            skr_lower_bound(0.10030499783067366, &p).unwrap(),
            0.051565815554161356,
            max_relative = 1e-12
        );
    }

    #[test]
    fn skr_strictly_decreasing_in_qber() {
        let p = Bb84Params::default();
        let mut previous = f64::INFINITY;
        let mut q = 0.01;
        while q < 0.5 {
            let r = skr_lower_bound(q, &p).unwrap();
            assert!(r < previous);
            previous = r;
            q += 0.015;
        }
    }

    #[test]
    fn qber_bound_monotonicity() {
        let base = qber_upper_bound(2e-6, 1.0, 0.3, 1e-3, 0.5).unwrap();
        // More noise hurts.
        assert!(qber_upper_bound(4e-6, 1.0, 0.3, 1e-3, 0.5).unwrap() > base);
        // More signal photons help.
        assert!(qber_upper_bound(2e-6, 2.0, 0.3, 1e-3, 0.5).unwrap() < base);
        // Better transmittance helps.
        assert!(qber_upper_bound(2e-6, 1.0, 0.3, 2e-3, 0.5).unwrap() < base);
    }

    #[test]
    fn report_composes_components() {
        let scenario = clear_scenario(Some(TurbulenceParams::strong()));
        let quad = QuadratureSpec::default();
        let report = direct_link_report(&scenario, 100.0, &quad).unwrap();
        assert_relative_eq!(report.qber_upper, 0.10030499783067366, max_relative = 1e-7);
        assert_relative_eq!(report.mu, 0.045085992570325869, max_relative = 1e-7);
        assert_relative_eq!(report.path_loss, 7.6611241455182822e-4, max_relative = 1e-12);
        assert_relative_eq!(report.noise, 2.1662528081593977e-6, max_relative = 1e-12);
        assert!(report.skr_lower > 0.0);
        assert!(report.mu0 > report.mu);
    }

    #[test]
    fn nonturbulent_report_uses_vacuum_transfer() {
        let scenario = clear_scenario(None);
        let quad = QuadratureSpec::default();
        let report = direct_link_report(&scenario, 100.0, &quad).unwrap();
        assert_eq!(report.mu, report.mu0);
        let expected =
            qber_nonturbulent(report.noise, 1.0, report.mu0, report.path_loss).unwrap();
        assert_eq!(report.qber_upper, expected);
    }

    #[test]
    fn distance_search_brackets_and_refines() {
        let scenario = clear_scenario(Some(TurbulenceParams::strong()));
        let quad = QuadratureSpec::default();
        let d = achievable_distance(
            &scenario,
            DistanceCriterion::QberAtMost(0.11),
            5.0,
            160.0,
            &quad,
        )
        .unwrap();
        // The QBER bound must flip right around the solution.
        let before = direct_link_report(&scenario, d, &quad).unwrap();
        let after = direct_link_report(&scenario, d + 0.2, &quad).unwrap();
        assert!(before.qber_upper <= 0.11);
        assert!(after.qber_upper > 0.11);
    }

    #[test]
    fn distance_search_rejects_bad_brackets() {
        let scenario = clear_scenario(Some(TurbulenceParams::strong()));
        let quad = QuadratureSpec::default();
        // Criterion still holds at the top of a short range.
        assert!(matches!(
            achievable_distance(
                &scenario,
                DistanceCriterion::QberAtMost(0.11),
                5.0,
                20.0,
                &quad
            ),
            Err(Bb84Error::NoBracket { .. })
        ));
        // Criterion already fails at the bottom of a deep range.
        assert!(matches!(
            achievable_distance(
                &scenario,
                DistanceCriterion::QberAtMost(0.11),
                140.0,
                160.0,
                &quad
            ),
            Err(Bb84Error::NoBracket { .. })
        ));
    }

    #[test]
    fn skr_distance_not_beyond_qber_distance() {
        let scenario = clear_scenario(Some(TurbulenceParams::strong()));
        let quad = QuadratureSpec::default();
        let by_qber = achievable_distance(
            &scenario,
            DistanceCriterion::QberAtMost(0.11),
            5.0,
            160.0,
            &quad,
        )
        .unwrap();
        let by_skr =
            achievable_distance(&scenario, DistanceCriterion::PositiveSkr, 5.0, 160.0, &quad)
                .unwrap();
        assert!(by_skr <= by_qber + 0.1);
    }

    fn check_rejected(result: Result<f64, Bb84Error>) {
        assert!(matches!(result, Err(Bb84Error::InvalidParameter { .. })));
    }

    #[test]
    fn parameter_validation() {
        let mut p = Bb84Params::default();
        p.ldpc_rate = 1.0;
        assert!(p.validate().is_err());
        p = Bb84Params::default();
        p.qber_threshold = 0.5;
        assert!(p.validate().is_err());
        assert!(Bb84Params::default().validate().is_ok());
        check_rejected(qber_upper_bound(1e-6, 1.0, 1.2, 0.5, 0.5));
        check_rejected(qber_upper_bound(1e-6, 0.0, 0.5, 0.5, 0.5));
        check_rejected(skr_lower_bound(-0.1, &Bb84Params::default()));
    }
}
