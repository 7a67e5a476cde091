//! Multi-hop BB84 over chains of passive relays.
//!
//! A passive relay redirects arriving photons toward the next node without
//! measuring them, so quantum state and protocol survive intact. Splitting
//! a span of length L into K+1 equal hops makes each hop's transmittance
//! far better than the end-to-end one, but every relay also injects its
//! local background light, which reaches the receiver attenuated only by
//! the hops still ahead of it. The achievable distance is therefore
//! maximized at some finite relay count, and in noisy or highly attenuating
//! water relaying can lose outright to the direct link.
//!
//! The QBER bound keeps the direct-link structure: Poisson statistics of
//! sift and error events, condensed into the three coefficients of
//! [`relay_coefficients`]. Setting K = 0 collapses the bound exactly onto
//! the direct-link form, which the tests pin down to 1e-12 relative.

use crate::bb84::{
    bracketed_distance_search, skr_lower_bound, Bb84Error, BracketError, DistanceCriterion,
    LinkScenario,
};
use crate::channel::{
    path_loss, power_transfer_mu, power_transfer_mu0, ChannelError, LinkGeometry,
};
use crate::noise::{
    background_photons_per_polarization, dark_counts, geometric_ratio, relay_noise_upper,
    NoiseError,
};
use crate::numerics::QuadratureSpec;

/// Errors raised by the relay-chain operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelayError {
    /// Sift and error probabilities vanished together, leaving 0/0.
    #[error("relay QBER is indeterminate: the sift probability is zero")]
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
    /// A direct-link bound underneath the relay chain failed.
    #[error(transparent)]
    Protocol(#[from] Bb84Error),
}

impl BracketError for RelayError {
    fn no_bracket(lo: f64, hi: f64, reason: String) -> Self {
        RelayError::NoBracket { lo, hi, reason }
    }
}

fn check_probability(field: &'static str, value: f64) -> Result<(), RelayError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(RelayError::InvalidParameter {
            field,
            message: format!("must lie in [0, 1], got {value}"),
        })
    }
}

/// Hop decomposition of a relay-assisted span.
///
/// K relays cut the span into K+1 equal hops; `per_hop_mu` and
/// `per_hop_loss` are the power transfer and path-loss transmittance of a
/// single hop, so the end-to-end signal fraction is `(μ·h)^(K+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayChain {
    /// End-to-end span L in m.
    pub total_length: f64,
    /// Number of intermediate passive relays K.
    pub relay_count: u32,
    /// Average power transfer μ of a single hop.
    pub per_hop_mu: f64,
    /// Path-loss transmittance h(l) of a single hop.
    pub per_hop_loss: f64,
}

impl RelayChain {
    /// Validating constructor.
    pub fn new(
        total_length: f64,
        relay_count: u32,
        per_hop_mu: f64,
        per_hop_loss: f64,
    ) -> Result<Self, RelayError> {
        if !(total_length.is_finite() && total_length > 0.0) {
            return Err(RelayError::InvalidParameter {
                field: "total_length",
                message: format!("must be positive, got {total_length}"),
            });
        }
        check_probability("per_hop_mu", per_hop_mu)?;
        check_probability("per_hop_loss", per_hop_loss)?;
        Ok(RelayChain {
            total_length,
            relay_count,
            per_hop_mu,
            per_hop_loss,
        })
    }

    /// Length of a single hop, L/(K+1).
    pub fn hop_length(&self) -> f64 {
        self.total_length / (self.relay_count + 1) as f64
    }

    /// Number of hops K+1.
    fn hops(&self) -> i32 {
        self.relay_count as i32 + 1
    }

    /// End-to-end signal transfer `(μ·h)^(K+1)`.
    pub fn end_to_end_transfer(&self) -> f64 {
        (self.per_hop_mu * self.per_hop_loss).powi(self.hops())
    }
}

/// The three coefficients condensing the relay sift/error statistics.
///
/// `a` carries the signal plus relay-accumulated background reaching the
/// receiver, `b` the locally generated noise, and `c` the fraction of `a`
/// that survives the turbulent power transfer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl RelayCoefficients {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<(), RelayError> {
        for (field, value) in [("a", self.a), ("b", self.b)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(RelayError::InvalidParameter {
                    field,
                    message: format!("must be non-negative, got {value}"),
                });
            }
        }
        check_probability("c", self.c)
    }
}

/// Geometric relay tail `Σ_{i=1..K} x^i = (1 − x^(K+1))/(1 − x) − 1`,
/// the accumulation factor of backgrounds injected at the relays only.
fn relay_tail(x: f64, relays: u32) -> f64 {
    geometric_ratio(x, relays) - 1.0
}

/// Sift/error coefficients of a relay chain.
///
/// `a = η[n_S h^(K+1) + 2 n_B0 Σ_{i=1..K} h^i]`, `b = η(2 n_B0 + 4 n_D)`,
/// and `c` is the same bracket as `a/η` with `μ·h` in place of `h`, divided
/// by it. The geometric sums are evaluated in closed form away from the
/// removable h = 1 singularity and by direct summation at it.
pub fn relay_coefficients(
    chain: &RelayChain,
    n_s: f64,
    n_b0: f64,
    n_d: f64,
    eta: f64,
) -> Result<RelayCoefficients, RelayError> {
    if !(n_s.is_finite() && n_s > 0.0) {
        return Err(RelayError::InvalidParameter {
            field: "n_s",
            message: format!("must be positive, got {n_s}"),
        });
    }
    for (field, value) in [("n_b0", n_b0), ("n_d", n_d)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(RelayError::InvalidParameter {
                field,
                message: format!("must be a non-negative count, got {value}"),
            });
        }
    }
    check_probability("eta", eta)?;

    let h = chain.per_hop_loss;
    let mu_h = chain.per_hop_mu * h;
    let hops = chain.hops();
    let signal = n_s * h.powi(hops) + 2.0 * n_b0 * relay_tail(h, chain.relay_count);
    let captured = n_s * mu_h.powi(hops) + 2.0 * n_b0 * relay_tail(mu_h, chain.relay_count);
    if signal == 0.0 {
        return Err(RelayError::IndeterminateQber);
    }
    Ok(RelayCoefficients {
        a: eta * signal,
        b: eta * (2.0 * n_b0 + 4.0 * n_d),
        c: captured / signal,
    })
}

/// Shared numerator of both printed QBER forms, without its leading
/// constant: `η n̂_N e^(−4η n̂_N) (1 − μ^(K+1) + e^(−η n_S h^(K+1)) μ^(K+1))`.
fn qber_numerator_core(chain: &RelayChain, n_hat_n: f64, eta: f64, n_s: f64) -> f64 {
    let hops = chain.hops();
    let h_end = chain.per_hop_loss.powi(hops);
    let mu_end = chain.per_hop_mu.powi(hops);
    let survival = 1.0 - mu_end + (-eta * n_s * h_end).exp() * mu_end;
    eta * n_hat_n * (-4.0 * eta * n_hat_n).exp() * survival
}

fn check_qber_inputs(n_hat_n: f64, eta: f64, n_s: f64) -> Result<(), RelayError> {
    if !(n_hat_n.is_finite() && n_hat_n >= 0.0) {
        return Err(RelayError::InvalidParameter {
            field: "n_hat_n",
            message: format!("must be a non-negative count, got {n_hat_n}"),
        });
    }
    if !(n_s.is_finite() && n_s > 0.0) {
        return Err(RelayError::InvalidParameter {
            field: "n_s",
            message: format!("must be positive, got {n_s}"),
        });
    }
    check_probability("eta", eta)
}

/// Upper bound on the QBER of a relay chain.
///
/// `QBER ≤ 2η n̂_N e^(−4η n̂_N) (1 − μ^(K+1) + e^(−η n_S h^(K+1)) μ^(K+1))
/// / [b e^(−b) (1 − c) + (a+b) e^(−(a+b)) c]`: the numerator counts noise
/// photons that survive sifting, the denominator the total sift
/// probability split between the noise-only and signal-bearing branches.
pub fn relay_qber_upper(
    chain: &RelayChain,
    coefficients: &RelayCoefficients,
    n_hat_n: f64,
    eta: f64,
    n_s: f64,
) -> Result<f64, RelayError> {
    check_qber_inputs(n_hat_n, eta, n_s)?;
    coefficients.validate()?;
    let RelayCoefficients { a, b, c } = *coefficients;
    let denominator = b * (-b).exp() * (1.0 - c) + (a + b) * (-(a + b)).exp() * c;
    if denominator == 0.0 {
        return Err(RelayError::IndeterminateQber);
    }
    Ok(2.0 * qber_numerator_core(chain, n_hat_n, eta, n_s) / denominator)
}

/// The same bound as [`relay_qber_upper`], written the way it appears
/// inside the key-rate entropy argument: numerator halved and the
/// denominator weights `b` and `a+b` halved with it. The common factor 2
/// cancels, so both forms agree to rounding; the tests assert it instead
/// of silently picking one.
pub fn relay_qber_upper_rate_form(
    chain: &RelayChain,
    coefficients: &RelayCoefficients,
    n_hat_n: f64,
    eta: f64,
    n_s: f64,
) -> Result<f64, RelayError> {
    check_qber_inputs(n_hat_n, eta, n_s)?;
    coefficients.validate()?;
    let RelayCoefficients { a, b, c } = *coefficients;
    let denominator =
        b / 2.0 * (-b).exp() * (1.0 - c) + (a + b) / 2.0 * (-(a + b)).exp() * c;
    if denominator == 0.0 {
        return Err(RelayError::IndeterminateQber);
    }
    Ok(qber_numerator_core(chain, n_hat_n, eta, n_s) / denominator)
}

/// Lower bound on the relay-chain SKR in bits per sifted bit; identical in
/// structure to the direct-link bound, `R = 1 − (1 + f)·h(QBER)`.
pub fn relay_skr_lower(
    qber_bound: f64,
    params: &crate::bb84::Bb84Params,
) -> Result<f64, RelayError> {
    Ok(skr_lower_bound(qber_bound, params)?)
}

/// One evaluated operating point of a relay chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayReport {
    /// End-to-end distance in m.
    pub distance: f64,
    /// Hop decomposition with the per-hop transfer values.
    pub chain: RelayChain,
    /// Upper bound on the QBER.
    pub qber_upper: f64,
    /// Lower bound on the SKR, in bits per sifted bit (may be negative).
    pub skr_lower: f64,
    /// Upper bound n̂_N on the per-detector noise count.
    pub noise_upper: f64,
    /// Sift/error coefficients entering the QBER bound.
    pub coefficients: RelayCoefficients,
}

/// Evaluates the full relay bound chain at one end-to-end distance.
///
/// The relay count is taken from `scenario.geometry`; hop length, per-hop
/// transfer and accumulated noise are derived from the given distance. A
/// scenario without turbulence parameters uses the vacuum transfer μ₀ per
/// hop.
pub fn relay_link_report(
    scenario: &LinkScenario,
    distance: f64,
    quad: &QuadratureSpec,
) -> Result<RelayReport, RelayError> {
    scenario.params.validate()?;
    let g = &scenario.geometry;
    let geom = LinkGeometry::new(
        distance,
        g.tx_diameter,
        g.rx_diameter,
        g.divergence,
        g.wavelength,
        g.relay_count,
    )?;
    let hop = geom.hop_length();
    let h = path_loss(&geom, &scenario.water, hop)?;
    let mu = match &scenario.turbulence {
        Some(t) => power_transfer_mu(&geom, t, hop, quad)?,
        None => power_transfer_mu0(&geom, hop, quad)?,
    };
    let chain = RelayChain::new(distance, g.relay_count, mu, h)?;

    let n_s = scenario.params.mean_photon_number;
    let eta = scenario.receiver.quantum_efficiency;
    let n_b0 =
        background_photons_per_polarization(&scenario.environment, &scenario.receiver, g.wavelength);
    let n_d = dark_counts(&scenario.receiver);
    let noise_upper =
        relay_noise_upper(&scenario.environment, &scenario.receiver, &scenario.water, &geom)?;
    let coefficients = relay_coefficients(&chain, n_s, n_b0, n_d, eta)?;
    let qber_upper = relay_qber_upper(&chain, &coefficients, noise_upper, eta, n_s)?;
    Ok(RelayReport {
        distance,
        chain,
        qber_upper,
        skr_lower: relay_skr_lower(qber_upper, &scenario.params)?,
        noise_upper,
        coefficients,
    })
}

/// Largest distance in `[lo, hi]` where the criterion still holds for the
/// relay count carried by the scenario geometry, to ±0.1 m.
pub fn relay_achievable_distance(
    scenario: &LinkScenario,
    criterion: DistanceCriterion,
    lo: f64,
    hi: f64,
    quad: &QuadratureSpec,
) -> Result<f64, RelayError> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(RelayError::InvalidParameter {
            field: "search range",
            message: format!("need 0 < lo < hi, got [{lo}, {hi}]"),
        });
    }
    let holds_at = |d: f64| -> Result<bool, RelayError> {
        let report = relay_link_report(scenario, d, quad)?;
        Ok(criterion.holds_values(report.qber_upper, report.skr_lower))
    };
    bracketed_distance_search(holds_at, lo, hi)
}

/// The relay count maximizing achievable distance, with that distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayOptimum {
    /// Maximizing relay count K*.
    pub relay_count: u32,
    /// Achievable distance at K*, in m.
    pub distance: f64,
}

/// Exhaustive relay-count search over K = 0..=K_max.
///
/// Every count is evaluated with [`relay_achievable_distance`]; counts
/// whose chain cannot even satisfy the criterion at `lo` are skipped. Ties
/// break toward fewer relays, which dominate on hardware cost at equal
/// distance. Errors if no count reaches `lo`, or if any count still
/// satisfies the criterion at `hi` (the range must contain the optimum).
pub fn optimal_relay_count(
    scenario: &LinkScenario,
    k_max: u32,
    criterion: DistanceCriterion,
    lo: f64,
    hi: f64,
    quad: &QuadratureSpec,
) -> Result<RelayOptimum, RelayError> {
    let mut best: Option<RelayOptimum> = None;
    for relay_count in 0..=k_max {
        let mut candidate = scenario.clone();
        candidate.geometry.relay_count = relay_count;
        let report = relay_link_report(&candidate, lo, quad)?;
        if !criterion.holds_values(report.qber_upper, report.skr_lower) {
            continue;
        }
        let distance = relay_achievable_distance(&candidate, criterion, lo, hi, quad)?;
        if best.map_or(true, |b| distance > b.distance) {
            best = Some(RelayOptimum {
                relay_count,
                distance,
            });
        }
    }
    best.ok_or_else(|| RelayError::NoBracket {
        lo,
        hi,
        reason: format!("no relay count in 0..={k_max} satisfies the criterion at {lo} m"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bb84::{qber_upper_bound, Bb84Params};
    use crate::channel::{TurbulenceParams, WaterType, CALIBRATED_EDDY_RATIO};
    use crate::noise::{Environment, ReceiverParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const SIX_DEGREES: f64 = 6.0 * PI / 180.0;

    fn chain(relays: u32, mu: f64, h: f64) -> RelayChain {
        RelayChain::new(100.0, relays, mu, h).unwrap()
    }

    #[test]
    fn coefficients_collapse_at_zero_relays() {
        let c = chain(0, 0.37, 0.62);
        let coeffs = relay_coefficients(&c, 1.3, 5e-4, 2e-6, 0.5).unwrap();
        // No relays: the background tails vanish and only the direct terms
        // remain.
        assert_relative_eq!(coeffs.a, 0.5 * 1.3 * 0.62, max_relative = 1e-15);
        assert_relative_eq!(coeffs.b, 0.5 * (2.0 * 5e-4 + 4.0 * 2e-6), max_relative = 1e-15);
        assert_relative_eq!(coeffs.c, 0.37, max_relative = 1e-14);
    }

    #[test]
    fn coefficients_match_hand_summed_series() {
        // K = 2, h = 0.5, μ = 0.8: both geometric series written out by
        // hand. tail(h) = 0.5 + 0.25, tail(μh) = 0.4 + 0.16.
        let c = chain(2, 0.8, 0.5);
        let coeffs = relay_coefficients(&c, 1.0, 0.01, 0.001, 0.5).unwrap();
        let signal = 0.5f64.powi(3) + 2.0 * 0.01 * 0.75;
        let captured = 0.4f64.powi(3) + 2.0 * 0.01 * 0.56;
        assert_relative_eq!(coeffs.a, 0.5 * signal, max_relative = 1e-13);
        assert_relative_eq!(coeffs.b, 0.5 * (0.02 + 0.004), max_relative = 1e-15);
        assert_relative_eq!(coeffs.c, captured / signal, max_relative = 1e-13);
    }

    #[test]
    fn unit_power_transfer_gives_unit_c() {
        let c = chain(3, 1.0, 0.7);
        let coeffs = relay_coefficients(&c, 1.0, 1e-3, 1e-6, 0.5).unwrap();
        assert_eq!(coeffs.c, 1.0);
    }

    #[test]
    fn unit_hop_loss_uses_direct_summation() {
        // h = 1 is the removable singularity of the geometric ratio; the
        // tail must come out as exactly K.
        let c = chain(3, 0.9, 1.0);
        let coeffs = relay_coefficients(&c, 2.0, 0.01, 0.0, 1.0).unwrap();
        assert_relative_eq!(coeffs.a, 2.0 + 2.0 * 0.01 * 3.0, max_relative = 1e-14);
    }

    #[test]
    fn coefficient_invariants_hold_over_random_draws() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let c = chain((next() * 8.0) as u32, next(), next());
            let coeffs =
                relay_coefficients(&c, 0.1 + 2.0 * next(), 1e-3 * next(), 1e-5 * next(), next());
            let Ok(coeffs) = coeffs else { continue };
            assert!(coeffs.a >= 0.0 && coeffs.b >= 0.0);
            assert!((0.0..=1.0).contains(&coeffs.c));
        }
    }

    #[test]
    fn qber_vanishes_without_noise() {
        let c = chain(2, 0.5, 0.5);
        let coeffs = relay_coefficients(&c, 1.0, 1e-4, 1e-6, 0.5).unwrap();
        assert_eq!(relay_qber_upper(&c, &coeffs, 0.0, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_perfect_channel_simplifies() {
        // μ = h = 1 forces c = 1, so only the signal branch of the sift
        // probability survives: QBER = 2η n̂ e^(−4η n̂) e^(−η n_S) /
        // [(a+b) e^(−(a+b))].
        let c = chain(1, 1.0, 1.0);
        let (n_s, n_b0, n_d, eta) = (1.0, 1e-3, 1e-4, 0.5);
        let coeffs = relay_coefficients(&c, n_s, n_b0, n_d, eta).unwrap();
        assert_eq!(coeffs.c, 1.0);
        let n_hat = 1.1e-3;
        let got = relay_qber_upper(&c, &coeffs, n_hat, eta, n_s).unwrap();
        let ab = coeffs.a + coeffs.b;
        let expected = 2.0 * eta * n_hat * (-4.0 * eta * n_hat).exp() * (-eta * n_s).exp()
            / (ab * (-ab).exp());
        assert_relative_eq!(got, expected, max_relative = 1e-14);
    }

    #[test]
    fn indeterminate_cases_are_rejected() {
        let c = chain(1, 0.0, 0.0);
        assert!(matches!(
            relay_coefficients(&c, 1.0, 0.0, 0.0, 0.5),
            Err(RelayError::IndeterminateQber)
        ));
        let ok_chain = chain(1, 0.5, 0.5);
        let zero = RelayCoefficients { a: 0.0, b: 0.0, c: 0.0 };
        assert!(matches!(
            relay_qber_upper(&ok_chain, &zero, 1e-3, 0.5, 1.0),
            Err(RelayError::IndeterminateQber)
        ));
        assert!(RelayCoefficients { a: -0.1, b: 0.0, c: 0.5 }.validate().is_err());
        assert!(RelayCoefficients { a: 0.1, b: 0.0, c: 1.5 }.validate().is_err());
        assert!(RelayChain::new(0.0, 1, 0.5, 0.5).is_err());
        assert!(RelayChain::new(100.0, 1, 1.5, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn zero_relays_reduce_to_direct_link_bound(
            h in 1e-6f64..1.0,
            mu in 0.0f64..1.0,
            n_hat in 0.0f64..1e-3,
            eta in 0.05f64..1.0,
            n_s in 0.1f64..10.0,
        ) {
            let c = RelayChain::new(50.0, 0, mu, h).unwrap();
            // Any noise split with n_B0/2 + n_D = n̂ makes b = 4η n̂, the
            // exact K = 0 correspondence between chain and direct bound.
            let coeffs = relay_coefficients(&c, n_s, n_hat, n_hat / 2.0, eta).unwrap();
            let relay = relay_qber_upper(&c, &coeffs, n_hat, eta, n_s);
            let direct = qber_upper_bound(n_hat, n_s, mu, h, eta);
            match (relay, direct) {
                (Ok(r), Ok(d)) => prop_assert!((r - d).abs() <= 1e-12 * d.abs().max(1e-300)),
                (Err(RelayError::IndeterminateQber), Err(_)) => {}
                (r, d) => prop_assert!(false, "mismatched outcomes: {r:?} vs {d:?}"),
            }
        }

        #[test]
        fn rate_form_matches_primary_form(
            relays in 0u32..6,
            h in 1e-6f64..1.0,
            mu in 1e-6f64..1.0,
            n_b0 in 0.0f64..1e-3,
            n_d in 0.0f64..1e-5,
            n_hat in 0.0f64..1e-2,
            eta in 0.05f64..1.0,
        ) {
            let c = RelayChain::new(80.0, relays, mu, h).unwrap();
            let coeffs = relay_coefficients(&c, 1.0, n_b0, n_d, eta).unwrap();
            let primary = relay_qber_upper(&c, &coeffs, n_hat, eta, 1.0);
            let halved = relay_qber_upper_rate_form(&c, &coeffs, n_hat, eta, 1.0);
            match (primary, halved) {
                (Ok(p), Ok(r)) => prop_assert!((p - r).abs() <= 1e-14 * p.abs().max(1e-300)),
                (Err(RelayError::IndeterminateQber), Err(RelayError::IndeterminateQber)) => {}
                (p, r) => prop_assert!(false, "mismatched outcomes: {p:?} vs {r:?}"),
            }
        }

        #[test]
        fn doubling_hops_squares_end_to_end_transfer(
            relays in 0u32..8,
            mu in 0.0f64..1.0,
            h in 0.0f64..1.0,
        ) {
            let single = RelayChain::new(60.0, relays, mu, h).unwrap();
            let doubled = RelayChain::new(60.0, 2 * relays + 1, mu, h).unwrap();
            let expected = single.end_to_end_transfer() * single.end_to_end_transfer();
            prop_assert!((doubled.end_to_end_transfer() - expected).abs() <= 1e-12 * expected.max(1e-300));
        }
    }

    fn night_scenario(d: f64, relays: u32, turbulence: Option<TurbulenceParams>) -> LinkScenario {
        LinkScenario {
            environment: Environment::night_full_moon(),
            receiver: ReceiverParams::standard(d),
            water: WaterType::clear_ocean(SIX_DEGREES, d).unwrap(),
            geometry: LinkGeometry::new(100.0, d, d, SIX_DEGREES, 530e-9, relays).unwrap(),
            turbulence,
            params: Bb84Params::default(),
        }
    }

    #[test]
    fn report_at_zero_relays_matches_direct_link() {
        let scenario = night_scenario(0.05, 0, Some(TurbulenceParams::strong()));
        let quad = QuadratureSpec::default();
        let relay = relay_link_report(&scenario, 80.0, &quad).unwrap();
        let direct = crate::bb84::direct_link_report(&scenario, 80.0, &quad).unwrap();
        assert_relative_eq!(relay.qber_upper, direct.qber_upper, max_relative = 1e-12);
        assert_relative_eq!(relay.skr_lower, direct.skr_lower, max_relative = 1e-9);
        assert_relative_eq!(relay.noise_upper, direct.noise, max_relative = 1e-14);
    }

    #[test]
    fn report_splits_hops_consistently() {
        let scenario = night_scenario(0.05, 2, Some(TurbulenceParams::moderate()));
        let quad = QuadratureSpec::default();
        let report = relay_link_report(&scenario, 90.0, &quad).unwrap();
        assert_eq!(report.chain.relay_count, 2);
        assert_relative_eq!(report.chain.hop_length(), 30.0, max_relative = 1e-15);
        // A 30 m hop loses far less than a 90 m direct shot.
        let direct = crate::bb84::direct_link_report(
            &night_scenario(0.05, 0, Some(TurbulenceParams::moderate())),
            90.0,
            &quad,
        )
        .unwrap();
        assert!(report.chain.per_hop_loss > direct.path_loss);
        assert!(report.noise_upper > direct.noise);
    }

    #[test]
    fn optimal_count_is_order_independent() {
        let scenario = night_scenario(
            0.05,
            0,
            Some(TurbulenceParams::strong().with_d_r(CALIBRATED_EDDY_RATIO)),
        );
        let quad = QuadratureSpec::default();
        let best = optimal_relay_count(
            &scenario,
            3,
            DistanceCriterion::QberAtMost(0.11),
            40.0,
            130.0,
            &quad,
        )
        .unwrap();

        // Reverse-order scan with the same tie rule must land on the same
        // count; pure evaluation means permutation cannot matter.
        let mut reversed: Option<RelayOptimum> = None;
        for relay_count in (0..=3u32).rev() {
            let mut candidate = scenario.clone();
            candidate.geometry.relay_count = relay_count;
            let distance = relay_achievable_distance(
                &candidate,
                DistanceCriterion::QberAtMost(0.11),
                40.0,
                130.0,
                &quad,
            )
            .unwrap();
            let replace = reversed.map_or(true, |b| {
                distance > b.distance || (distance == b.distance && relay_count < b.relay_count)
            });
            if replace {
                reversed = Some(RelayOptimum {
                    relay_count,
                    distance,
                });
            }
        }
        assert_eq!(best, reversed.unwrap());
        assert_eq!(
            best,
            optimal_relay_count(
                &scenario,
                3,
                DistanceCriterion::QberAtMost(0.11),
                40.0,
                130.0,
                &quad,
            )
            .unwrap()
        );
    }

    #[test]
    fn out_of_reach_counts_are_skipped() {
        // Turbid water at 30 m fails for every K; the search must report
        // the empty candidate set rather than panic.
        let scenario = LinkScenario {
            water: WaterType::turbid_harbor(SIX_DEGREES, 0.05).unwrap(),
            ..night_scenario(0.05, 0, Some(TurbulenceParams::strong()))
        };
        let quad = QuadratureSpec::default();
        let result = optimal_relay_count(
            &scenario,
            2,
            DistanceCriterion::QberAtMost(0.11),
            30.0,
            60.0,
            &quad,
        );
        assert!(matches!(result, Err(RelayError::NoBracket { .. })));
    }
}
