//! Property tests for the documented invariants of the physics layer.

use std::f64::consts::PI;

use proptest::prelude::*;
use uwqkd_core::channel::{
    path_loss, power_transfer_mu, wave_structure_closed, LinkGeometry, TurbulenceParams, WaterType,
};
use uwqkd_core::numerics::QuadratureSpec;

const SIX_DEGREES: f64 = 6.0 * PI / 180.0;
const WAVELENGTH: f64 = 530e-9;

fn any_turbulence() -> impl Strategy<Value = TurbulenceParams> {
    prop_oneof![
        Just(TurbulenceParams::weak()),
        Just(TurbulenceParams::moderate()),
        Just(TurbulenceParams::strong()),
    ]
}

proptest! {
    /// Transmittance is a probability for any admissible water and distance.
    #[test]
    fn path_loss_lies_in_unit_interval(
        extinction in 0.01f64..3.0,
        t in 0.05f64..0.95,
        distance in 0.1f64..500.0,
        d in 0.05f64..0.30,
    ) {
        let geom = LinkGeometry::new(distance, d, d, SIX_DEGREES, WAVELENGTH, 0).unwrap();
        let water = WaterType::custom(extinction, t).unwrap();
        let h = path_loss(&geom, &water, distance).unwrap();
        prop_assert!(h > 0.0 && h <= 1.0);
    }

    /// Splitting a path into K+1 equal hops multiplies the hop transmittances
    /// into the rearranged single-exponent form.
    #[test]
    fn path_loss_hop_splitting_identity(
        extinction in 0.01f64..3.0,
        t in 0.05f64..0.95,
        length in 1.0f64..200.0,
        d in 0.05f64..0.30,
        relays in 0u32..6,
    ) {
        let geom = LinkGeometry::new(length, d, d, SIX_DEGREES, WAVELENGTH, relays).unwrap();
        let water = WaterType::custom(extinction, t).unwrap();
        let hops = (relays + 1) as f64;
        let per_hop = path_loss(&geom, &water, length / hops).unwrap();
        let product = per_hop.powi(relays as i32 + 1);
        let rearranged =
            (-extinction * length.powf(1.0 - t) * (hops * d / SIX_DEGREES).powf(t)).exp();
        prop_assert!((product - rearranged).abs() <= 1e-12 * rearranged.abs().max(1e-300));
    }

    /// W(ρ, L) is non-negative, zero at ρ = 0, and strictly increasing in ρ.
    #[test]
    fn wave_structure_monotone_in_rho(
        turbulence in any_turbulence(),
        length in 1.0f64..200.0,
        rho_lo in 1e-5f64..0.2,
        step in 1e-5f64..0.05,
    ) {
        let w0 = wave_structure_closed(0.0, length, &turbulence, WAVELENGTH).unwrap();
        prop_assert_eq!(w0, 0.0);
        let w_lo = wave_structure_closed(rho_lo, length, &turbulence, WAVELENGTH).unwrap();
        let w_hi = wave_structure_closed(rho_lo + step, length, &turbulence, WAVELENGTH).unwrap();
        prop_assert!(w_lo > 0.0);
        prop_assert!(w_hi > w_lo);
    }
}

proptest! {
    // Each μ evaluation runs a full adaptive quadrature, so keep the case
    // count low enough for the suite to stay fast.
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// μ stays inside [0, 1] over the workable geometry range.
    #[test]
    fn power_transfer_is_probability(
        turbulence in any_turbulence(),
        hop in 1.0f64..200.0,
        d in 0.02f64..0.30,
    ) {
        let geom = LinkGeometry::new(hop, d, d, SIX_DEGREES, WAVELENGTH, 0).unwrap();
        let mu = power_transfer_mu(&geom, &turbulence, hop, &QuadratureSpec::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&mu));
    }
}
