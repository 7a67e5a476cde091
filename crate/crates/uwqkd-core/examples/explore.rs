// Scratch: k_max sensitivity of the relay optimum and numeric-WSF
// convergence at the millimetre end.

use uwqkd_core::bb84::{Bb84Params, DistanceCriterion, LinkScenario};
use uwqkd_core::channel::{
    wave_structure_numeric, LinkGeometry, TurbulenceParams, WaterType, CALIBRATED_EDDY_RATIO,
};
use uwqkd_core::noise::{Environment, ReceiverParams};
use uwqkd_core::numerics::QuadratureSpec;
use uwqkd_core::relay::{optimal_relay_count, relay_achievable_distance};

const DIVERGENCE: f64 = 6f64.to_radians();
const WAVELENGTH: f64 = 530e-9;

fn main() {
    let quad = QuadratureSpec::default();
    let strong = LinkScenario {
        environment: Environment::night_full_moon(),
        receiver: ReceiverParams::standard(0.05),
        water: WaterType::clear_ocean(DIVERGENCE, 0.05).unwrap(),
        geometry: LinkGeometry::new(100.0, 0.05, 0.05, DIVERGENCE, WAVELENGTH, 0).unwrap(),
        turbulence: Some(TurbulenceParams::strong().with_d_r(CALIBRATED_EDDY_RATIO)),
        params: Bb84Params::default(),
    };

    for k in 0..=8u32 {
        let mut ls = strong.clone();
        ls.geometry.relay_count = k;
        let d = relay_achievable_distance(
            &ls,
            DistanceCriterion::QberAtMost(0.11),
            1.0,
            1000.0,
            &quad,
        )
        .unwrap();
        println!("strong K={k}: {d:8.3}");
    }
    let best = optimal_relay_count(
        &strong,
        8,
        DistanceCriterion::QberAtMost(0.11),
        1.0,
        1000.0,
        &quad,
    )
    .unwrap();
    println!("optimum: K*={} at {:.3} m", best.relay_count, best.distance);

    let tight = QuadratureSpec {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_subdivisions: 60,
    };
    for (name, t) in [
        ("weak", TurbulenceParams::weak()),
        ("moderate", TurbulenceParams::moderate()),
        ("strong", TurbulenceParams::strong()),
    ] {
        for rho in [1e-3, 3e-3] {
            let coarse = wave_structure_numeric(rho, 100.0, &t, WAVELENGTH, &quad).unwrap();
            let fine = wave_structure_numeric(rho, 100.0, &t, WAVELENGTH, &tight).unwrap();
            println!(
                "{name:8} rho={rho:5.0e}: default {coarse:.9e}  tight {fine:.9e}  rel {:.2e}",
                ((coarse - fine) / fine).abs()
            );
        }
    }
}
