//! Globally adaptive quadrature on a finite interval.
//!
//! Each panel is estimated with the embedded 7-point Gauss / 15-point Kronrod
//! pair; the panel with the largest error estimate is bisected until the
//! summed error meets the tolerance or the subdivision budget runs out. This
//! is the classic QUADPACK strategy, which copes with the oscillatory `J1`
//! integrand of the power-transfer computation and the near-endpoint
//! steepness of the wave-structure integrand.

use std::collections::BinaryHeap;

use super::NumericsError;

/// Tolerances and budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Absolute error target.
    pub abs_tol: f64,
    /// Relative error target; the effective tolerance is
    /// `max(abs_tol, rel_tol · |estimate|)`.
    pub rel_tol: f64,
    /// Maximum number of panel bisections before giving up.
    pub max_subdivisions: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 10_000,
        }
    }
}

impl QuadratureSpec {
    /// Checks the field invariants: positive tolerances, at least one panel.
    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(NumericsError::BadSpec(format!(
                "abs_tol must be positive and finite, got {}",
                self.abs_tol
            )));
        }
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(NumericsError::BadSpec(format!(
                "rel_tol must be positive and finite, got {}",
                self.rel_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(NumericsError::BadSpec(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Copy of `self` with the subdivision budget raised to at least `floor`.
    pub(crate) fn with_budget_at_least(&self, floor: u32) -> Self {
        QuadratureSpec {
            max_subdivisions: self.max_subdivisions.max(floor),
            ..*self
        }
    }
}

/// ∫ₐᵇ f(x) dx by adaptive Gauss–Kronrod bisection.
///
/// On success the result satisfies (for integrands the error estimator can
/// see) `|result − true| ≤ max(abs_tol, rel_tol·|true|)`. If the budget is
/// exhausted first, [`NumericsError::NoConvergence`] carries the best
/// estimate and its error bound.
pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::BadInterval { a, b });
    }

    let mut heap = BinaryHeap::new();
    let first = Panel::evaluate(&f, a, b);
    let mut total = first.result;
    let mut err = first.error;
    heap.push(first);

    let mut splits = 0u32;
    loop {
        let tolerance = spec.abs_tol.max(spec.rel_tol * total.abs());
        if err <= tolerance {
            return Ok(total);
        }
        if splits >= spec.max_subdivisions {
            return Err(NumericsError::NoConvergence {
                estimate: total,
                error_bound: err,
                subdivisions: splits,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval narrower than f64 spacing; cannot subdivide further.
            heap.push(worst);
            return Err(NumericsError::NoConvergence {
                estimate: total,
                error_bound: err,
                subdivisions: splits,
            });
        }
        let left = Panel::evaluate(&f, worst.a, mid);
        let right = Panel::evaluate(&f, mid, worst.b);
        total += left.result + right.result - worst.result;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        splits += 1;

        // The running totals drift by one rounding per split; re-sum
        // occasionally so tight tolerances stay honest on long runs.
        if splits % 4096 == 0 {
            total = heap.iter().map(|p| p.result).sum();
            err = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// One integration panel with its Kronrod estimate and error bound.
struct Panel {
    a: f64,
    b: f64,
    result: f64,
    error: f64,
}

impl Panel {
    fn evaluate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
        let (result, error) = qk15(f, a, b);
        Panel {
            a,
            b,
            result,
            error,
        }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

// 15-point Kronrod abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights, as tabulated by QUADPACK.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss–Kronrod 7/15 rule on `[a, b]`, returning the Kronrod estimate and a
/// rescaled error bound following the QUADPACK heuristic.
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut res_gauss = f_center * WG[3]; // the center is a Gauss node too
    let mut res_kronrod = f_center * WGK[7];
    let mut res_abs = f_center.abs() * WGK[7];

    let mut fv = [0.0f64; 15]; // samples, paired by ±abscissa
    fv[14] = f_center;
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        let sum = f1 + f2;
        res_kronrod += WGK[j] * sum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            // Odd Kronrod indices are the embedded Gauss points.
            res_gauss += WG[j / 2] * sum;
        }
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }

    let err = ((res_kronrod - res_gauss) * half).abs();
    res_abs *= half.abs();
    res_asc *= half.abs();
    (res_kronrod * half, rescale_error(err, res_abs, res_asc))
}

/// QUADPACK's error down-weighting: trust the raw Gauss/Kronrod difference
/// only up to `(200·err/resasc)^1.5` of the ascent, and never report below
/// the round-off floor of the sampled magnitudes.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err;
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && floor > e {
        floor
    } else {
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn default_spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn integrates_polynomial_exactly() {
        let got = integrate(|x| x * x, 0.0, 1.0, &default_spec()).unwrap();
        assert_abs_diff_eq!(got, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn integrates_sine_over_half_period() {
        let got = integrate(f64::sin, 0.0, std::f64::consts::PI, &default_spec()).unwrap();
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn matches_gaussian_reference() {
        // ∫₀¹ exp(−x²) dx, reference from mpmath (√π/2 · erf 1).
        let got = integrate(|x| (-x * x).exp(), 0.0, 1.0, &default_spec()).unwrap();
        assert_relative_eq!(got, 0.74682413281242703, max_relative = 1e-12);
    }

    #[test]
    fn matches_oscillatory_reference() {
        // ∫₀¹ cos(50x) dx = sin(50)/50, reference from mpmath.
        let got = integrate(|x| (50.0 * x).cos(), 0.0, 1.0, &default_spec()).unwrap();
        assert_relative_eq!(got, -0.0052474970740785757, max_relative = 1e-10);
    }

    #[test]
    fn handles_square_root_endpoint() {
        let got = integrate(f64::sqrt, 0.0, 1.0, &default_spec()).unwrap();
        assert_relative_eq!(got, 2.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn additive_over_bisection() {
        let spec = default_spec();
        let f = |x: f64| (3.0 * x).sin() * (-0.5 * x).exp() + 1.0 / (1.0 + x * x);
        let whole = integrate(f, 0.0, 2.0, &spec).unwrap();
        let left = integrate(f, 0.0, 1.3, &spec).unwrap();
        let right = integrate(f, 1.3, 2.0, &spec).unwrap();
        assert_abs_diff_eq!(whole, left + right, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_interval() {
        let spec = default_spec();
        assert!(matches!(
            integrate(|x| x, 1.0, 1.0, &spec),
            Err(NumericsError::BadInterval { .. })
        ));
        assert!(matches!(
            integrate(|x| x, 2.0, 1.0, &spec),
            Err(NumericsError::BadInterval { .. })
        ));
        assert!(matches!(
            integrate(|x| x, 0.0, f64::INFINITY, &spec),
            Err(NumericsError::BadInterval { .. })
        ));
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let spec = QuadratureSpec {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            max_subdivisions: 3,
        };
        let err = integrate(|x| (200.0 * x).cos().abs(), 0.0, 1.0, &spec).unwrap_err();
        match err {
            NumericsError::NoConvergence {
                estimate,
                error_bound,
                subdivisions,
            } => {
                assert_eq!(subdivisions, 3);
                assert!(error_bound > 0.0);
                // 2/π is the mean of |cos|; the rough estimate should at
                // least be in the right ballpark even without convergence.
                assert!((estimate - 2.0 / std::f64::consts::PI).abs() < 0.5);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn spec_validation_rejects_degenerate_fields() {
        for bad in [
            QuadratureSpec {
                abs_tol: 0.0,
                ..Default::default()
            },
            QuadratureSpec {
                rel_tol: -1.0,
                ..Default::default()
            },
            QuadratureSpec {
                max_subdivisions: 0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
