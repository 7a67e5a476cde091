//! Monte Carlo photon transport for receiver gate-time tuning.
//!
//! The analytic link bounds treat the water as an attenuator; the transport
//! simulation resolves what the attenuation is made of. Photons are launched
//! with the source's spot size and divergence, walk exponential free paths,
//! lose the absorbed weight fraction at every interaction, and deflect by the
//! two-term Henyey-Greenstein phase function until they either die below a
//! weight threshold or cross the receiver plane. Crossings within the
//! aperture, the field of view, and the gate window are detections; their
//! time-of-arrival spread (after subtracting the ballistic flight time) is
//! what the receiver gate must straddle.
//!
//! A short gate cuts background noise linearly but starts rejecting
//! late-arriving scattered signal; [`optimize_gate_time`] locates the QBER
//! minimum of that trade-off by re-filtering one simulation's arrival
//! records, so the whole gate curve costs a single transport run.

mod phase;

pub use phase::{sample_scatter_angle, tthg_params_from_b, ScatterModel};

use crate::constants::SPEED_OF_LIGHT;
use crate::numerics::RandomStream;

use rayon::prelude::*;
use std::f64::consts::PI;

/// Photons per parallel work unit; fixed so results are independent of the
/// thread count. Chunk `i` draws from `RandomStream::new(seed, i)`, so a
/// seed and a photon count fully determine the partitioning.
pub const CHUNK_SIZE: u64 = 16_384;

/// Errors raised by the transport operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum McError {
    /// A parameter violated a documented invariant.
    #[error("invalid {field}: {message}")]
    InvalidParameter {
        field: &'static str,
        message: String,
    },
    /// The two-term HG regressions admit no forward asymmetry in (0, 1).
    #[error("no two-term HG shape reproduces mean cosine {mean_cosine}")]
    NoPhaseRoot { mean_cosine: f64 },
    /// The gate-time search needs at least one candidate.
    #[error("gate-time grid is empty")]
    EmptyGrid,
}

/// A photon packet in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Photon {
    /// Position (x, y, z) in m; the source plane is z = 0.
    pub position: [f64; 3],
    /// Unit direction cosines (μx, μy, μz).
    pub direction: [f64; 3],
    /// Packet weight in (0, 1].
    pub weight: f64,
    /// Geometric path length travelled so far, in m.
    pub elapsed_path: f64,
}

/// Launches a photon from the source spot.
///
/// The start point sits on the radius-`r0` rim at a uniform azimuth φ0, and
/// the initial direction tilts off-axis by θ0 ~ U[−θ0_max, θ0_max] in the
/// same azimuthal plane. The packet starts with full weight.
pub fn launch_photon(r0: f64, theta0_max: f64, rng: &mut RandomStream) -> Photon {
    let phi0 = rng.next_in(0.0, 2.0 * PI);
    let theta0 = rng.next_in(-theta0_max, theta0_max);
    let (sin_p, cos_p) = phi0.sin_cos();
    let (sin_t, cos_t) = theta0.sin_cos();
    Photon {
        position: [r0 * cos_p, r0 * sin_p, 0.0],
        direction: [sin_t * cos_p, sin_t * sin_p, cos_t],
        weight: 1.0,
        elapsed_path: 0.0,
    }
}

/// Draws a free path length `δ = −ln(q)/ς` between interactions.
///
/// Exponential with mean `1/ς`; `q` is drawn from (0, 1] so the logarithm
/// stays finite.
pub fn sample_path_length(extinction: f64, rng: &mut RandomStream) -> f64 {
    -rng.next_unit_open_low().ln() / extinction
}

/// Deposits the absorbed fraction at an interaction: `w′ = w·β/(α + β)`.
pub fn update_weight(weight: f64, absorption: f64, scattering: f64) -> f64 {
    weight * scattering / (absorption + scattering)
}

/// Rotates a unit direction by deflection θ at azimuth φ.
///
/// Standard local-frame rotation about the current direction, with the
/// dedicated near-axis branch for |μz| ≈ 1 where the general frame
/// degenerates. The result is renormalized to keep the unit-norm drift
/// below 1e-9 over arbitrarily long scattering chains.
pub fn rotate_direction(dir: [f64; 3], theta: f64, phi: f64) -> [f64; 3] {
    let (sin_t, cos_t) = theta.sin_cos();
    let (sin_p, cos_p) = phi.sin_cos();
    let [ux, uy, uz] = dir;
    let mut out = if uz.abs() > 0.9999 {
        [sin_t * cos_p, sin_t * sin_p, cos_t * uz.signum()]
    } else {
        let denom = (1.0 - uz * uz).sqrt();
        [
            sin_t * (ux * uz * cos_p - uy * sin_p) / denom + ux * cos_t,
            sin_t * (uy * uz * cos_p + ux * sin_p) / denom + uy * cos_t,
            -sin_t * cos_p * denom + uz * cos_t,
        ]
    };
    let norm = (out[0] * out[0] + out[1] * out[1] + out[2] * out[2]).sqrt();
    out[0] /= norm;
    out[1] /= norm;
    out[2] /= norm;
    out
}

/// Receiver geometry and acceptance.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    /// Aperture radius in m.
    pub aperture_radius: f64,
    /// Field of view Ω in rad; arrivals with AoA ≥ Ω are rejected.
    pub fov: f64,
    /// Gate window in s applied to the normalized time of arrival.
    pub gate_time: f64,
    /// Receiver plane position z = L in m.
    pub plane_z: f64,
    /// Refractive index of the water, converting path length to time.
    pub refractive_index: f64,
}

impl DetectorSpec {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<(), McError> {
        for (field, value) in [
            ("aperture_radius", self.aperture_radius),
            ("fov", self.fov),
            ("gate_time", self.gate_time),
            ("plane_z", self.plane_z),
            ("refractive_index", self.refractive_index),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(McError::InvalidParameter {
                    field,
                    message: format!("must be positive, got {value}"),
                });
            }
        }
        if self.fov > PI {
            return Err(McError::InvalidParameter {
                field: "fov",
                message: format!("must not exceed π, got {}", self.fov),
            });
        }
        Ok(())
    }
}

/// Terminal fate of one transported photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// Crossed the receiver plane inside aperture, FOV, and gate.
    Detected {
        /// Normalized time of arrival `t′ = (path − L)·n/c0` in s.
        toa: f64,
        /// Angle of arrival from the receiver axis, in rad.
        aoa: f64,
        /// Surviving packet weight.
        weight: f64,
    },
    /// Weight fell below the threshold (or the step budget truncated a
    /// wanderer, flagged for diagnostics).
    Absorbed { truncated: bool },
    /// Crossed the receiver plane outside the acceptance.
    Missed,
}

/// A gate-free arrival record, kept for gate-time re-filtering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    /// Normalized time of arrival in s.
    pub toa: f64,
    /// Angle of arrival in rad.
    pub aoa: f64,
    /// Surviving packet weight.
    pub weight: f64,
}

enum TraceEnd {
    /// Crossed the receiver plane inside aperture and FOV.
    Accepted { toa: f64, aoa: f64, weight: f64 },
    /// Crossed the receiver plane outside aperture or FOV.
    Rejected,
    Died { truncated: bool },
}

/// Walks one photon to its terminal event, ignoring the gate window.
///
/// The plane-crossing test pre-empts the interaction at the end of a step:
/// a photon that would pass z = L is evaluated at the linear crossing point
/// with its current weight, before any further absorption.
fn trace(
    mut photon: Photon,
    model: &ScatterModel,
    detector: &DetectorSpec,
    weight_threshold: f64,
    max_interactions: u32,
    rng: &mut RandomStream,
) -> TraceEnd {
    let extinction = model.extinction();
    for _ in 0..max_interactions {
        let step = sample_path_length(extinction, rng);
        let [ux, uy, uz] = photon.direction;
        let z_end = photon.position[2] + uz * step;

        if uz > 0.0 && z_end >= detector.plane_z {
            let s = (detector.plane_z - photon.position[2]) / uz;
            let x = photon.position[0] + ux * s;
            let y = photon.position[1] + uy * s;
            let path = photon.elapsed_path + s;
            let toa = (path - detector.plane_z) * detector.refractive_index / SPEED_OF_LIGHT;
            let aoa = uz.clamp(-1.0, 1.0).acos();
            if x * x + y * y <= detector.aperture_radius * detector.aperture_radius
                && aoa < detector.fov
            {
                return TraceEnd::Accepted {
                    toa,
                    aoa,
                    weight: photon.weight,
                };
            }
            return TraceEnd::Rejected;
        }

        photon.position[0] += ux * step;
        photon.position[1] += uy * step;
        photon.position[2] = z_end;
        photon.elapsed_path += step;

        photon.weight = update_weight(photon.weight, model.absorption, model.scattering);
        if photon.weight < weight_threshold {
            return TraceEnd::Died { truncated: false };
        }
        let (theta, phi) = sample_scatter_angle(model, rng);
        photon.direction = rotate_direction(photon.direction, theta, phi);
    }
    TraceEnd::Died { truncated: true }
}

/// Walks one photon to its terminal event, gate included.
pub fn propagate(
    photon: Photon,
    model: &ScatterModel,
    detector: &DetectorSpec,
    weight_threshold: f64,
    max_interactions: u32,
    rng: &mut RandomStream,
) -> Outcome {
    match trace(
        photon,
        model,
        detector,
        weight_threshold,
        max_interactions,
        rng,
    ) {
        TraceEnd::Accepted { toa, aoa, weight } if toa < detector.gate_time => {
            Outcome::Detected { toa, aoa, weight }
        }
        TraceEnd::Accepted { .. } | TraceEnd::Rejected => Outcome::Missed,
        TraceEnd::Died { truncated } => Outcome::Absorbed { truncated },
    }
}

/// Everything needed to run a transport batch.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    /// Source spot radius r0 in m.
    pub launch_radius: f64,
    /// Half-divergence θ0_max of the launch cone, in rad.
    pub launch_divergence: f64,
    /// Water optics and phase function.
    pub model: ScatterModel,
    /// Receiver geometry and acceptance.
    pub detector: DetectorSpec,
    /// Weight below which a packet counts as absorbed.
    pub weight_threshold: f64,
    /// Interaction budget per photon before truncation.
    pub max_interactions: u32,
    /// Upper edge of the ToA histogram, in s (the bit period).
    pub toa_range: f64,
    /// Number of ToA histogram bins.
    pub toa_bins: usize,
    /// Number of AoA histogram bins over [0, π/2].
    pub aoa_bins: usize,
}

impl McConfig {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<(), McError> {
        if !self.launch_radius.is_finite() || self.launch_radius < 0.0 {
            return Err(McError::InvalidParameter {
                field: "launch_radius",
                message: format!("must be non-negative, got {}", self.launch_radius),
            });
        }
        if !self.launch_divergence.is_finite()
            || !(0.0..=PI / 2.0).contains(&self.launch_divergence)
        {
            return Err(McError::InvalidParameter {
                field: "launch_divergence",
                message: format!("must lie in [0, π/2], got {}", self.launch_divergence),
            });
        }
        if !self.weight_threshold.is_finite()
            || self.weight_threshold <= 0.0
            || self.weight_threshold >= 1.0
        {
            return Err(McError::InvalidParameter {
                field: "weight_threshold",
                message: format!("must lie in (0, 1), got {}", self.weight_threshold),
            });
        }
        if self.max_interactions == 0 {
            return Err(McError::InvalidParameter {
                field: "max_interactions",
                message: "must allow at least one interaction".into(),
            });
        }
        if !self.toa_range.is_finite() || self.toa_range <= 0.0 {
            return Err(McError::InvalidParameter {
                field: "toa_range",
                message: format!("must be positive, got {}", self.toa_range),
            });
        }
        if self.toa_bins == 0 || self.aoa_bins == 0 {
            return Err(McError::InvalidParameter {
                field: "toa_bins",
                message: "histograms need at least one bin".into(),
            });
        }
        self.detector.validate()
    }
}

/// Uniform-bin arrival histogram carrying both counts and summed weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Bin edges, `bins + 1` ascending values.
    pub edges: Vec<f64>,
    /// Detection counts per bin.
    pub counts: Vec<u64>,
    /// Summed detected weight per bin.
    pub weights: Vec<f64>,
}

impl Histogram {
    fn new(low: f64, high: f64, bins: usize) -> Self {
        let width = (high - low) / bins as f64;
        Histogram {
            edges: (0..=bins).map(|i| low + width * i as f64).collect(),
            counts: vec![0; bins],
            weights: vec![0.0; bins],
        }
    }

    /// Values at or beyond the top edge land in the last bin, so the counts
    /// always total the received photons.
    fn record(&mut self, value: f64, weight: f64) {
        let bins = self.counts.len();
        let low = self.edges[0];
        let high = self.edges[bins];
        let idx = (((value - low) / (high - low) * bins as f64).floor() as usize).min(bins - 1);
        self.counts[idx] += 1;
        self.weights[idx] += weight;
    }

    fn merge(&mut self, other: &Histogram) {
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            *w += o;
        }
    }

    /// Renders `bin_low, bin_high, count, weight` CSV lines (no header).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.counts.len() {
            out.push_str(&format!(
                "{:.12e},{:.12e},{},{:.12e}\n",
                self.edges[i],
                self.edges[i + 1],
                self.counts[i],
                self.weights[i]
            ));
        }
        out
    }
}

/// Aggregate outcome of a transport batch.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    /// Photons launched.
    pub launched: u64,
    /// Photons detected (inside aperture, FOV, and gate).
    pub received: u64,
    /// Summed detected weight.
    pub received_weight: f64,
    /// Photons terminated by the interaction budget.
    pub truncated: u64,
    /// ToA histogram of the detected photons over `[0, toa_range]`.
    pub toa_histogram: Histogram,
    /// AoA histogram of the detected photons over `[0, π/2]`.
    pub aoa_histogram: Histogram,
    /// Received-fraction estimate γ = received weight / launched.
    pub gamma: f64,
    /// Binomial-style standard error of γ.
    pub gamma_std_error: f64,
}

struct ChunkOutcome {
    received: u64,
    received_weight: f64,
    truncated: u64,
    toa: Histogram,
    aoa: Histogram,
    records: Vec<DetectionRecord>,
}

fn run_chunk(
    config: &McConfig,
    seed: u64,
    chunk_index: u64,
    photons: u64,
    keep_records: bool,
) -> ChunkOutcome {
    let mut rng = RandomStream::new(seed, chunk_index);
    let mut out = ChunkOutcome {
        received: 0,
        received_weight: 0.0,
        truncated: 0,
        toa: Histogram::new(0.0, config.toa_range, config.toa_bins),
        aoa: Histogram::new(0.0, PI / 2.0, config.aoa_bins),
        records: Vec::new(),
    };
    for _ in 0..photons {
        let photon = launch_photon(config.launch_radius, config.launch_divergence, &mut rng);
        match trace(
            photon,
            &config.model,
            &config.detector,
            config.weight_threshold,
            config.max_interactions,
            &mut rng,
        ) {
            TraceEnd::Accepted { toa, aoa, weight } => {
                if keep_records {
                    out.records.push(DetectionRecord { toa, aoa, weight });
                }
                if toa < config.detector.gate_time {
                    out.received += 1;
                    out.received_weight += weight;
                    out.toa.record(toa, weight);
                    out.aoa.record(aoa, weight);
                }
            }
            TraceEnd::Rejected => {}
            TraceEnd::Died { truncated } => {
                if truncated {
                    out.truncated += 1;
                }
            }
        }
    }
    out
}

fn run_partitioned(
    n_photons: u64,
    config: &McConfig,
    seed: u64,
    keep_records: bool,
) -> Result<(McResult, Vec<DetectionRecord>), McError> {
    config.validate()?;
    let chunks = n_photons.div_ceil(CHUNK_SIZE);
    let partials: Vec<ChunkOutcome> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let photons = CHUNK_SIZE.min(n_photons - i * CHUNK_SIZE);
            run_chunk(config, seed, i, photons, keep_records)
        })
        .collect();

    // Sequential merge in chunk order keeps the floating-point sums
    // identical regardless of how many threads ran the chunks.
    let mut result = McResult {
        launched: n_photons,
        received: 0,
        received_weight: 0.0,
        truncated: 0,
        toa_histogram: Histogram::new(0.0, config.toa_range, config.toa_bins),
        aoa_histogram: Histogram::new(0.0, PI / 2.0, config.aoa_bins),
        gamma: 0.0,
        gamma_std_error: 0.0,
    };
    let mut records = Vec::new();
    for partial in &partials {
        result.received += partial.received;
        result.received_weight += partial.received_weight;
        result.truncated += partial.truncated;
        result.toa_histogram.merge(&partial.toa);
        result.aoa_histogram.merge(&partial.aoa);
        records.extend_from_slice(&partial.records);
    }
    if n_photons > 0 {
        result.gamma = result.received_weight / n_photons as f64;
        result.gamma_std_error =
            (result.gamma * (1.0 - result.gamma) / n_photons as f64).sqrt();
    }
    Ok((result, records))
}

/// Runs a transport batch and aggregates the detections.
///
/// Deterministic for a given `(seed, n_photons)`: photons are partitioned
/// into fixed-size chunks, each owning the random stream keyed by its index,
/// and partial results merge in chunk order.
pub fn run_simulation(n_photons: u64, config: &McConfig, seed: u64) -> Result<McResult, McError> {
    run_partitioned(n_photons, config, seed, false).map(|(result, _)| result)
}

/// Like [`run_simulation`], additionally returning the gate-free arrival
/// records (every crossing inside aperture and FOV, whatever its timing),
/// in deterministic chunk order.
pub fn run_simulation_records(
    n_photons: u64,
    config: &McConfig,
    seed: u64,
) -> Result<(McResult, Vec<DetectionRecord>), McError> {
    run_partitioned(n_photons, config, seed, true)
}

/// Simulation-based QBER estimate `n_N/(γ·n_S/2 + 2·n_N)`.
///
/// The received signal is halved by basis sifting; the noise appears once
/// in the numerator and twice in the denominator because either detector's
/// background can fire in the sifted slot.
pub fn mc_qber(gamma: f64, n_s: f64, n_n: f64) -> Result<f64, McError> {
    for (field, value) in [("gamma", gamma), ("n_s", n_s), ("n_n", n_n)] {
        if !value.is_finite() || value < 0.0 {
            return Err(McError::InvalidParameter {
                field,
                message: format!("must be non-negative, got {value}"),
            });
        }
    }
    if n_n == 0.0 {
        return Ok(0.0);
    }
    Ok(n_n / (gamma * n_s / 2.0 + 2.0 * n_n))
}

/// Gate-dependent noise budget for the QBER trade-off.
#[derive(Debug, Clone, PartialEq)]
pub struct GateNoise {
    /// Background arrival rate in counts/s; the per-pulse background is
    /// this rate times the gate window.
    pub background_rate: f64,
    /// Dark counts per pulse (set by the bit period, not the gate).
    pub dark_counts: f64,
    /// Mean signal photons per pulse n_S.
    pub signal_photons: f64,
}

impl GateNoise {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<(), McError> {
        for (field, value) in [
            ("background_rate", self.background_rate),
            ("dark_counts", self.dark_counts),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(McError::InvalidParameter {
                    field,
                    message: format!("must be non-negative, got {value}"),
                });
            }
        }
        if !self.signal_photons.is_finite() || self.signal_photons <= 0.0 {
            return Err(McError::InvalidParameter {
                field: "signal_photons",
                message: format!("must be positive, got {}", self.signal_photons),
            });
        }
        Ok(())
    }

    /// Per-detector noise `n_N = (rate·gate)/2 + n_D` at one gate window.
    fn per_detector(&self, gate: f64) -> f64 {
        self.background_rate * gate / 2.0 + self.dark_counts
    }
}

/// One evaluated point of the gate-time curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatePoint {
    /// Gate window in s.
    pub gate: f64,
    /// Received fraction within this gate.
    pub gamma: f64,
    /// QBER estimate at this gate.
    pub qber: f64,
}

/// Result of the gate-time search.
#[derive(Debug, Clone, PartialEq)]
pub struct GateScan {
    /// The QBER-minimizing point (first of equals in grid order).
    pub optimum: GatePoint,
    /// The full curve in the caller's grid order.
    pub curve: Vec<GatePoint>,
}

/// Finds the QBER-minimizing gate window over a candidate grid.
///
/// One transport run collects gate-free arrival records; every candidate
/// gate then re-filters the same records (sorted once, prefix-summed,
/// cut by binary search), so no re-simulation happens. Widening the gate
/// admits more late signal but proportionally more background, which is
/// the minimum being located.
pub fn optimize_gate_time(
    config: &McConfig,
    noise: &GateNoise,
    gate_grid: &[f64],
    n_photons: u64,
    seed: u64,
) -> Result<GateScan, McError> {
    noise.validate()?;
    if gate_grid.is_empty() {
        return Err(McError::EmptyGrid);
    }
    for &gate in gate_grid {
        if !gate.is_finite() || gate <= 0.0 {
            return Err(McError::InvalidParameter {
                field: "gate_grid",
                message: format!("gate windows must be positive, got {gate}"),
            });
        }
    }

    let (_, mut records) = run_simulation_records(n_photons, config, seed)?;
    records.sort_unstable_by(|a, b| a.toa.total_cmp(&b.toa));
    let mut cumulative = Vec::with_capacity(records.len() + 1);
    cumulative.push(0.0);
    for record in &records {
        cumulative.push(cumulative.last().unwrap() + record.weight);
    }

    let curve: Vec<GatePoint> = gate_grid
        .iter()
        .map(|&gate| {
            let within = records.partition_point(|r| r.toa < gate);
            let gamma = cumulative[within] / n_photons as f64;
            let qber = mc_qber(gamma, noise.signal_photons, noise.per_detector(gate))?;
            Ok(GatePoint { gate, gamma, qber })
        })
        .collect::<Result<_, McError>>()?;

    let optimum = *curve
        .iter()
        .reduce(|best, point| if point.qber < best.qber { point } else { best })
        .expect("grid checked non-empty");
    Ok(GateScan { optimum, curve })
}
