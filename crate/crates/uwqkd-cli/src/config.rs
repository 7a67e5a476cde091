//! Scenario files: a TOML schema, `--set` overrides, and the conversion
//! into validated core types.
//!
//! A scenario is a nested key-value file with sections `[channel]`,
//! `[geometry]`, `[receiver]`, `[environment]`, exactly one protocol
//! sub-table under `[protocol]`, and an optional `[sweep]` axis. Every key
//! has a default, so the empty file is a valid scenario. Angles are given
//! in degrees and wavelengths in nanometers; the conversion to the radians
//! and meters used by the core library happens here, in one place.
//!
//! Unknown keys are rejected rather than ignored, so a typo cannot
//! silently fall back to a default.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use uwqkd_core::bb84::Bb84Params;
use uwqkd_core::channel::{LinkGeometry, TurbulenceParams, WaterType};
use uwqkd_core::decoy::DecoyParams;
use uwqkd_core::montecarlo::ScatterModel;
use uwqkd_core::noise::{aperture_area_from_diameter, Environment, ReceiverParams};

use crate::error::CliError;

/// Refuses sweeps that would expand into absurdly many rows.
const MAX_SWEEP_POINTS: usize = 1_000_000;

/// Raw scenario file in config units (degrees, nanometers, seconds).
///
/// This struct is the canonical serialized form: it round-trips through
/// TOML, and its serialization is what the scenario hash digests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub channel: ChannelSection,
    pub geometry: GeometrySection,
    pub receiver: ReceiverSection,
    pub environment: EnvironmentSection,
    pub protocol: ProtocolSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile {
            channel: ChannelSection::default(),
            geometry: GeometrySection::default(),
            receiver: ReceiverSection::default(),
            environment: EnvironmentSection::default(),
            protocol: ProtocolSection::default(),
            sweep: None,
        }
    }
}

/// Water type and turbulence regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    /// One of `clear`, `coastal`, `turbid`, `custom`.
    pub water: String,
    /// One of `none`, `weak`, `moderate`, `strong`.
    pub turbulence: String,
    /// Eddy diffusivity ratio override (dimensionless).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_r: Option<f64>,
    /// Temperature dissipation rate override χ_T in K²/s.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_t: Option<f64>,
    /// Kinetic energy dissipation rate override ε in m²/s³.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Extinction coefficient ς in 1/m, required iff `water = "custom"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extinction: Option<f64>,
    /// Beam-spread correction exponent T, optional with `water = "custom"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction_t: Option<f64>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            water: "clear".into(),
            turbulence: "none".into(),
            d_r: None,
            chi_t: None,
            epsilon: None,
            extinction: None,
            correction_t: None,
        }
    }
}

/// Link geometry in meters and degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Link length in m (point commands) or detector plane distance (MC).
    pub distance: f64,
    /// Transmit aperture diameter d1 in m.
    pub tx_diameter: f64,
    /// Receive aperture diameter d2 in m.
    pub rx_diameter: f64,
    /// Full beam divergence θ in degrees.
    pub divergence: f64,
    /// Wavelength λ in nm.
    pub wavelength: f64,
    /// Number of intermediate relays K.
    pub relay_count: u32,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            distance: 100.0,
            tx_diameter: 0.10,
            rx_diameter: 0.10,
            divergence: 6.0,
            wavelength: 530.0,
            relay_count: 0,
        }
    }
}

/// Receiver electronics and optics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverSection {
    /// Field of view Ω in degrees.
    pub fov: f64,
    /// Optical filter bandwidth Δλ in nm.
    pub filter_width: f64,
    /// Bit period Δt in s.
    pub bit_period: f64,
    /// Gate window Δt′ in s.
    pub gate_time: f64,
    /// Dark count rate I_dc in Hz.
    pub dark_rate: f64,
    /// Detector quantum efficiency η.
    pub quantum_efficiency: f64,
    /// Receiving optics transmittance η_Bob.
    pub bob_transmittance: f64,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        ReceiverSection {
            fov: 180.0,
            filter_width: 30.0,
            bit_period: 35e-9,
            gate_time: 200e-12,
            dark_rate: 60.0,
            quantum_efficiency: 0.5,
            bob_transmittance: 0.045,
        }
    }
}

/// Ambient light at the operating depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    /// Surface downwelling irradiance R_d(λ, 0) in W/m².
    pub surface_irradiance: f64,
    /// Diffuse attenuation coefficient K∞ in 1/m.
    pub diffuse_attenuation: f64,
    /// Operating depth z_d in m.
    pub depth: f64,
    /// Free-text sky description, carried into reports.
    pub label: String,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        EnvironmentSection {
            surface_irradiance: 1e-3,
            diffuse_attenuation: 0.08,
            depth: 100.0,
            label: "clear night, full moon".into(),
        }
    }
}

/// Exactly one protocol sub-table; an empty `[protocol]` means plain BB84
/// with default parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bb84: Option<Bb84Section>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relay: Option<RelaySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoy: Option<DecoySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
}

/// Single-photon BB84 bound parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bb84Section {
    pub mean_photon_number: f64,
    pub ldpc_rate: f64,
    pub qber_threshold: f64,
    pub qber_security_limit: f64,
}

impl Default for Bb84Section {
    fn default() -> Self {
        let p = Bb84Params::default();
        Bb84Section {
            mean_photon_number: p.mean_photon_number,
            ldpc_rate: p.ldpc_rate,
            qber_threshold: p.qber_threshold,
            qber_security_limit: p.qber_security_limit,
        }
    }
}

impl Bb84Section {
    fn to_params(&self) -> Bb84Params {
        Bb84Params {
            mean_photon_number: self.mean_photon_number,
            ldpc_rate: self.ldpc_rate,
            qber_threshold: self.qber_threshold,
            qber_security_limit: self.qber_security_limit,
        }
    }
}

/// Relay-chain BB84: the same bound parameters plus the scan limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaySection {
    pub mean_photon_number: f64,
    pub ldpc_rate: f64,
    pub qber_threshold: f64,
    pub qber_security_limit: f64,
    /// Largest relay count considered by `relay-scan`.
    pub max_relays: u32,
}

impl Default for RelaySection {
    fn default() -> Self {
        let p = Bb84Params::default();
        RelaySection {
            mean_photon_number: p.mean_photon_number,
            ldpc_rate: p.ldpc_rate,
            qber_threshold: p.qber_threshold,
            qber_security_limit: p.qber_security_limit,
            max_relays: 10,
        }
    }
}

impl RelaySection {
    fn to_params(&self) -> Bb84Params {
        Bb84Params {
            mean_photon_number: self.mean_photon_number,
            ldpc_rate: self.ldpc_rate,
            qber_threshold: self.qber_threshold,
            qber_security_limit: self.qber_security_limit,
        }
    }
}

/// Two-decoy-state bound parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoySection {
    pub signal_intensity: f64,
    pub decoy_intensity: f64,
    pub detector_error: f64,
    pub noise_error: f64,
    pub sift_factor: f64,
    pub ec_efficiency: f64,
}

impl Default for DecoySection {
    fn default() -> Self {
        let p = DecoyParams::default();
        DecoySection {
            signal_intensity: p.signal_intensity,
            decoy_intensity: p.decoy_intensity,
            detector_error: p.detector_error,
            noise_error: p.noise_error,
            sift_factor: p.sift_factor,
            ec_efficiency: p.ec_efficiency,
        }
    }
}

impl DecoySection {
    fn to_params(&self) -> DecoyParams {
        DecoyParams {
            signal_intensity: self.signal_intensity,
            decoy_intensity: self.decoy_intensity,
            detector_error: self.detector_error,
            noise_error: self.noise_error,
            sift_factor: self.sift_factor,
            ec_efficiency: self.ec_efficiency,
        }
    }
}

/// Monte Carlo photon-transport parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    /// Photons to launch.
    pub photons: u64,
    /// Random stream seed; `--seed` overrides this.
    pub seed: u64,
    /// Absorption coefficient α in 1/m.
    pub absorption: f64,
    /// Scattering coefficient β in 1/m.
    pub scattering: f64,
    /// Backscatter fraction B of the phase function.
    pub backscatter_fraction: f64,
    /// Water refractive index n.
    pub refractive_index: f64,
    /// Source spot radius r0 in m.
    pub launch_radius: f64,
    /// Launch half-divergence θ0_max in degrees.
    pub launch_divergence: f64,
    /// Weight below which a packet is dropped as absorbed.
    pub weight_threshold: f64,
    /// Interaction budget per photon.
    pub max_interactions: u32,
    /// ToA histogram bins over one bit period.
    pub toa_bins: usize,
    /// AoA histogram bins over [0°, 90°].
    pub aoa_bins: usize,
    /// Mean signal photons per pulse for the gate QBER model.
    pub signal_photons: f64,
    /// Which histogram `mc-run` emits: `toa` or `aoa`.
    pub histogram: String,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            photons: 1_000_000,
            seed: 1,
            absorption: 0.114,
            scattering: 0.037,
            backscatter_fraction: 0.013085,
            refractive_index: 1.33,
            launch_radius: 3e-3,
            launch_divergence: 20.0,
            weight_threshold: 1e-4,
            max_interactions: 10_000,
            toa_bins: 200,
            aoa_bins: 200,
            signal_photons: 1.0,
            histogram: "toa".into(),
        }
    }
}

/// Sweep axis: `start`, `start + step`, ... up to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// One of `distance` (m), `gate` (s), `rho` (m).
    pub variable: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// What the sweep axis ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Link distance in m.
    Distance,
    /// Receiver gate window in s.
    Gate,
    /// Transverse separation ρ in m.
    Rho,
}

impl SweepVariable {
    /// The axis name as written in config files and column headers.
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::Distance => "distance",
            SweepVariable::Gate => "gate",
            SweepVariable::Rho => "rho",
        }
    }

    /// The axis unit for column headers.
    pub fn unit(&self) -> &'static str {
        match self {
            SweepVariable::Distance | SweepVariable::Rho => "m",
            SweepVariable::Gate => "s",
        }
    }
}

/// Validated sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    /// The inclusive grid, identical on every run: `start + i·step` while
    /// the value stays within `stop` plus a half-step tolerance for
    /// endpoint roundoff.
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 0.5).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Which protocol the scenario drives, with core-typed parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    Bb84(Bb84Params),
    Relay {
        params: Bb84Params,
        max_relays: u32,
    },
    Decoy(DecoyParams),
    Mc(McProtocol),
}

impl Protocol {
    /// The protocol name used in error messages.
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Bb84(_) => "bb84",
            Protocol::Relay { .. } => "relay",
            Protocol::Decoy(_) => "decoy",
            Protocol::Mc(_) => "mc",
        }
    }
}

/// Monte Carlo protocol in core units (radians, meters).
#[derive(Debug, Clone, PartialEq)]
pub struct McProtocol {
    pub photons: u64,
    pub seed: u64,
    pub model: ScatterModel,
    pub refractive_index: f64,
    pub launch_radius: f64,
    /// Launch half-divergence in rad.
    pub launch_divergence: f64,
    pub weight_threshold: f64,
    pub max_interactions: u32,
    pub toa_bins: usize,
    pub aoa_bins: usize,
    pub signal_photons: f64,
    pub histogram: HistogramAxis,
}

/// Which detection histogram `mc-run` exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistogramAxis {
    Toa,
    Aoa,
}

/// A fully validated scenario: the canonical file plus the core types
/// built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Canonical raw form, kept for hashing and round-trip emission.
    pub file: ScenarioFile,
    pub water: WaterType,
    pub geometry: LinkGeometry,
    pub receiver: ReceiverParams,
    pub environment: Environment,
    pub turbulence: Option<TurbulenceParams>,
    pub protocol: Protocol,
    pub sweep: Option<Sweep>,
}

/// Reads and validates a scenario file, applying `--set` overrides.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, overrides)
}

/// Same as [`parse_config`] on in-memory text.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<Scenario, CliError> {
    let mut raw: toml::Value = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    for spec in overrides {
        apply_override(&mut raw, spec)?;
    }
    let file = ScenarioFile::deserialize(raw).map_err(|e| CliError::Config(e.to_string()))?;
    Scenario::build(file)
}

/// Applies one `--set section.key=value` override to the parsed tree.
///
/// The value text is parsed as a TOML literal; if that fails it is taken
/// as a bare string, so `--set environment.label=daytime` works without
/// inner quotes.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), CliError> {
    let (path, rawval) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set '{spec}': expected section.key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(|seg| seg.is_empty()) {
        return Err(CliError::Config(format!(
            "--set '{spec}': empty key segment"
        )));
    }
    let value = parse_scalar(rawval.trim());

    let segments: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("--set '{path}': '{seg}' is not inside a table"))
        })?;
        node = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let last = segments[segments.len() - 1];
    let table = node
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("--set '{path}': parent is not a table")))?;
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_scalar(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|t| t.get("v").cloned())
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn bad_key(key: &str, constraint: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {constraint}"))
}

fn require_positive(key: &str, value: f64) -> Result<(), CliError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(bad_key(key, format!("must be positive, got {value}")))
    }
}

const DEG: f64 = PI / 180.0;
const NM: f64 = 1e-9;

impl Scenario {
    /// Converts the raw file into core types, checking every constraint
    /// against the config key that carries it.
    pub fn build(file: ScenarioFile) -> Result<Scenario, CliError> {
        let g = &file.geometry;
        require_positive("geometry.distance", g.distance)?;
        require_positive("geometry.tx_diameter", g.tx_diameter)?;
        require_positive("geometry.rx_diameter", g.rx_diameter)?;
        require_positive("geometry.wavelength", g.wavelength)?;
        if !(g.divergence > 0.0 && g.divergence < 180.0) {
            return Err(bad_key(
                "geometry.divergence",
                format!("must lie in (0, 180) degrees, got {}", g.divergence),
            ));
        }

        let water = build_water(&file.channel, g)?;
        let turbulence = build_turbulence(&file.channel)?;
        let geometry = LinkGeometry::new(
            g.distance,
            g.tx_diameter,
            g.rx_diameter,
            g.divergence * DEG,
            g.wavelength * NM,
            g.relay_count,
        )?;

        let r = &file.receiver;
        if !(r.fov > 0.0 && r.fov <= 180.0) {
            return Err(bad_key(
                "receiver.fov",
                format!("must lie in (0, 180] degrees, got {}", r.fov),
            ));
        }
        require_positive("receiver.filter_width", r.filter_width)?;
        require_positive("receiver.bit_period", r.bit_period)?;
        require_positive("receiver.gate_time", r.gate_time)?;
        if !(r.dark_rate.is_finite() && r.dark_rate >= 0.0) {
            return Err(bad_key(
                "receiver.dark_rate",
                format!("must be non-negative, got {}", r.dark_rate),
            ));
        }
        require_positive("receiver.quantum_efficiency", r.quantum_efficiency)?;
        require_positive("receiver.bob_transmittance", r.bob_transmittance)?;
        let receiver = ReceiverParams {
            fov: r.fov * DEG,
            filter_width: r.filter_width * NM,
            bit_period: r.bit_period,
            gate_time: r.gate_time,
            dark_rate: r.dark_rate,
            quantum_efficiency: r.quantum_efficiency,
            bob_transmittance: r.bob_transmittance,
            aperture_area: aperture_area_from_diameter(g.rx_diameter),
        };
        receiver.validate()?;

        let e = &file.environment;
        let environment = Environment {
            surface_irradiance: e.surface_irradiance,
            diffuse_attenuation: e.diffuse_attenuation,
            depth: e.depth,
            label: e.label.clone(),
        };
        environment.validate()?;

        let protocol = build_protocol(&file.protocol)?;
        let sweep = file.sweep.as_ref().map(build_sweep).transpose()?;

        Ok(Scenario {
            file,
            water,
            geometry,
            receiver,
            environment,
            turbulence,
            protocol,
            sweep,
        })
    }

    /// The canonical serialized form: every section written out with its
    /// effective values, suitable for diffing and re-parsing.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(&self.file).expect("scenario serialization cannot fail")
    }

    /// FNV-1a digest of the canonical form, recorded in result metadata so
    /// outputs can be traced back to their exact inputs.
    pub fn hash(&self) -> String {
        format!("fnv1a64:{:016x}", fnv1a64(self.canonical_toml().as_bytes()))
    }
}

fn build_water(c: &ChannelSection, g: &GeometrySection) -> Result<WaterType, CliError> {
    let divergence = g.divergence * DEG;
    let named = |field: Option<f64>, key: &str| -> Result<(), CliError> {
        if field.is_some() {
            Err(bad_key(key, "only applies to water = \"custom\""))
        } else {
            Ok(())
        }
    };
    match c.water.as_str() {
        "clear" => {
            named(c.extinction, "channel.extinction")?;
            named(c.correction_t, "channel.correction_t")?;
            Ok(WaterType::clear_ocean(divergence, g.rx_diameter)?)
        }
        "coastal" => {
            named(c.extinction, "channel.extinction")?;
            named(c.correction_t, "channel.correction_t")?;
            Ok(WaterType::coastal(divergence, g.rx_diameter)?)
        }
        "turbid" => {
            named(c.extinction, "channel.extinction")?;
            named(c.correction_t, "channel.correction_t")?;
            Ok(WaterType::turbid_harbor(divergence, g.rx_diameter)?)
        }
        "custom" => {
            let extinction = c.extinction.ok_or_else(|| {
                bad_key("channel.extinction", "required when water = \"custom\"")
            })?;
            require_positive("channel.extinction", extinction)?;
            let correction_t = match c.correction_t {
                Some(t) => {
                    require_positive("channel.correction_t", t)?;
                    t
                }
                None => uwqkd_core::channel::correction_coefficient(divergence, g.rx_diameter)?,
            };
            Ok(WaterType::custom(extinction, correction_t)?)
        }
        other => Err(bad_key(
            "channel.water",
            format!("expected clear, coastal, turbid, or custom, got \"{other}\""),
        )),
    }
}

fn build_turbulence(c: &ChannelSection) -> Result<Option<TurbulenceParams>, CliError> {
    let mut params = match c.turbulence.as_str() {
        "none" => {
            for (value, key) in [
                (c.d_r, "channel.d_r"),
                (c.chi_t, "channel.chi_t"),
                (c.epsilon, "channel.epsilon"),
            ] {
                if value.is_some() {
                    return Err(bad_key(key, "requires a turbulence regime, but turbulence = \"none\""));
                }
            }
            return Ok(None);
        }
        "weak" => TurbulenceParams::weak(),
        "moderate" => TurbulenceParams::moderate(),
        "strong" => TurbulenceParams::strong(),
        other => {
            return Err(bad_key(
                "channel.turbulence",
                format!("expected none, weak, moderate, or strong, got \"{other}\""),
            ))
        }
    };
    if let Some(d_r) = c.d_r {
        if !(d_r.is_finite() && d_r >= 0.0) {
            return Err(bad_key(
                "channel.d_r",
                format!("must be non-negative, got {d_r}"),
            ));
        }
        params = params.with_d_r(d_r);
    }
    if let Some(chi_t) = c.chi_t {
        require_positive("channel.chi_t", chi_t)?;
        params.chi_t = chi_t;
    }
    if let Some(epsilon) = c.epsilon {
        require_positive("channel.epsilon", epsilon)?;
        params.epsilon = epsilon;
    }
    params.validate()?;
    Ok(Some(params))
}

fn build_protocol(p: &ProtocolSection) -> Result<Protocol, CliError> {
    let chosen = [
        p.bb84.is_some(),
        p.relay.is_some(),
        p.decoy.is_some(),
        p.mc.is_some(),
    ]
    .iter()
    .filter(|&&s| s)
    .count();
    if chosen > 1 {
        return Err(bad_key(
            "protocol",
            "must contain exactly one of bb84, relay, decoy, or mc",
        ));
    }

    if let Some(relay) = &p.relay {
        let params = relay.to_params();
        params.validate()?;
        return Ok(Protocol::Relay {
            params,
            max_relays: relay.max_relays,
        });
    }
    if let Some(decoy) = &p.decoy {
        let params = decoy.to_params();
        params.validate()?;
        return Ok(Protocol::Decoy(params));
    }
    if let Some(mc) = &p.mc {
        return Ok(Protocol::Mc(build_mc(mc)?));
    }
    let params = p.bb84.clone().unwrap_or_default().to_params();
    params.validate()?;
    Ok(Protocol::Bb84(params))
}

fn build_mc(mc: &McSection) -> Result<McProtocol, CliError> {
    if mc.photons == 0 {
        return Err(bad_key("protocol.mc.photons", "must be at least 1"));
    }
    if !(0.0..=90.0).contains(&mc.launch_divergence) {
        return Err(bad_key(
            "protocol.mc.launch_divergence",
            format!("must lie in [0, 90] degrees, got {}", mc.launch_divergence),
        ));
    }
    if !(mc.refractive_index.is_finite() && mc.refractive_index >= 1.0) {
        return Err(bad_key(
            "protocol.mc.refractive_index",
            format!("must be at least 1, got {}", mc.refractive_index),
        ));
    }
    require_positive("protocol.mc.signal_photons", mc.signal_photons)?;
    let histogram = match mc.histogram.as_str() {
        "toa" => HistogramAxis::Toa,
        "aoa" => HistogramAxis::Aoa,
        other => {
            return Err(bad_key(
                "protocol.mc.histogram",
                format!("expected toa or aoa, got \"{other}\""),
            ))
        }
    };
    let model = ScatterModel::new(mc.absorption, mc.scattering, mc.backscatter_fraction)?;
    Ok(McProtocol {
        photons: mc.photons,
        seed: mc.seed,
        model,
        refractive_index: mc.refractive_index,
        launch_radius: mc.launch_radius,
        launch_divergence: mc.launch_divergence * DEG,
        weight_threshold: mc.weight_threshold,
        max_interactions: mc.max_interactions,
        toa_bins: mc.toa_bins,
        aoa_bins: mc.aoa_bins,
        signal_photons: mc.signal_photons,
        histogram,
    })
}

fn build_sweep(s: &SweepSection) -> Result<Sweep, CliError> {
    let variable = match s.variable.as_str() {
        "distance" => SweepVariable::Distance,
        "gate" => SweepVariable::Gate,
        "rho" => SweepVariable::Rho,
        other => {
            return Err(bad_key(
                "sweep.variable",
                format!("expected distance, gate, or rho, got \"{other}\""),
            ))
        }
    };
    if !s.start.is_finite() || !s.stop.is_finite() {
        return Err(bad_key("sweep.start", "start and stop must be finite"));
    }
    require_positive("sweep.step", s.step)?;
    match variable {
        SweepVariable::Distance | SweepVariable::Gate => {
            require_positive("sweep.start", s.start)?;
        }
        SweepVariable::Rho => {
            if s.start < 0.0 {
                return Err(bad_key(
                    "sweep.start",
                    format!("must be non-negative for a rho sweep, got {}", s.start),
                ));
            }
        }
    }
    if s.stop < s.start {
        return Err(bad_key(
            "sweep.stop",
            format!("must be at least start, got [{}, {}]", s.start, s.stop),
        ));
    }
    let sweep = Sweep {
        variable,
        start: s.start,
        stop: s.stop,
        step: s.step,
    };
    let points = ((s.stop - s.start) / s.step + 0.5).floor() as usize + 1;
    if points > MAX_SWEEP_POINTS {
        return Err(bad_key(
            "sweep.step",
            format!("grid would have {points} points, limit is {MAX_SWEEP_POINTS}"),
        ));
    }
    Ok(sweep)
}

/// 64-bit FNV-1a over a byte string.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
