//! The eight subcommands, each mapping a validated [`Scenario`] to one
//! [`ResultTable`].
//!
//! Sweep subcommands fan grid points out across the rayon pool and collect
//! them back in grid order, so the emitted rows are sorted by the sweep
//! axis no matter how many workers ran. Monte Carlo subcommands take their
//! seed from the scenario unless the caller overrides it; the effective
//! seed is recorded in the table metadata.

use rayon::prelude::*;

use uwqkd_core::bb84::{achievable_distance, direct_link_report, DistanceCriterion, LinkScenario};
use uwqkd_core::channel::{wave_structure_closed, wave_structure_numeric};
use uwqkd_core::decoy::{
    decoy_achievable_distance, decoy_link_report, ideal_bb84_achievable_distance,
    ideal_bb84_link_rate, DecoyScenario,
};
use uwqkd_core::montecarlo::{
    optimize_gate_time, run_simulation, DetectorSpec, GateNoise, Histogram, McConfig, CHUNK_SIZE,
};
use uwqkd_core::noise::{background_photons_per_polarization, dark_counts};
use uwqkd_core::numerics::QuadratureSpec;
use uwqkd_core::relay::{relay_achievable_distance, relay_link_report};

use crate::config::{HistogramAxis, McProtocol, Protocol, Scenario, Sweep, SweepVariable};
use crate::error::CliError;
use crate::table::{col, Column, Metadata, ResultTable};

/// Default search range for `distance` when no `[sweep]` section narrows it.
const DEFAULT_SEARCH: (f64, f64) = (1.0, 1000.0);

/// The subcommand being run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    QberSweep,
    SkrSweep,
    DecoyRate,
    Distance,
    RelayScan,
    McRun,
    GateOpt,
    ValidateWsf,
}

impl Subcommand {
    /// The kebab-case name as typed on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::QberSweep => "qber-sweep",
            Subcommand::SkrSweep => "skr-sweep",
            Subcommand::DecoyRate => "decoy-rate",
            Subcommand::Distance => "distance",
            Subcommand::RelayScan => "relay-scan",
            Subcommand::McRun => "mc-run",
            Subcommand::GateOpt => "gate-opt",
            Subcommand::ValidateWsf => "validate-wsf",
        }
    }
}

/// Runs one subcommand against a scenario.
///
/// `seed_override` replaces the scenario's Monte Carlo seed when given;
/// it is ignored by the deterministic subcommands.
pub fn run_subcommand(
    cmd: Subcommand,
    scenario: &Scenario,
    seed_override: Option<u64>,
) -> Result<ResultTable, CliError> {
    match cmd {
        Subcommand::QberSweep => link_sweep(cmd, scenario, Lead::Qber),
        Subcommand::SkrSweep => link_sweep(cmd, scenario, Lead::Skr),
        Subcommand::DecoyRate => decoy_rate(cmd, scenario),
        Subcommand::Distance => distance(cmd, scenario),
        Subcommand::RelayScan => relay_scan(cmd, scenario),
        Subcommand::McRun => mc_run(cmd, scenario, seed_override),
        Subcommand::GateOpt => gate_opt(cmd, scenario, seed_override),
        Subcommand::ValidateWsf => validate_wsf(cmd, scenario),
    }
}

fn metadata(cmd: Subcommand, scenario: &Scenario, seed: Option<u64>) -> Metadata {
    Metadata::new(cmd.name(), scenario.hash(), seed)
}

fn wrong_protocol(cmd: Subcommand, scenario: &Scenario, expected: &str) -> CliError {
    CliError::Config(format!(
        "{}: requires {expected}, but the scenario configures protocol.{}",
        cmd.name(),
        scenario.protocol.name()
    ))
}

fn sweep_for(
    cmd: Subcommand,
    scenario: &Scenario,
    variable: SweepVariable,
) -> Result<Sweep, CliError> {
    match &scenario.sweep {
        Some(s) if s.variable == variable => Ok(*s),
        Some(s) => Err(CliError::Config(format!(
            "{}: [sweep] variable must be \"{}\", got \"{}\"",
            cmd.name(),
            variable.name(),
            s.variable.name()
        ))),
        None => Err(CliError::Config(format!(
            "{}: requires a [sweep] section with variable = \"{}\"",
            cmd.name(),
            variable.name()
        ))),
    }
}

fn link_scenario(scenario: &Scenario, params: uwqkd_core::bb84::Bb84Params) -> LinkScenario {
    LinkScenario {
        environment: scenario.environment.clone(),
        receiver: scenario.receiver,
        water: scenario.water,
        geometry: scenario.geometry,
        turbulence: scenario.turbulence,
        params,
    }
}

fn decoy_scenario(scenario: &Scenario, params: uwqkd_core::decoy::DecoyParams) -> DecoyScenario {
    DecoyScenario {
        environment: scenario.environment.clone(),
        receiver: scenario.receiver,
        water: scenario.water,
        geometry: scenario.geometry,
        turbulence: scenario.turbulence,
        params,
    }
}

/// Which bound leads the sweep columns.
enum Lead {
    Qber,
    Skr,
}

/// `qber-sweep` and `skr-sweep`: QBER and SKR bounds over a distance grid.
fn link_sweep(cmd: Subcommand, scenario: &Scenario, lead: Lead) -> Result<ResultTable, CliError> {
    let sweep = sweep_for(cmd, scenario, SweepVariable::Distance)?;
    let grid = sweep.grid();
    let quad = QuadratureSpec::default();

    let (mut schema, mut rows): (Vec<Column>, Vec<Vec<f64>>) = match &scenario.protocol {
        Protocol::Bb84(params) => {
            let ls = link_scenario(scenario, *params);
            let rows = grid
                .par_iter()
                .map(|&d| {
                    let r = direct_link_report(&ls, d, &quad)?;
                    Ok(vec![
                        d,
                        r.qber_upper,
                        r.skr_lower,
                        r.mu,
                        r.mu0,
                        r.path_loss,
                        r.noise,
                    ])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let schema = vec![
                col("distance", "m"),
                col("qber", "-"),
                col("skr", "bit/sifted"),
                col("mu", "-"),
                col("mu0", "-"),
                col("path_loss", "-"),
                col("noise", "-"),
            ];
            (schema, rows)
        }
        Protocol::Relay { params, .. } => {
            let ls = link_scenario(scenario, *params);
            let rows = grid
                .par_iter()
                .map(|&d| {
                    let r = relay_link_report(&ls, d, &quad)?;
                    Ok(vec![
                        d,
                        r.qber_upper,
                        r.skr_lower,
                        r.noise_upper,
                        f64::from(ls.geometry.relay_count),
                    ])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let schema = vec![
                col("distance", "m"),
                col("qber", "-"),
                col("skr", "bit/sifted"),
                col("noise", "-"),
                col("relays", "-"),
            ];
            (schema, rows)
        }
        _ => return Err(wrong_protocol(cmd, scenario, "protocol.bb84 or protocol.relay")),
    };

    if let Lead::Skr = lead {
        schema.swap(1, 2);
        for row in &mut rows {
            row.swap(1, 2);
        }
    }

    let mut table = ResultTable::new(schema, metadata(cmd, scenario, None));
    for row in rows {
        table.push_row(row);
    }
    Ok(table)
}

/// `decoy-rate`: the full decoy bound chain over a distance grid, with the
/// perfect-knowledge BB84 benchmark alongside.
fn decoy_rate(cmd: Subcommand, scenario: &Scenario) -> Result<ResultTable, CliError> {
    let Protocol::Decoy(params) = &scenario.protocol else {
        return Err(wrong_protocol(cmd, scenario, "protocol.decoy"));
    };
    let sweep = sweep_for(cmd, scenario, SweepVariable::Distance)?;
    let quad = QuadratureSpec::default();
    let ds = decoy_scenario(scenario, params.clone());

    let rows = sweep
        .grid()
        .par_iter()
        .map(|&d| {
            let r = decoy_link_report(&ds, d, &quad)?;
            let ideal = ideal_bb84_link_rate(&ds, d, &quad)?;
            Ok(vec![
                d,
                r.rate_lower,
                r.qber_mu_upper,
                r.gain_mu_upper,
                r.y1_lower,
                r.q1_lower,
                r.e1_upper,
                r.alpha,
                r.path_loss,
                r.y0,
                ideal.rate_lower,
                f64::from(u8::from(r.flags.yield_collapsed)),
                f64::from(u8::from(r.flags.error_saturated)),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let schema = vec![
        col("distance", "m"),
        col("rate", "bit/pulse"),
        col("qber_signal", "-"),
        col("gain_signal", "-"),
        col("yield_single", "-"),
        col("gain_single", "-"),
        col("error_single", "-"),
        col("alpha", "-"),
        col("path_loss", "-"),
        col("y0", "-"),
        col("ideal_rate", "bit/pulse"),
        col("yield_collapsed", "-"),
        col("error_saturated", "-"),
    ];
    let mut table = ResultTable::new(schema, metadata(cmd, scenario, None));
    for row in rows {
        table.push_row(row);
    }
    Ok(table)
}

/// The bisection bracket: a distance sweep narrows it, otherwise the wide
/// default is used.
fn search_range(cmd: Subcommand, scenario: &Scenario) -> Result<(f64, f64), CliError> {
    match &scenario.sweep {
        None => Ok(DEFAULT_SEARCH),
        Some(s) if s.variable == SweepVariable::Distance => {
            if s.start < s.stop {
                Ok((s.start, s.stop))
            } else {
                Err(CliError::Config(format!(
                    "{}: the search range needs sweep.start < sweep.stop, got [{}, {}]",
                    cmd.name(),
                    s.start,
                    s.stop
                )))
            }
        }
        Some(s) => Err(CliError::Config(format!(
            "{}: [sweep] variable must be \"distance\", got \"{}\"",
            cmd.name(),
            s.variable.name()
        ))),
    }
}

/// `distance`: achievable-distance solves for the configured protocol.
fn distance(cmd: Subcommand, scenario: &Scenario) -> Result<ResultTable, CliError> {
    let (lo, hi) = search_range(cmd, scenario)?;
    let quad = QuadratureSpec::default();

    let (schema, row) = match &scenario.protocol {
        Protocol::Bb84(params) => {
            let ls = link_scenario(scenario, *params);
            let limit = params.qber_security_limit;
            let d_qber =
                achievable_distance(&ls, DistanceCriterion::QberAtMost(limit), lo, hi, &quad)?;
            let d_skr = achievable_distance(&ls, DistanceCriterion::PositiveSkr, lo, hi, &quad)?;
            (
                vec![
                    col("qber_limit", "-"),
                    col("qber_distance", "m"),
                    col("skr_distance", "m"),
                ],
                vec![limit, d_qber, d_skr],
            )
        }
        Protocol::Relay { params, .. } => {
            let ls = link_scenario(scenario, *params);
            let limit = params.qber_security_limit;
            let d_qber = relay_achievable_distance(
                &ls,
                DistanceCriterion::QberAtMost(limit),
                lo,
                hi,
                &quad,
            )?;
            let d_skr =
                relay_achievable_distance(&ls, DistanceCriterion::PositiveSkr, lo, hi, &quad)?;
            (
                vec![
                    col("relays", "-"),
                    col("qber_limit", "-"),
                    col("qber_distance", "m"),
                    col("skr_distance", "m"),
                ],
                vec![
                    f64::from(scenario.geometry.relay_count),
                    limit,
                    d_qber,
                    d_skr,
                ],
            )
        }
        Protocol::Decoy(params) => {
            let ds = decoy_scenario(scenario, params.clone());
            let d_decoy = decoy_achievable_distance(&ds, lo, hi, &quad)?;
            let d_ideal = ideal_bb84_achievable_distance(&ds, lo, hi, &quad)?;
            (
                vec![col("decoy_distance", "m"), col("ideal_distance", "m")],
                vec![d_decoy, d_ideal],
            )
        }
        Protocol::Mc(_) => {
            return Err(wrong_protocol(
                cmd,
                scenario,
                "protocol.bb84, protocol.relay, or protocol.decoy",
            ))
        }
    };

    let mut table = ResultTable::new(schema, metadata(cmd, scenario, None));
    table.push_row(row);
    Ok(table)
}

/// `relay-scan`: the full K x distance grid, with the grid-optimal relay
/// count marked.
///
/// The `optimal` column is derived from the emitted grid itself: for each
/// K the largest grid distance whose QBER bound stays within the security
/// limit, then the K maximizing that distance (ties toward fewer relays).
fn relay_scan(cmd: Subcommand, scenario: &Scenario) -> Result<ResultTable, CliError> {
    let Protocol::Relay { params, max_relays } = &scenario.protocol else {
        return Err(wrong_protocol(cmd, scenario, "protocol.relay"));
    };
    let sweep = sweep_for(cmd, scenario, SweepVariable::Distance)?;
    let grid = sweep.grid();
    let quad = QuadratureSpec::default();
    let limit = params.qber_security_limit;

    let mut rows: Vec<[f64; 4]> = Vec::with_capacity(grid.len() * (*max_relays as usize + 1));
    for k in 0..=*max_relays {
        let mut ls = link_scenario(scenario, *params);
        ls.geometry.relay_count = k;
        let block = grid
            .par_iter()
            .map(|&d| {
                let r = relay_link_report(&ls, d, &quad)?;
                Ok([f64::from(k), d, r.qber_upper, r.skr_lower])
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        rows.extend(block);
    }

    let mut best: Option<(f64, f64)> = None;
    for row in &rows {
        if row[2] <= limit && best.map_or(true, |(_, d)| row[1] > d) {
            best = Some((row[0], row[1]));
        }
    }

    let schema = vec![
        col("relays", "-"),
        col("distance", "m"),
        col("qber", "-"),
        col("skr", "bit/sifted"),
        col("optimal", "-"),
    ];
    let mut meta = metadata(cmd, scenario, None);
    if let Some((k, d)) = best {
        meta = meta.with("optimal_relays", k).with("optimal_distance", d);
    }
    let mut table = ResultTable::new(schema, meta);
    for row in rows {
        let flag = match best {
            Some((k, _)) if row[0] == k => 1.0,
            _ => 0.0,
        };
        table.push_row(vec![row[0], row[1], row[2], row[3], flag]);
    }
    Ok(table)
}

fn mc_config(scenario: &Scenario, mc: &McProtocol) -> McConfig {
    McConfig {
        launch_radius: mc.launch_radius,
        launch_divergence: mc.launch_divergence,
        model: mc.model.clone(),
        detector: DetectorSpec {
            aperture_radius: scenario.file.geometry.rx_diameter / 2.0,
            fov: scenario.receiver.fov,
            gate_time: scenario.receiver.bit_period,
            plane_z: scenario.file.geometry.distance,
            refractive_index: mc.refractive_index,
        },
        weight_threshold: mc.weight_threshold,
        max_interactions: mc.max_interactions,
        toa_range: scenario.receiver.bit_period,
        toa_bins: mc.toa_bins,
        aoa_bins: mc.aoa_bins,
    }
}

fn histogram_rows(table: &mut ResultTable, hist: &Histogram) {
    for i in 0..hist.counts.len() {
        table.push_row(vec![
            hist.edges[i],
            hist.edges[i + 1],
            hist.counts[i] as f64,
            hist.weights[i],
        ]);
    }
}

/// `mc-run`: one photon-transport batch, emitting the selected histogram.
///
/// The detector accepts everything inside one bit period, so the ToA
/// histogram covers the full arrival spread; gating studies belong to
/// `gate-opt`.
fn mc_run(
    cmd: Subcommand,
    scenario: &Scenario,
    seed_override: Option<u64>,
) -> Result<ResultTable, CliError> {
    let Protocol::Mc(mc) = &scenario.protocol else {
        return Err(wrong_protocol(cmd, scenario, "protocol.mc"));
    };
    let seed = seed_override.unwrap_or(mc.seed);
    let config = mc_config(scenario, mc);
    config.validate()?;
    let result = run_simulation(mc.photons, &config, seed)?;

    let (hist, unit) = match mc.histogram {
        HistogramAxis::Toa => (&result.toa_histogram, "s"),
        HistogramAxis::Aoa => (&result.aoa_histogram, "rad"),
    };
    let schema = vec![
        col("bin_low", unit),
        col("bin_high", unit),
        col("count", "-"),
        col("weight", "-"),
    ];
    let meta = metadata(cmd, scenario, Some(seed))
        .with("photons", mc.photons as f64)
        .with("chunk_photons", CHUNK_SIZE as f64)
        .with("received", result.received as f64)
        .with("received_weight", result.received_weight)
        .with("truncated", result.truncated as f64)
        .with("gamma", result.gamma)
        .with("gamma_std_error", result.gamma_std_error);
    let mut table = ResultTable::new(schema, meta);
    histogram_rows(&mut table, hist);
    Ok(table)
}

/// `gate-opt`: the QBER-vs-gate curve over the configured grid, with the
/// minimizing gate marked.
///
/// The background rate is the scenario's ambient count rate through the
/// configured field of view and filter; dark counts use the full bit
/// period, since the dark current is not gated away in the model.
fn gate_opt(
    cmd: Subcommand,
    scenario: &Scenario,
    seed_override: Option<u64>,
) -> Result<ResultTable, CliError> {
    let Protocol::Mc(mc) = &scenario.protocol else {
        return Err(wrong_protocol(cmd, scenario, "protocol.mc"));
    };
    let sweep = sweep_for(cmd, scenario, SweepVariable::Gate)?;
    let seed = seed_override.unwrap_or(mc.seed);
    let config = mc_config(scenario, mc);
    config.validate()?;

    let background_rate = background_photons_per_polarization(
        &scenario.environment,
        &scenario.receiver,
        scenario.geometry.wavelength,
    ) / scenario.receiver.gate_time;
    let noise = GateNoise {
        background_rate,
        dark_counts: dark_counts(&scenario.receiver),
        signal_photons: mc.signal_photons,
    };

    let grid = sweep.grid();
    let scan = optimize_gate_time(&config, &noise, &grid, mc.photons, seed)?;

    let schema = vec![
        col("gate", "s"),
        col("gamma", "-"),
        col("qber", "-"),
        col("optimal", "-"),
    ];
    let meta = metadata(cmd, scenario, Some(seed))
        .with("photons", mc.photons as f64)
        .with("chunk_photons", CHUNK_SIZE as f64)
        .with("background_rate", noise.background_rate)
        .with("dark_counts", noise.dark_counts)
        .with("optimum_gate", scan.optimum.gate)
        .with("optimum_gamma", scan.optimum.gamma)
        .with("optimum_qber", scan.optimum.qber);
    let mut table = ResultTable::new(schema, meta);
    let mut marked = false;
    for p in &scan.curve {
        let flag = !marked && p.gate == scan.optimum.gate;
        marked |= flag;
        table.push_row(vec![p.gate, p.gamma, p.qber, f64::from(u8::from(flag))]);
    }
    Ok(table)
}

/// `validate-wsf`: closed-form versus numeric wave structure function over
/// a separation grid, at the scenario's distance and turbulence.
fn validate_wsf(cmd: Subcommand, scenario: &Scenario) -> Result<ResultTable, CliError> {
    let sweep = sweep_for(cmd, scenario, SweepVariable::Rho)?;
    let Some(t) = scenario.turbulence else {
        return Err(CliError::Config(format!(
            "{}: requires channel.turbulence other than \"none\"",
            cmd.name()
        )));
    };
    let distance = scenario.file.geometry.distance;
    let wavelength = scenario.geometry.wavelength;
    let quad = QuadratureSpec::default();

    let rows = sweep
        .grid()
        .par_iter()
        .map(|&rho| {
            let closed = wave_structure_closed(rho, distance, &t, wavelength)?;
            let numeric = wave_structure_numeric(rho, distance, &t, wavelength, &quad)?;
            let rel_error = if numeric == 0.0 && closed == 0.0 {
                0.0
            } else {
                (closed - numeric).abs() / numeric.abs().max(f64::MIN_POSITIVE)
            };
            Ok(vec![rho, numeric, closed, rel_error])
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let schema = vec![
        col("rho", "m"),
        col("wsf_numeric", "-"),
        col("wsf_closed", "-"),
        col("rel_error", "-"),
    ];
    let mut table = ResultTable::new(schema, metadata(cmd, scenario, None));
    for row in rows {
        table.push_row(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    #[test]
    fn single_point_qber_sweep_equals_the_library_report() {
        let text = "[channel]\nturbulence = \"strong\"\nd_r = 0.1\n\
                    [geometry]\ndistance = 50.0\n\
                    [sweep]\nvariable = \"distance\"\nstart = 50.0\nstop = 50.0\nstep = 1.0\n";
        let scenario = parse_config_str(text, &[]).unwrap();
        let table = run_subcommand(Subcommand::QberSweep, &scenario, None).unwrap();
        assert_eq!(table.rows.len(), 1);

        let Protocol::Bb84(params) = &scenario.protocol else {
            panic!("expected bb84 protocol");
        };
        let ls = link_scenario(&scenario, *params);
        let report = direct_link_report(&ls, 50.0, &QuadratureSpec::default()).unwrap();
        let row = &table.rows[0];
        assert_eq!(row[0], 50.0);
        assert_eq!(row[1], report.qber_upper);
        assert_eq!(row[2], report.skr_lower);
        assert_eq!(row[5], report.path_loss);
    }

    #[test]
    fn skr_sweep_swaps_the_lead_columns() {
        let text = "[sweep]\nvariable = \"distance\"\nstart = 30.0\nstop = 30.0\nstep = 1.0\n";
        let scenario = parse_config_str(text, &[]).unwrap();
        let qber = run_subcommand(Subcommand::QberSweep, &scenario, None).unwrap();
        let skr = run_subcommand(Subcommand::SkrSweep, &scenario, None).unwrap();
        assert_eq!(qber.schema[1].name, "qber");
        assert_eq!(skr.schema[1].name, "skr");
        assert_eq!(qber.rows[0][1], skr.rows[0][2]);
        assert_eq!(qber.rows[0][2], skr.rows[0][1]);
    }

    #[test]
    fn sweep_subcommands_demand_their_axis() {
        let scenario = parse_config_str("", &[]).unwrap();
        let err = run_subcommand(Subcommand::QberSweep, &scenario, None).unwrap_err();
        assert!(err.to_string().contains("[sweep]"), "{err}");

        let gate_axis =
            "[sweep]\nvariable = \"gate\"\nstart = 1e-11\nstop = 1e-10\nstep = 1e-11\n";
        let scenario = parse_config_str(gate_axis, &[]).unwrap();
        let err = run_subcommand(Subcommand::QberSweep, &scenario, None).unwrap_err();
        assert!(err.to_string().contains("\"distance\""), "{err}");
    }

    #[test]
    fn protocol_mismatch_names_both_sides() {
        let text = "[protocol.mc]\n\
                    [sweep]\nvariable = \"distance\"\nstart = 1.0\nstop = 2.0\nstep = 1.0\n";
        let scenario = parse_config_str(text, &[]).unwrap();
        let err = run_subcommand(Subcommand::QberSweep, &scenario, None).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("protocol.mc"), "{message}");
        assert!(message.contains("protocol.bb84"), "{message}");
    }

    #[test]
    fn gate_noise_matches_a_direct_radiometric_evaluation() {
        let text = "[geometry]\ndistance = 10.0\nrx_diameter = 0.2\nwavelength = 532.0\n\
                    [receiver]\nfov = 10.0\nbit_period = 20e-9\n\
                    [protocol.mc]\n";
        let scenario = parse_config_str(text, &[]).unwrap();
        let rate = background_photons_per_polarization(
            &scenario.environment,
            &scenario.receiver,
            scenario.geometry.wavelength,
        ) / scenario.receiver.gate_time;

        let planck = 6.62607015e-34;
        let light = 2.99792458e8;
        let r_d = 1e-3 * (-0.08_f64 * 100.0).exp();
        let area = std::f64::consts::PI * 0.1 * 0.1;
        let omega = 10.0_f64.to_radians();
        let expected = std::f64::consts::PI * r_d * area * 532e-9 * 30e-9 * (1.0 - omega.cos())
            / (2.0 * planck * light);
        assert!(
            ((rate - expected) / expected).abs() < 1e-12,
            "rate {rate}, expected {expected}"
        );
        assert!((dark_counts(&scenario.receiver) - 1.2e-6).abs() < 1e-18);
    }

    #[test]
    fn validate_wsf_requires_a_turbulence_regime() {
        let text = "[sweep]\nvariable = \"rho\"\nstart = 0.01\nstop = 0.02\nstep = 0.01\n";
        let scenario = parse_config_str(text, &[]).unwrap();
        let err = run_subcommand(Subcommand::ValidateWsf, &scenario, None).unwrap_err();
        assert!(err.to_string().contains("turbulence"), "{err}");
    }

    #[test]
    fn validate_wsf_rows_compare_the_two_routes() {
        let text = "[channel]\nturbulence = \"weak\"\n\
                    [geometry]\ndistance = 20.0\n\
                    [sweep]\nvariable = \"rho\"\nstart = 0.01\nstop = 0.05\nstep = 0.02\n";
        let scenario = parse_config_str(text, &[]).unwrap();
        let table = run_subcommand(Subcommand::ValidateWsf, &scenario, None).unwrap();
        assert_eq!(table.rows.len(), 3);
        for row in &table.rows {
            assert!(row[1] > 0.0 && row[2] > 0.0);
            assert!(row[3] < 0.10, "rel error {} at rho {}", row[3], row[0]);
        }
    }

    #[test]
    fn mc_run_histogram_totals_match_the_metadata() {
        let text = "[geometry]\ndistance = 5.0\nrx_diameter = 0.2\n\
                    [receiver]\nfov = 90.0\nbit_period = 20e-9\n\
                    [protocol.mc]\nphotons = 20000\nseed = 7\n";
        let scenario = parse_config_str(text, &[]).unwrap();
        let table = run_subcommand(Subcommand::McRun, &scenario, None).unwrap();
        assert_eq!(table.rows.len(), 200);
        let counts: f64 = table.rows.iter().map(|r| r[2]).sum();
        let weight: f64 = table.rows.iter().map(|r| r[3]).sum();
        assert_eq!(counts, table.metadata.extra["received"]);
        assert!((weight - table.metadata.extra["received_weight"]).abs() < 1e-9);
        assert_eq!(table.metadata.seed, Some(7));
    }

    #[test]
    fn seed_override_beats_the_scenario_seed() {
        let text = "[geometry]\ndistance = 5.0\n[protocol.mc]\nphotons = 5000\nseed = 3\n";
        let scenario = parse_config_str(text, &[]).unwrap();
        let table = run_subcommand(Subcommand::McRun, &scenario, Some(99)).unwrap();
        assert_eq!(table.metadata.seed, Some(99));
    }
}
