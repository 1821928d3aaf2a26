//! Scenario execution: builds the register, schedule, and initial state from
//! a [`ScenarioConfig`], runs the master equation (and, where meaningful, the
//! single-excitation amplitude picture for the fidelity column), and shapes
//! the results for the trace CSV, summary JSON, and sweep tables.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use transducer_core::hilbert::{
    basis_state, make_register, mode_superposition_state, DensityMatrix, ModeRegister,
    OperatorMatrix,
};
use transducer_core::lindblad::{
    evolve_master_static, EvolveOptions, LindbladChannelSet, SimulationTrace,
};
use transducer_core::metrics::{clamp_metric, concurrence, transfer_efficiency};
use transducer_core::protocols::{
    adiabatic_schedule, adiabatic_schedule_with_swap, entanglement_schedule,
    entanglement_schedule_reversed, simulate_schedule_amplitudes, simulate_schedule_master,
    swap_protocol_schedule, swap_protocol_schedule_reversed, CouplingSchedule, GaussianPulse,
    TransducerCouplings,
};

use crate::config::{ProtocolKind, ScenarioConfig};
use crate::CliError;

/// The four chain modes in canonical order; the trace CSV has one population
/// column per label.
pub const CHAIN_LABELS: [&str; 4] = ["a", "b", "c", "d"];

/// Everything a finished run produces.
pub struct RunArtifacts {
    pub config: ScenarioConfig,
    pub times: Vec<f64>,
    /// Population series per chain mode; `None` where the register has no
    /// such mode.
    pub populations: [Option<Vec<f64>>; 4],
    /// Transfer fidelity series; `None` for scenarios without a transfer
    /// target or outside the single-excitation regime.
    pub fidelity: Option<Vec<f64>>,
    /// Optical-NV concurrence series; entanglement scenarios only.
    pub concurrence_ad: Option<Vec<f64>>,
    pub trace_errors: Vec<f64>,
    pub summary: Summary,
    /// The underlying master-equation trace, for callers that want the
    /// sampled density matrices themselves.
    pub trace: SimulationTrace,
}

/// The summary record written as one JSON object per run. Runtime is kept
/// out on purpose: two runs of the same scenario must produce byte-identical
/// summaries.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario_hash: String,
    pub protocol: String,
    /// Total protocol duration in units of `1/g`.
    pub total_duration: f64,
    /// Duration in microseconds when `output.g_physical_mhz` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_duration_us: Option<f64>,
    pub samples: usize,
    pub max_trace_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_fidelity_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_concurrence_ad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_concurrence_ad: Option<f64>,
    /// Final mean occupation of every register mode.
    pub final_populations: BTreeMap<String, f64>,
}

fn chain_slot(label: &str) -> Option<usize> {
    CHAIN_LABELS.iter().position(|l| *l == label)
}

/// The mode a transfer protocol is meant to fill, if any.
fn target_mode(kind: ProtocolKind, append_swap: bool) -> Option<&'static str> {
    match kind {
        ProtocolKind::Swap => Some("d"),
        ProtocolKind::SwapReversed => Some("a"),
        ProtocolKind::Adiabatic => Some(if append_swap { "d" } else { "b" }),
        ProtocolKind::Entanglement | ProtocolKind::EntanglementReversed | ProtocolKind::Hold => {
            None
        }
    }
}

fn build_register(config: &ScenarioConfig) -> Result<Arc<ModeRegister>, CliError> {
    let specs: Vec<(String, usize)> = config
        .register
        .modes
        .iter()
        .map(|m| (m.label.clone(), m.dim))
        .collect();
    Ok(make_register(&specs)?)
}

fn build_channels(config: &ScenarioConfig) -> LindbladChannelSet {
    LindbladChannelSet {
        kappa_a: config.channels.kappa_a,
        kappa_b: config.channels.kappa_b,
        gamma_c: config.channels.gamma_c,
        gamma_d: config.channels.gamma_d,
        n_th: config.channels.n_th,
    }
}

fn build_initial_state(
    config: &ScenarioConfig,
    reg: &Arc<ModeRegister>,
) -> Result<DensityMatrix, CliError> {
    if let Some(occ) = &config.initial.occupations {
        return Ok(basis_state(reg, occ)?);
    }
    let mode = config.initial.mode.as_deref().expect("validated");
    let amps: Vec<Complex64> = config
        .initial
        .amplitudes
        .as_ref()
        .expect("validated")
        .iter()
        .map(|[re, im]| Complex64::new(*re, *im))
        .collect();
    Ok(mode_superposition_state(reg, mode, &amps)?)
}

/// Coupling schedule a scenario prescribes; `None` for the static `hold`
/// protocol.
pub fn build_schedule(config: &ScenarioConfig) -> Result<Option<CouplingSchedule>, CliError> {
    let kind = config.protocol_kind()?;
    let (g1, g2) = config.effective_g1_g2()?;
    let gnv = config.couplings.gnv;
    let full_couplings = || -> Result<TransducerCouplings, CliError> {
        Ok(TransducerCouplings {
            g1: g1.expect("validated"),
            g2: g2.expect("validated"),
            gnv: gnv.expect("validated"),
        })
    };
    let schedule = match kind {
        ProtocolKind::Swap => Some(swap_protocol_schedule(&full_couplings()?)?),
        ProtocolKind::SwapReversed => Some(swap_protocol_schedule_reversed(&full_couplings()?)?),
        ProtocolKind::Adiabatic => {
            let p = config.protocol.pulse.as_ref().expect("validated");
            let pulse = GaussianPulse::new(p.g0, p.t0, p.w)?;
            let g2 = g2.expect("validated");
            let total_t = config.protocol.total_t.expect("validated");
            if config.protocol.append_swap == Some(true) {
                Some(adiabatic_schedule_with_swap(
                    pulse,
                    g2,
                    total_t,
                    gnv.expect("validated"),
                )?)
            } else {
                Some(adiabatic_schedule(pulse, g2, total_t)?)
            }
        }
        ProtocolKind::Entanglement => Some(entanglement_schedule(
            &full_couplings()?,
            config.protocol.alpha.expect("validated"),
        )?),
        ProtocolKind::EntanglementReversed => Some(entanglement_schedule_reversed(
            &full_couplings()?,
            config.protocol.alpha.expect("validated"),
        )?),
        ProtocolKind::Hold => None,
    };
    Ok(schedule)
}

/// The single-excitation description of the initial state, when it has one:
/// vacuum amplitude, excited amplitude, and the mode carrying the excitation.
fn single_excitation_input(config: &ScenarioConfig) -> Option<(Complex64, Complex64, String)> {
    if let Some(occ) = &config.initial.occupations {
        let excited: Vec<usize> = occ
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, _)| i)
            .collect();
        if excited.len() != 1 || occ[excited[0]] != 1 {
            return None;
        }
        let label = config.register.modes[excited[0]].label.clone();
        return Some((Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), label));
    }
    let amps = config.initial.amplitudes.as_ref()?;
    if amps.len() != 2 {
        return None;
    }
    let mode = config.initial.mode.clone()?;
    Some((
        Complex64::new(amps[0][0], amps[0][1]),
        Complex64::new(amps[1][0], amps[1][1]),
        mode,
    ))
}

/// Transfer-fidelity series in the single-excitation picture.
///
/// The lossy amplitudes give the surviving excited component on the target
/// mode; the vacuum component tops the state back up to a pure qubit state,
/// which is compared against the output of the same schedule without loss.
/// This is exact in the zero-temperature single-excitation sector the
/// presets occupy.
fn amplitude_fidelity_series(
    config: &ScenarioConfig,
    schedule: &CouplingSchedule,
    channels: &LindbladChannelSet,
    opts: &EvolveOptions,
    target: &str,
) -> Result<Option<Vec<f64>>, CliError> {
    if channels.n_th != 0.0 {
        return Ok(None);
    }
    // The amplitude picture describes exactly the four chain modes.
    let labels_ok = config.register.modes.len() == 4
        && config
            .register
            .modes
            .iter()
            .all(|m| chain_slot(&m.label).is_some());
    if !labels_ok {
        return Ok(None);
    }
    let Some((alpha, beta, input_mode)) = single_excitation_input(config) else {
        return Ok(None);
    };
    let Some(input_slot) = chain_slot(&input_mode) else {
        return Ok(None);
    };
    let target_slot = chain_slot(target).expect("targets are chain modes");

    let mut y0 = [Complex64::new(0.0, 0.0); 4];
    y0[input_slot] = beta;
    let lossy = simulate_schedule_amplitudes(y0, schedule, channels, opts)?;
    let ideal = simulate_schedule_amplitudes(y0, schedule, &LindbladChannelSet::lossless(), opts)?;

    // Reference phase of a perfect run; an ideal protocol delivers the full
    // |beta| onto the target, so only the phase is kept.
    let arrival = ideal.final_amplitudes()[target_slot];
    if arrival.norm() < 1e-9 {
        // The protocol never populates the target without loss; a transfer
        // fidelity against it is meaningless.
        return Ok(None);
    }
    let u = arrival / arrival.norm();

    let mut series = Vec::with_capacity(lossy.len());
    for y in lossy.amplitudes() {
        let psi_t = y[target_slot];
        let vacuum_part = (1.0 - psi_t.norm_sqr()).max(0.0).sqrt();
        let overlap = alpha * vacuum_part + (u * beta).conj() * psi_t;
        series.push(clamp_metric(overlap.norm_sqr(), "fidelity")?);
    }
    Ok(Some(series))
}

fn concurrence_ad_series(trace: &SimulationTrace) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::with_capacity(trace.len());
    for state in trace.states() {
        out.push(concurrence(state, "a", "d")?);
    }
    Ok(out)
}

fn peak_with_time(times: &[f64], values: &[f64]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (&t, &v) in times.iter().zip(values) {
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((t, v));
        }
    }
    best
}

/// Runs just the master-equation part of a scenario and hands back the raw
/// trace, for callers that want the sampled states rather than the shaped
/// CSV columns.
pub fn simulate_config(config: &ScenarioConfig) -> Result<SimulationTrace, CliError> {
    config.validate()?;
    let reg = build_register(config)?;
    let channels = build_channels(config);
    let rho0 = build_initial_state(config, &reg)?;
    let opts = EvolveOptions {
        dt: config.integrator.dt,
        sample_every: config.output.sample_every,
        ..EvolveOptions::default()
    };
    match build_schedule(config)? {
        Some(sched) => Ok(simulate_schedule_master(&rho0, &sched, &channels, &opts)?),
        None => {
            let total_t = config.protocol.total_t.expect("validated");
            let h0 = OperatorMatrix::zeros(reg.clone());
            Ok(evolve_master_static(
                &rho0,
                &h0,
                &channels,
                (0.0, total_t),
                &opts,
            )?)
        }
    }
}

/// Runs one scenario end to end.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunArtifacts, CliError> {
    config.validate()?;
    let kind = config.protocol_kind()?;
    let reg = build_register(config)?;
    let channels = build_channels(config);
    let opts = EvolveOptions {
        dt: config.integrator.dt,
        sample_every: config.output.sample_every,
        ..EvolveOptions::default()
    };

    let schedule = build_schedule(config)?;
    let total_duration = match &schedule {
        Some(sched) => sched.total_duration(),
        None => config.protocol.total_t.expect("validated"),
    };
    let trace = simulate_config(config)?;

    let mut populations: [Option<Vec<f64>>; 4] = Default::default();
    for (slot, label) in CHAIN_LABELS.iter().enumerate() {
        if reg.has_mode(label) {
            populations[slot] = Some(trace.population_series(label)?);
        }
    }

    let append_swap = config.protocol.append_swap == Some(true);
    let target = target_mode(kind, append_swap);

    let fidelity = match (&schedule, target) {
        (Some(sched), Some(tgt)) => {
            amplitude_fidelity_series(config, sched, &channels, &opts, tgt)?
        }
        _ => None,
    };
    if let Some(series) = &fidelity {
        debug_assert_eq!(series.len(), trace.len());
    }

    let is_entanglement = matches!(
        kind,
        ProtocolKind::Entanglement | ProtocolKind::EntanglementReversed
    );
    let concurrence_ad = if is_entanglement {
        Some(concurrence_ad_series(&trace)?)
    } else {
        None
    };

    // Efficiency: final target-mode population, reported for Fock inputs.
    let efficiency = match target {
        Some(tgt) if config.initial.occupations.is_some() && reg.has_mode(tgt) => {
            Some(transfer_efficiency(&trace, tgt)?)
        }
        _ => None,
    };

    let mut final_populations = BTreeMap::new();
    for m in &config.register.modes {
        final_populations.insert(m.label.clone(), trace.final_state().mode_occupation(&m.label)?);
    }

    let peak_fid = fidelity
        .as_ref()
        .and_then(|s| peak_with_time(trace.times(), s));
    let peak_conc = concurrence_ad
        .as_ref()
        .and_then(|s| peak_with_time(trace.times(), s));

    let summary = Summary {
        scenario_hash: config.scenario_hash(),
        protocol: config.protocol.name.clone(),
        total_duration,
        total_duration_us: config.output.g_physical_mhz.map(|g| total_duration / g),
        samples: trace.len(),
        max_trace_error: trace.max_trace_error(),
        peak_fidelity: peak_fid.map(|(_, v)| v),
        peak_fidelity_time: peak_fid.map(|(t, _)| t),
        final_fidelity: fidelity.as_ref().and_then(|s| s.last().copied()),
        efficiency,
        peak_concurrence_ad: peak_conc.map(|(_, v)| v),
        final_concurrence_ad: concurrence_ad.as_ref().and_then(|s| s.last().copied()),
        final_populations,
    };

    Ok(RunArtifacts {
        config: config.clone(),
        times: trace.times().to_vec(),
        populations,
        fidelity,
        concurrence_ad,
        trace_errors: trace.trace_errors().to_vec(),
        summary,
        trace,
    })
}

/// The fixed trace CSV header.
pub const TRACE_CSV_HEADER: &str = "t,pop_a,pop_b,pop_c,pop_d,fidelity,concurrence_ad,trace_err";

/// Renders the sampled trajectory; columns that do not apply to the scenario
/// stay empty.
pub fn trace_csv(artifacts: &RunArtifacts) -> String {
    let mut out = String::new();
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    let cell = |row: &mut String, v: Option<f64>| {
        row.push(',');
        if let Some(v) = v {
            row.push_str(&format!("{v}"));
        }
    };
    for i in 0..artifacts.times.len() {
        let mut row = format!("{}", artifacts.times[i]);
        for pop in &artifacts.populations {
            cell(&mut row, pop.as_ref().map(|s| s[i]));
        }
        cell(&mut row, artifacts.fidelity.as_ref().map(|s| s[i]));
        cell(&mut row, artifacts.concurrence_ad.as_ref().map(|s| s[i]));
        cell(&mut row, Some(artifacts.trace_errors[i]));
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn summary_json(artifacts: &RunArtifacts) -> String {
    let mut text =
        serde_json::to_string_pretty(&artifacts.summary).expect("summaries always serialize");
    text.push('\n');
    text
}

/// One row of a sweep table.
pub struct SweepRow {
    pub value: f64,
    pub peak_fidelity: Option<f64>,
    pub efficiency: Option<f64>,
    pub final_concurrence_ad: Option<f64>,
    pub runtime_s: f64,
}

pub const SWEEP_CSV_HEADER: &str = "value,peak_fidelity,efficiency,final_concurrence_ad,runtime_s";

/// Runs the base scenario once per parameter value, in the order given.
pub fn run_sweep(
    base: &ScenarioConfig,
    param: &str,
    values: &[f64],
) -> Result<(Vec<SweepRow>, Vec<RunArtifacts>), CliError> {
    if values.is_empty() {
        return Err(CliError::Invalid(
            "sweep needs at least one parameter value".into(),
        ));
    }
    // Surface bad key paths before spending time simulating.
    base.clone().set_scalar(param, values[0])?;

    let mut rows = Vec::with_capacity(values.len());
    let mut runs = Vec::with_capacity(values.len());
    for &value in values {
        let mut config = base.clone();
        config.set_scalar(param, value)?;
        let started = std::time::Instant::now();
        let artifacts = run_scenario(&config)?;
        let runtime_s = started.elapsed().as_secs_f64();
        rows.push(SweepRow {
            value,
            peak_fidelity: artifacts.summary.peak_fidelity,
            efficiency: artifacts.summary.efficiency,
            final_concurrence_ad: artifacts.summary.final_concurrence_ad,
            runtime_s,
        });
        runs.push(artifacts);
    }
    Ok((rows, runs))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            row.value,
            opt(row.peak_fidelity),
            opt(row.efficiency),
            opt(row.final_concurrence_ad),
            row.runtime_s
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset_config;

    #[test]
    fn hold_scenario_keeps_everything_flat() {
        let text = r#"
[register]
modes = [
  { label = "a", dim = 2 },
  { label = "b", dim = 2 },
  { label = "c", dim = 2 },
  { label = "d", dim = 2 },
]

[couplings]

[channels]

[initial]
occupations = [1, 0, 0, 0]

[protocol]
name = "hold"
total_t = 2.0
"#;
        let config = ScenarioConfig::from_toml_str(text).unwrap();
        let run = run_scenario(&config).unwrap();
        let pop_a = run.populations[0].as_ref().unwrap();
        for &p in pop_a {
            assert!((p - 1.0).abs() < 1e-12);
        }
        assert!(run.summary.max_trace_error < 1e-10);
        assert!(run.fidelity.is_none());
        assert!(run.concurrence_ad.is_none());
        assert_eq!(run.summary.final_populations["a"], *pop_a.last().unwrap());
    }

    #[test]
    fn trace_csv_shape_matches_the_scenario() {
        let mut config = preset_config("fig2b").unwrap();
        // Keep the unit test quick: weak-coupling tail is irrelevant here.
        config.integrator.dt = 5e-3;
        config.output.sample_every = 0.5;
        let run = run_scenario(&config).unwrap();
        let csv = trace_csv(&run);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TRACE_CSV_HEADER);
        let first = lines.next().unwrap();
        let cells: Vec<&str> = first.split(',').collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0], "0");
        assert_eq!(cells[1], "1"); // pop_a starts at the Fock photon
        assert!(!cells[5].is_empty(), "fidelity applies to fig2b");
        assert!(cells[6].is_empty(), "concurrence does not apply to fig2b");
    }

    #[test]
    fn sweep_runs_in_input_order_and_reports_values() {
        let mut config = preset_config("fig3d").unwrap();
        config.integrator.dt = 5e-3;
        config.output.sample_every = 0.5;
        let (rows, runs) = run_sweep(&config, "channels.gamma_c", &[0.2, 0.04]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(runs.len(), 2);
        assert_eq!(rows[0].value, 0.2);
        assert_eq!(rows[1].value, 0.04);
        // Less REDC decay, better transfer.
        assert!(rows[1].peak_fidelity.unwrap() > rows[0].peak_fidelity.unwrap());
        assert!(run_sweep(&config, "register.modes", &[1.0]).is_err());
    }
}
