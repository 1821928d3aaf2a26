//! Control protocols: coupling schedules for sequential SWAP transfer,
//! adiabatic (dark-state) transfer, and heralded-entanglement distribution,
//! plus the ideal two-mode beam-splitter gate they compose into.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;

use crate::hilbert::{annihilation_op, DensityMatrix, ModeRegister};
use crate::lindblad::{
    integrate_amplitudes_segment, integrate_master_segment, AmplitudeTrace, EvolveOptions,
    LindbladChannelSet, SimulationTrace,
};
use crate::{CoreError, Result};

/// Gaussian control envelope `amplitude * exp(-(t - center)^2 / width)`.
///
/// `width` carries units of time squared; the 1/e half-width is `sqrt(width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianPulse {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        if !amplitude.is_finite() || !center.is_finite() {
            return Err(CoreError::InvalidParameter(
                "pulse amplitude and center must be finite".into(),
            ));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "pulse width must be positive, got {width}"
            )));
        }
        Ok(GaussianPulse {
            amplitude,
            center,
            width,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        let dt = t - self.center;
        self.amplitude * (-(dt * dt) / self.width).exp()
    }
}

/// One coupling entry in a schedule segment: flat or pulsed.
///
/// Pulses are evaluated at the global schedule time, not time within the
/// segment, so a pulse centred late in a schedule can be declared on the
/// segment it overlaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingValue {
    Constant(f64),
    Pulsed(GaussianPulse),
}

impl CouplingValue {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            CouplingValue::Constant(v) => *v,
            CouplingValue::Pulsed(p) => p.value(t),
        }
    }

    fn validate(&self, which: &str) -> Result<()> {
        match self {
            CouplingValue::Constant(v) if !v.is_finite() => Err(CoreError::InvalidParameter(
                format!("coupling {which} must be finite, got {v}"),
            )),
            _ => Ok(()),
        }
    }
}

/// A stretch of the protocol with fixed detunings and (possibly pulsed)
/// couplings on the three exchange terms.
#[derive(Debug, Clone)]
pub struct Segment {
    pub duration: f64,
    /// Optical-REDC exchange coupling (may be negative).
    pub g1: CouplingValue,
    /// Microwave-REDC exchange coupling.
    pub g2: CouplingValue,
    /// Microwave-NV exchange coupling.
    pub gnv: CouplingValue,
    /// Detunings of `(a, b, c, d)` entering as number-operator terms.
    pub detunings: [f64; 4],
}

impl Segment {
    pub fn constant(duration: f64, g1: f64, g2: f64, gnv: f64) -> Segment {
        Segment {
            duration,
            g1: CouplingValue::Constant(g1),
            g2: CouplingValue::Constant(g2),
            gnv: CouplingValue::Constant(gnv),
            detunings: [0.0; 4],
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "segment duration must be positive, got {}",
                self.duration
            )));
        }
        self.g1.validate("g1")?;
        self.g2.validate("g2")?;
        self.gnv.validate("gnv")?;
        if self.detunings.iter().any(|d| !d.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "segment detunings must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// An ordered, validated list of segments starting at `t = 0`.
#[derive(Debug, Clone)]
pub struct CouplingSchedule {
    segments: Vec<Segment>,
}

impl CouplingSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(CoreError::InvalidParameter(
                "a schedule needs at least one segment".into(),
            ));
        }
        for seg in &segments {
            seg.validate()?;
        }
        Ok(CouplingSchedule { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Segment boundary times `t_1 < t_2 < ... = total_duration`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.segments
            .iter()
            .map(|s| {
                acc += s.duration;
                acc
            })
            .collect()
    }

    /// Instantaneous `(g1, g2, gnv, detunings)` at global time `t`.
    ///
    /// Segments own half-open windows `[start, end)`, except the last, which
    /// also owns its endpoint. Times outside the schedule clamp to the
    /// nearest end.
    pub fn values_at(&self, t: f64) -> (f64, f64, f64, [f64; 4]) {
        let mut start = 0.0;
        let last = self.segments.len() - 1;
        for (i, seg) in self.segments.iter().enumerate() {
            let end = start + seg.duration;
            if t < end || i == last {
                return (
                    seg.g1.value_at(t),
                    seg.g2.value_at(t),
                    seg.gnv.value_at(t),
                    seg.detunings,
                );
            }
            start = end;
        }
        unreachable!("schedules are non-empty");
    }
}

/// The three effective exchange couplings of the transducer chain.
///
/// `g1` (optical-REDC) is signed: it inherits the sign of the Raman drive
/// detuning. `g2` (microwave-REDC) and `gnv` (microwave-NV) are positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransducerCouplings {
    pub g1: f64,
    pub g2: f64,
    pub gnv: f64,
}

impl TransducerCouplings {
    fn validate(&self) -> Result<()> {
        if !(self.g1.is_finite() && self.g1 != 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "g1 must be finite and nonzero, got {}",
                self.g1
            )));
        }
        for (name, v) in [("g2", self.g2), ("gnv", self.gnv)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Sequential transfer of an optical excitation to the NV ensemble:
/// a pi-swap on each link in turn, `a -> c -> b -> d`, with durations
/// `pi/(2|g1|)`, `pi/(2 g2)`, `pi/(2 gnv)`.
pub fn swap_protocol_schedule(c: &TransducerCouplings) -> Result<CouplingSchedule> {
    c.validate()?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    CouplingSchedule::new(vec![
        Segment::constant(half_pi / c.g1.abs(), c.g1, 0.0, 0.0),
        Segment::constant(half_pi / c.g2, 0.0, c.g2, 0.0),
        Segment::constant(half_pi / c.gnv, 0.0, 0.0, c.gnv),
    ])
}

/// The SWAP chain run backwards, `d -> b -> c -> a`, returning an NV
/// excitation to the optical cavity.
pub fn swap_protocol_schedule_reversed(c: &TransducerCouplings) -> Result<CouplingSchedule> {
    c.validate()?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    CouplingSchedule::new(vec![
        Segment::constant(half_pi / c.gnv, 0.0, 0.0, c.gnv),
        Segment::constant(half_pi / c.g2, 0.0, c.g2, 0.0),
        Segment::constant(half_pi / c.g1.abs(), c.g1, 0.0, 0.0),
    ])
}

/// Adiabatic-style optical -> microwave transfer: a Gaussian pulse on the
/// optical-REDC coupling against a constant microwave-REDC coupling `g2`.
pub fn adiabatic_schedule(pulse: GaussianPulse, g2: f64, total_t: f64) -> Result<CouplingSchedule> {
    if !(g2.is_finite() && g2 > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "g2 must be positive, got {g2}"
        )));
    }
    CouplingSchedule::new(vec![Segment {
        duration: total_t,
        g1: CouplingValue::Pulsed(pulse),
        g2: CouplingValue::Constant(g2),
        gnv: CouplingValue::Constant(0.0),
        detunings: [0.0; 4],
    }])
}

/// [`adiabatic_schedule`] followed by a microwave -> NV pi-swap of duration
/// `pi/(2 gnv)`, completing the optical -> NV chain.
pub fn adiabatic_schedule_with_swap(
    pulse: GaussianPulse,
    g2: f64,
    total_t: f64,
    gnv: f64,
) -> Result<CouplingSchedule> {
    if !(gnv.is_finite() && gnv > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "gnv must be positive, got {gnv}"
        )));
    }
    let stage = adiabatic_schedule(pulse, g2, total_t)?;
    let mut segments = stage.segments.clone();
    segments.push(Segment::constant(
        std::f64::consts::FRAC_PI_2 / gnv,
        0.0,
        0.0,
        gnv,
    ));
    CouplingSchedule::new(segments)
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CoreError::InvalidParameter(format!(
            "entangled amplitude alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Entanglement distribution from an NV excitation: a partial swap on the
/// microwave-NV link splits off amplitude `alpha`
/// (duration `arcsin(alpha)/gnv`), and two full swaps carry it to the
/// optical cavity, leaving the optical and NV modes entangled.
///
/// `alpha = 0` drops the zero-length first segment.
pub fn entanglement_schedule(c: &TransducerCouplings, alpha: f64) -> Result<CouplingSchedule> {
    c.validate()?;
    validate_alpha(alpha)?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let t_alpha = alpha.asin() / c.gnv;
    let mut segments = Vec::new();
    if t_alpha > 0.0 {
        segments.push(Segment::constant(t_alpha, 0.0, 0.0, c.gnv));
    }
    segments.push(Segment::constant(half_pi / c.g2, 0.0, c.g2, 0.0));
    segments.push(Segment::constant(half_pi / c.g1.abs(), c.g1, 0.0, 0.0));
    CouplingSchedule::new(segments)
}

/// Entanglement distribution run from the optical side: the partial swap
/// happens first on the optical-REDC link (duration `arcsin(alpha)/|g1|`),
/// then full swaps carry the split amplitude to the NV ensemble.
pub fn entanglement_schedule_reversed(
    c: &TransducerCouplings,
    alpha: f64,
) -> Result<CouplingSchedule> {
    c.validate()?;
    validate_alpha(alpha)?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let t_alpha = alpha.asin() / c.g1.abs();
    let mut segments = Vec::new();
    if t_alpha > 0.0 {
        segments.push(Segment::constant(t_alpha, c.g1, 0.0, 0.0));
    }
    segments.push(Segment::constant(half_pi / c.g2, 0.0, c.g2, 0.0));
    segments.push(Segment::constant(half_pi / c.gnv, 0.0, 0.0, c.gnv));
    CouplingSchedule::new(segments)
}

/// Ideal beam-splitter gate of a resonant exchange coupling `g` acting for
/// time `t` on a two-qubit pair, in the basis `(|00>, |01>, |10>, |11>)`:
///
/// ```text
/// [ 1      0          0      0 ]
/// [ 0   cos(gt)   i sin(gt)  0 ]
/// [ 0  i sin(gt)   cos(gt)   0 ]
/// [ 0      0          0      1 ]
/// ```
///
/// `gt = pi/2` is an iSWAP, `gt = pi/4` a sqrt-iSWAP. The convention puts
/// `+i` on the off-diagonal; propagating `exp(-i H t)` with
/// `H = g(x^dag y + y^dag x)` yields the complex conjugate, which differs
/// only by a local-phase redefinition of the modes and leaves every
/// population and concurrence unchanged.
pub fn gate_unitary(g: f64, t: f64) -> Matrix4<Complex64> {
    let (s, c) = (g * t).sin_cos();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let cos = Complex64::new(c, 0.0);
    let isin = Complex64::new(0.0, s);
    Matrix4::new(
        one, zero, zero, zero, //
        zero, cos, isin, zero, //
        zero, isin, cos, zero, //
        zero, zero, zero, one,
    )
}

/// The canonical four-mode register labels in chain order.
const CHAIN_LABELS: [&str; 4] = ["a", "b", "c", "d"];

struct ChainOperators {
    /// Exchange matrices for the three links `(a,c)`, `(b,c)`, `(b,d)`.
    exchange: [DMatrix<Complex64>; 3],
    /// Occupation of each chain mode per basis index, for detuning terms.
    occupations: [Vec<f64>; 4],
}

fn chain_operators(reg: &Arc<ModeRegister>) -> Result<ChainOperators> {
    let a = annihilation_op(reg, "a")?;
    let b = annihilation_op(reg, "b")?;
    let c = annihilation_op(reg, "c")?;
    let d = annihilation_op(reg, "d")?;
    let exchange = [
        a.dagger().mul(&c)?.plus_hc().into_matrix(),
        b.dagger().mul(&c)?.plus_hc().into_matrix(),
        b.dagger().mul(&d)?.plus_hc().into_matrix(),
    ];
    let mut occupations: [Vec<f64>; 4] = Default::default();
    for (slot, label) in CHAIN_LABELS.iter().enumerate() {
        let m = reg.index_of(label)?;
        occupations[slot] = (0..reg.dim())
            .map(|k| reg.occupation_of(k, m) as f64)
            .collect();
    }
    Ok(ChainOperators {
        exchange,
        occupations,
    })
}

/// Evolves a density matrix under a schedule on a register with modes
/// `a, b, c, d`, concatenating the segments into one sampled trajectory.
pub fn simulate_schedule_master(
    rho0: &DensityMatrix,
    schedule: &CouplingSchedule,
    channels: &LindbladChannelSet,
    opts: &EvolveOptions,
) -> Result<SimulationTrace> {
    opts.validate()?;
    channels.validate()?;
    let reg = rho0.register().clone();
    let ops = chain_operators(&reg)?;
    let diss = crate::lindblad::build_dissipators(&reg, channels)?;

    let mut rho = rho0.matrix().clone();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut trace_errors = Vec::new();
    let mut step_offset = 0usize;
    let mut t0 = 0.0;
    for (i, seg) in schedule.segments().iter().enumerate() {
        let det = seg.detunings;
        let mut supplier = |t: f64, h: &mut DMatrix<Complex64>| -> Result<()> {
            let g = [
                seg.g1.value_at(t),
                seg.g2.value_at(t),
                seg.gnv.value_at(t),
            ];
            {
                let hs = h.as_mut_slice();
                for (link, weight) in g.iter().enumerate() {
                    if *weight != 0.0 {
                        for (hk, mk) in hs.iter_mut().zip(ops.exchange[link].as_slice()) {
                            *hk += mk * *weight;
                        }
                    }
                }
            }
            for (slot, delta) in det.iter().enumerate() {
                if *delta != 0.0 {
                    for k in 0..h.nrows() {
                        h[(k, k)] += Complex64::new(delta * ops.occupations[slot][k], 0.0);
                    }
                }
            }
            Ok(())
        };
        integrate_master_segment(
            &mut rho,
            &mut supplier,
            &diss,
            &reg,
            t0,
            seg.duration,
            opts,
            i == 0,
            &mut step_offset,
            &mut times,
            &mut states,
            &mut trace_errors,
        )?;
        t0 += seg.duration;
    }
    Ok(SimulationTrace::from_parts(reg, times, states, trace_errors))
}

/// Evolves single-excitation amplitudes `(a, b, c, d)` under a schedule.
/// Requires a zero-temperature microwave bath, like
/// [`crate::lindblad::evolve_amplitudes`].
pub fn simulate_schedule_amplitudes(
    alpha0: [Complex64; 4],
    schedule: &CouplingSchedule,
    channels: &LindbladChannelSet,
    opts: &EvolveOptions,
) -> Result<AmplitudeTrace> {
    opts.validate()?;
    channels.validate()?;
    if channels.n_th != 0.0 {
        return Err(CoreError::InvalidParameter(
            "amplitude picture requires a zero-temperature microwave bath (n_th = 0)".into(),
        ));
    }
    let mut y = alpha0;
    let mut times = Vec::new();
    let mut amps = Vec::new();
    let mut t0 = 0.0;
    for (i, seg) in schedule.segments().iter().enumerate() {
        let mut coupling = |t: f64| -> (f64, f64, f64, [f64; 4]) {
            (
                seg.g1.value_at(t),
                seg.g2.value_at(t),
                seg.gnv.value_at(t),
                seg.detunings,
            )
        };
        integrate_amplitudes_segment(
            &mut y,
            &mut coupling,
            channels,
            t0,
            seg.duration,
            opts,
            i == 0,
            &mut times,
            &mut amps,
        )?;
        t0 += seg.duration;
    }
    Ok(AmplitudeTrace::from_parts(times, amps))
}
