//! Open-system time evolution.
//!
//! Three levels of description of the same transducer, finest first:
//!
//! * [`evolve_master`] integrates the full Lindblad master equation with a
//!   fixed-step RK4 scheme and a caller-supplied (possibly time-dependent)
//!   Hamiltonian.
//! * [`evolve_amplitudes`] integrates the single-excitation amplitude
//!   equations, which reproduce the master equation exactly in the
//!   zero-temperature, at-most-one-excitation sector at a tiny fraction of
//!   the cost.
//! * [`bad_cavity_reduce`] eliminates both cavities adiabatically and leaves
//!   a closed-form two-spin-mode decay model.
//!
//! Dissipators follow the convention
//! `d rho/dt += (rate/2) * (2 o rho o^dag - o^dag o rho - rho o^dag o)`
//! with rates `kappa_a`, `gamma_c`, `gamma_d` on the lowering operators of
//! `a`, `c`, `d`, and a thermal pair on `b`: `(kappa_b/2) n_th` on the
//! raising operator and `(kappa_b/2)(n_th + 1)` on the lowering operator.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::hilbert::{
    annihilation_op, hermiticity_deviation, min_eigenvalue, DensityMatrix, ModeRegister,
    OperatorMatrix, EIGENVALUE_FLOOR, HERMITICITY_TOL,
};
use crate::{CoreError, Result};

/// Decay and thermal-occupation parameters of the four canonical modes.
///
/// A zero rate disables its channel; a nonzero rate whose mode is missing
/// from the register is an error rather than silently ignored dissipation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladChannelSet {
    /// Optical cavity decay rate (mode `a`).
    pub kappa_a: f64,
    /// Microwave resonator decay rate (mode `b`).
    pub kappa_b: f64,
    /// Rare-earth spin-mode decay rate (mode `c`).
    pub gamma_c: f64,
    /// NV spin-mode decay rate (mode `d`).
    pub gamma_d: f64,
    /// Thermal occupation of the microwave bath.
    pub n_th: f64,
}

impl LindbladChannelSet {
    pub fn new(kappa_a: f64, kappa_b: f64, gamma_c: f64, gamma_d: f64, n_th: f64) -> Result<Self> {
        let set = LindbladChannelSet {
            kappa_a,
            kappa_b,
            gamma_c,
            gamma_d,
            n_th,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn lossless() -> Self {
        LindbladChannelSet {
            kappa_a: 0.0,
            kappa_b: 0.0,
            gamma_c: 0.0,
            gamma_d: 0.0,
            n_th: 0.0,
        }
    }

    pub fn is_lossless(&self) -> bool {
        self.kappa_a == 0.0
            && self.kappa_b == 0.0
            && self.gamma_c == 0.0
            && self.gamma_d == 0.0
            && self.n_th == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("gamma_c", self.gamma_c),
            ("gamma_d", self.gamma_d),
            ("n_th", self.n_th),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Integrator controls shared by every evolution routine.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Requested step; each span uses `h = span / ceil(span / dt)` so the
    /// final step lands exactly on the span boundary.
    pub dt: f64,
    /// Target spacing of recorded samples.
    pub sample_every: f64,
    /// Allowed drift of `|tr(rho) - 1|` before the run aborts.
    pub trace_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt: 1e-3,
            sample_every: 1e-2,
            trace_tol: 1e-6,
        }
    }
}

impl EvolveOptions {
    pub fn with_dt(dt: f64) -> Self {
        EvolveOptions {
            dt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !self.sample_every.is_finite() || self.sample_every <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "sample_every must be positive, got {}",
                self.sample_every
            )));
        }
        if !self.trace_tol.is_finite() || self.trace_tol <= 0.0 {
            return Err(CoreError::InvalidParameter(
                "trace_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sampled density-matrix trajectory.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    reg: Arc<ModeRegister>,
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    trace_errors: Vec<f64>,
}

impl SimulationTrace {
    pub(crate) fn from_parts(
        reg: Arc<ModeRegister>,
        times: Vec<f64>,
        states: Vec<DensityMatrix>,
        trace_errors: Vec<f64>,
    ) -> Self {
        SimulationTrace {
            reg,
            times,
            states,
            trace_errors,
        }
    }

    pub fn register(&self) -> &Arc<ModeRegister> {
        &self.reg
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn trace_errors(&self) -> &[f64] {
        &self.trace_errors
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trace holds at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trace holds at least the initial state")
    }

    pub fn max_trace_error(&self) -> f64 {
        self.trace_errors.iter().cloned().fold(0.0, f64::max)
    }

    /// Mean occupation of a labelled mode at every sample.
    pub fn population_series(&self, label: &str) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|s| s.mode_occupation(label))
            .collect()
    }
}

/// Sampled single-excitation amplitudes in canonical order `(a, b, c, d)`.
#[derive(Debug, Clone)]
pub struct AmplitudeTrace {
    times: Vec<f64>,
    amplitudes: Vec<[Complex64; 4]>,
}

impl AmplitudeTrace {
    pub(crate) fn from_parts(times: Vec<f64>, amplitudes: Vec<[Complex64; 4]>) -> Self {
        AmplitudeTrace { times, amplitudes }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn amplitudes(&self) -> &[[Complex64; 4]] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_amplitudes(&self) -> [Complex64; 4] {
        *self.amplitudes.last().expect("trace holds at least the initial state")
    }

    /// `|amplitude|^2` of one canonical mode (0 = a, 1 = b, 2 = c, 3 = d).
    pub fn population_series(&self, mode: usize) -> Vec<f64> {
        self.amplitudes.iter().map(|y| y[mode].norm_sqr()).collect()
    }
}

// ---------------------------------------------------------------------------
// Dissipator plumbing shared by the master-equation integrators.

pub(crate) struct DissipatorSet {
    /// `(2 * prefactor, sparse lowering/raising entries)` per jump operator.
    jump_groups: Vec<(f64, Vec<(usize, usize, f64)>)>,
    /// `sum_channels prefactor * (o^dag o)[i, i]`, so the anticommutator part
    /// of every channel collapses into one elementwise pass.
    half_decay: Vec<f64>,
}

fn sparse_entries(op: &OperatorMatrix) -> Vec<(usize, usize, f64)> {
    let m = op.matrix();
    let mut pairs = Vec::new();
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            let v = m[(row, col)];
            if v.norm() > 0.0 {
                // Ladder operators of real bosonic modes have real entries.
                pairs.push((row, col, v.re));
            }
        }
    }
    pairs
}

pub(crate) fn build_dissipators(
    reg: &Arc<ModeRegister>,
    channels: &LindbladChannelSet,
) -> Result<DissipatorSet> {
    channels.validate()?;
    let mut set = DissipatorSet {
        jump_groups: Vec::new(),
        half_decay: vec![0.0; reg.dim()],
    };

    let add = |label: &str, pref: f64, raising: bool, set: &mut DissipatorSet| -> Result<()> {
        if pref == 0.0 {
            return Ok(());
        }
        if !reg.has_mode(label) {
            return Err(CoreError::InvalidParameter(format!(
                "nonzero dissipation on mode '{label}' but the register has no such mode"
            )));
        }
        let lower = annihilation_op(reg, label)?;
        let op = if raising { lower.dagger() } else { lower };
        let pairs = sparse_entries(&op);
        for &(_, col, s) in &pairs {
            set.half_decay[col] += pref * s * s;
        }
        set.jump_groups.push((2.0 * pref, pairs));
        Ok(())
    };

    add("a", channels.kappa_a / 2.0, false, &mut set)?;
    add("c", channels.gamma_c / 2.0, false, &mut set)?;
    add("d", channels.gamma_d / 2.0, false, &mut set)?;
    add("b", channels.kappa_b / 2.0 * (channels.n_th + 1.0), false, &mut set)?;
    add("b", channels.kappa_b / 2.0 * channels.n_th, true, &mut set)?;
    Ok(set)
}

/// `out = -i [h, rho] + sum_channels (rate/2) zeta(o) rho`.
fn master_rhs(
    out: &mut DMatrix<Complex64>,
    rho: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    diss: &DissipatorSet,
    scratch: &mut DMatrix<Complex64>,
) {
    let n = rho.nrows();
    h.mul_to(rho, scratch);
    rho.mul_to(h, out);
    {
        let o = out.as_mut_slice();
        let s = scratch.as_slice();
        let r = rho.as_slice();
        for k in 0..o.len() {
            // o currently holds rho*h; -i(h*rho - rho*h) = i(rho*h - h*rho).
            let v = o[k] - s[k];
            o[k] = Complex64::new(-v.im, v.re);
        }
        // Anticommutator halves of every channel in one pass.
        let mut k = 0;
        for j in 0..n {
            let dj = diss.half_decay[j];
            for i in 0..n {
                let w = diss.half_decay[i] + dj;
                if w != 0.0 {
                    o[k] -= r[k] * w;
                }
                k += 1;
            }
        }
    }
    // Jump terms: 2*pref * o rho o^dag, exploiting the sparsity of ladder ops.
    for (coef, pairs) in &diss.jump_groups {
        for &(r1, c1, s1) in pairs {
            for &(r2, c2, s2) in pairs {
                out[(r1, r2)] += rho[(c1, c2)] * (coef * s1 * s2);
            }
        }
    }
}

struct RkWorkspace {
    k1: DMatrix<Complex64>,
    k2: DMatrix<Complex64>,
    k3: DMatrix<Complex64>,
    k4: DMatrix<Complex64>,
    ytmp: DMatrix<Complex64>,
    scratch: DMatrix<Complex64>,
    hbuf: DMatrix<Complex64>,
}

impl RkWorkspace {
    fn new(n: usize) -> Self {
        RkWorkspace {
            k1: DMatrix::zeros(n, n),
            k2: DMatrix::zeros(n, n),
            k3: DMatrix::zeros(n, n),
            k4: DMatrix::zeros(n, n),
            ytmp: DMatrix::zeros(n, n),
            scratch: DMatrix::zeros(n, n),
            hbuf: DMatrix::zeros(n, n),
        }
    }
}

/// `dst = y + a * x`, elementwise.
fn set_axpy(dst: &mut DMatrix<Complex64>, a: f64, x: &DMatrix<Complex64>, y: &DMatrix<Complex64>) {
    let d = dst.as_mut_slice();
    let xs = x.as_slice();
    let ys = y.as_slice();
    for k in 0..d.len() {
        d[k] = ys[k] + xs[k] * a;
    }
}

fn eval_hamiltonian<F>(
    supplier: &mut F,
    t: f64,
    step: usize,
    hbuf: &mut DMatrix<Complex64>,
) -> Result<()>
where
    F: FnMut(f64, &mut DMatrix<Complex64>) -> Result<()>,
{
    hbuf.fill(Complex64::new(0.0, 0.0));
    supplier(t, hbuf)?;
    let dev = hermiticity_deviation(hbuf);
    if dev > HERMITICITY_TOL {
        return Err(CoreError::numerical_at(
            step,
            format!("supplied Hamiltonian at t = {t} deviates from Hermitian by {dev:.3e}"),
        ));
    }
    Ok(())
}

fn check_and_record(
    reg: &Arc<ModeRegister>,
    rho: &DMatrix<Complex64>,
    t: f64,
    step: usize,
    trace_tol: f64,
    times: &mut Vec<f64>,
    states: &mut Vec<DensityMatrix>,
    trace_errors: &mut Vec<f64>,
) -> Result<()> {
    let herm = hermiticity_deviation(rho);
    if herm > HERMITICITY_TOL {
        return Err(CoreError::numerical_at(
            step,
            format!("state Hermiticity deviation {herm:.3e} exceeds {HERMITICITY_TOL:.0e}"),
        ));
    }
    let trace_err = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
    if trace_err > trace_tol {
        return Err(CoreError::numerical_at(
            step,
            format!("trace drift {trace_err:.3e} exceeds {trace_tol:.0e}"),
        ));
    }
    let min_eig = min_eigenvalue(rho);
    if min_eig < EIGENVALUE_FLOOR {
        return Err(CoreError::numerical_at(
            step,
            format!("smallest eigenvalue {min_eig:.3e} is below {EIGENVALUE_FLOOR:.0e}"),
        ));
    }
    times.push(t);
    states.push(DensityMatrix::from_parts_unchecked(reg.clone(), rho.clone()));
    trace_errors.push(trace_err);
    Ok(())
}

/// Steps `rho` across `[t0, t0 + duration]`, appending samples; shared by the
/// public entry point and the schedule runner (which chains segments).
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_master_segment<F>(
    rho: &mut DMatrix<Complex64>,
    supplier: &mut F,
    diss: &DissipatorSet,
    reg: &Arc<ModeRegister>,
    t0: f64,
    duration: f64,
    opts: &EvolveOptions,
    emit_initial: bool,
    step_offset: &mut usize,
    times: &mut Vec<f64>,
    states: &mut Vec<DensityMatrix>,
    trace_errors: &mut Vec<f64>,
) -> Result<()>
where
    F: FnMut(f64, &mut DMatrix<Complex64>) -> Result<()>,
{
    if duration < 0.0 || !duration.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "integration span must be non-negative, got {duration}"
        )));
    }
    if emit_initial {
        check_and_record(
            reg,
            rho,
            t0,
            *step_offset,
            opts.trace_tol,
            times,
            states,
            trace_errors,
        )?;
    }
    if duration == 0.0 {
        return Ok(());
    }

    let n_steps = (duration / opts.dt).ceil().max(1.0) as usize;
    let h = duration / n_steps as f64;
    let stride = (opts.sample_every / h).round().max(1.0) as usize;

    let n = rho.nrows();
    let mut ws = RkWorkspace::new(n);

    for step in 0..n_steps {
        let t = t0 + h * step as f64;
        let global = *step_offset + step;

        eval_hamiltonian(supplier, t, global, &mut ws.hbuf)?;
        master_rhs(&mut ws.k1, rho, &ws.hbuf, diss, &mut ws.scratch);

        eval_hamiltonian(supplier, t + 0.5 * h, global, &mut ws.hbuf)?;
        set_axpy(&mut ws.ytmp, 0.5 * h, &ws.k1, rho);
        master_rhs(&mut ws.k2, &ws.ytmp, &ws.hbuf, diss, &mut ws.scratch);

        set_axpy(&mut ws.ytmp, 0.5 * h, &ws.k2, rho);
        master_rhs(&mut ws.k3, &ws.ytmp, &ws.hbuf, diss, &mut ws.scratch);

        eval_hamiltonian(supplier, t + h, global, &mut ws.hbuf)?;
        set_axpy(&mut ws.ytmp, h, &ws.k3, rho);
        master_rhs(&mut ws.k4, &ws.ytmp, &ws.hbuf, diss, &mut ws.scratch);

        {
            let r = rho.as_mut_slice();
            let k1 = ws.k1.as_slice();
            let k2 = ws.k2.as_slice();
            let k3 = ws.k3.as_slice();
            let k4 = ws.k4.as_slice();
            let h6 = h / 6.0;
            for k in 0..r.len() {
                r[k] += (k1[k] + (k2[k] + k3[k]) * 2.0 + k4[k]) * h6;
            }
        }

        let done = step + 1 == n_steps;
        if (step + 1) % stride == 0 || done {
            let t_next = if done { t0 + duration } else { t + h };
            check_and_record(
                reg,
                rho,
                t_next,
                global + 1,
                opts.trace_tol,
                times,
                states,
                trace_errors,
            )?;
        }
    }
    *step_offset += n_steps;
    Ok(())
}

/// Integrates the Lindblad master equation with a time-dependent Hamiltonian.
///
/// The supplier fills a pre-zeroed buffer with `H(t)` and is re-checked for
/// Hermiticity at every evaluation. Samples are recorded roughly every
/// `opts.sample_every`, always including both endpoints, and each recorded
/// state is checked against the trace, Hermiticity, and positivity
/// invariants; the run aborts with the offending step index otherwise.
pub fn evolve_master<F>(
    rho0: &DensityMatrix,
    mut hamiltonian: F,
    channels: &LindbladChannelSet,
    t_span: (f64, f64),
    opts: &EvolveOptions,
) -> Result<SimulationTrace>
where
    F: FnMut(f64, &mut DMatrix<Complex64>) -> Result<()>,
{
    opts.validate()?;
    let reg = rho0.register().clone();
    let diss = build_dissipators(&reg, channels)?;
    let (t0, t1) = t_span;
    if !(t1 - t0).is_finite() || t1 < t0 {
        return Err(CoreError::InvalidParameter(format!(
            "time span ({t0}, {t1}) is not forward-ordered"
        )));
    }

    let mut rho = rho0.matrix().clone();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut trace_errors = Vec::new();
    let mut step_offset = 0usize;
    integrate_master_segment(
        &mut rho,
        &mut hamiltonian,
        &diss,
        &reg,
        t0,
        t1 - t0,
        opts,
        true,
        &mut step_offset,
        &mut times,
        &mut states,
        &mut trace_errors,
    )?;
    Ok(SimulationTrace {
        reg,
        times,
        states,
        trace_errors,
    })
}

/// [`evolve_master`] with a constant Hamiltonian.
pub fn evolve_master_static(
    rho0: &DensityMatrix,
    hamiltonian: &OperatorMatrix,
    channels: &LindbladChannelSet,
    t_span: (f64, f64),
    opts: &EvolveOptions,
) -> Result<SimulationTrace> {
    if rho0.register().dim() != hamiltonian.register().dim()
        || **rho0.register() != **hamiltonian.register()
    {
        return Err(CoreError::DimensionMismatch(
            "state and Hamiltonian belong to different registers".into(),
        ));
    }
    let h = hamiltonian.matrix().clone();
    evolve_master(
        rho0,
        move |_t, buf: &mut DMatrix<Complex64>| {
            buf.copy_from(&h);
            Ok(())
        },
        channels,
        t_span,
        opts,
    )
}

// ---------------------------------------------------------------------------
// Single-excitation amplitude picture.

fn amp_rhs(
    y: &[Complex64; 4],
    g1: f64,
    g2: f64,
    gnv: f64,
    det: &[f64; 4],
    channels: &LindbladChannelSet,
) -> [Complex64; 4] {
    let i = Complex64::new(0.0, 1.0);
    [
        -i * (det[0] * y[0] + g1 * y[2]) - y[0] * (0.5 * channels.kappa_a),
        -i * (det[1] * y[1] + g2 * y[2] + gnv * y[3]) - y[1] * (0.5 * channels.kappa_b),
        -i * (det[2] * y[2] + g1 * y[0] + g2 * y[1]) - y[2] * (0.5 * channels.gamma_c),
        -i * (det[3] * y[3] + gnv * y[1]) - y[3] * (0.5 * channels.gamma_d),
    ]
}

fn amp_axpy(a: f64, x: &[Complex64; 4], y: &[Complex64; 4]) -> [Complex64; 4] {
    [
        y[0] + x[0] * a,
        y[1] + x[1] * a,
        y[2] + x[2] * a,
        y[3] + x[3] * a,
    ]
}

/// Steps the amplitude equations across one span with time-dependent
/// couplings; shared by [`evolve_amplitudes`] and the schedule runner.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_amplitudes_segment<F>(
    y: &mut [Complex64; 4],
    coupling: &mut F,
    channels: &LindbladChannelSet,
    t0: f64,
    duration: f64,
    opts: &EvolveOptions,
    emit_initial: bool,
    times: &mut Vec<f64>,
    amps: &mut Vec<[Complex64; 4]>,
) -> Result<()>
where
    F: FnMut(f64) -> (f64, f64, f64, [f64; 4]),
{
    if duration < 0.0 || !duration.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "integration span must be non-negative, got {duration}"
        )));
    }
    if emit_initial {
        times.push(t0);
        amps.push(*y);
    }
    if duration == 0.0 {
        return Ok(());
    }
    let n_steps = (duration / opts.dt).ceil().max(1.0) as usize;
    let h = duration / n_steps as f64;
    let stride = (opts.sample_every / h).round().max(1.0) as usize;

    for step in 0..n_steps {
        let t = t0 + h * step as f64;

        let (g1, g2, gnv, det) = coupling(t);
        let k1 = amp_rhs(y, g1, g2, gnv, &det, channels);
        let (g1, g2, gnv, det) = coupling(t + 0.5 * h);
        let k2 = amp_rhs(&amp_axpy(0.5 * h, &k1, y), g1, g2, gnv, &det, channels);
        let k3 = amp_rhs(&amp_axpy(0.5 * h, &k2, y), g1, g2, gnv, &det, channels);
        let (g1, g2, gnv, det) = coupling(t + h);
        let k4 = amp_rhs(&amp_axpy(h, &k3, y), g1, g2, gnv, &det, channels);

        let h6 = h / 6.0;
        for m in 0..4 {
            y[m] += (k1[m] + (k2[m] + k3[m]) * 2.0 + k4[m]) * h6;
        }

        let done = step + 1 == n_steps;
        if (step + 1) % stride == 0 || done {
            times.push(if done { t0 + duration } else { t + h });
            amps.push(*y);
        }
    }
    Ok(())
}

/// Integrates the single-excitation amplitude equations at constant
/// couplings `(g1, g2, gnv)` and zero detunings.
///
/// `alpha0` lists the amplitudes of `(a, b, c, d)`; the vacuum component
/// rides along implicitly and is unaffected by the dynamics. Requires a
/// zero-temperature microwave bath: thermal excitation leaves the
/// single-excitation sector, so `n_th != 0` is rejected.
pub fn evolve_amplitudes(
    alpha0: [Complex64; 4],
    couplings: (f64, f64, f64),
    channels: &LindbladChannelSet,
    t_span: (f64, f64),
    opts: &EvolveOptions,
) -> Result<AmplitudeTrace> {
    opts.validate()?;
    channels.validate()?;
    if channels.n_th != 0.0 {
        return Err(CoreError::InvalidParameter(
            "amplitude picture requires a zero-temperature microwave bath (n_th = 0)".into(),
        ));
    }
    let (t0, t1) = t_span;
    if !(t1 - t0).is_finite() || t1 < t0 {
        return Err(CoreError::InvalidParameter(format!(
            "time span ({t0}, {t1}) is not forward-ordered"
        )));
    }
    let (g1, g2, gnv) = couplings;
    for (name, v) in [("g1", g1), ("g2", g2), ("gnv", gnv)] {
        if !v.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "coupling {name} must be finite"
            )));
        }
    }

    let mut y = alpha0;
    let mut times = Vec::new();
    let mut amps = Vec::new();
    integrate_amplitudes_segment(
        &mut y,
        &mut |_t| (g1, g2, gnv, [0.0; 4]),
        channels,
        t0,
        t1 - t0,
        opts,
        true,
        &mut times,
        &mut amps,
    )?;
    Ok(AmplitudeTrace {
        times,
        amplitudes: amps,
    })
}

// ---------------------------------------------------------------------------
// Bad-cavity reduction.

/// Default ratio `kappa / G` above which the adiabatic elimination of both
/// cavities is considered justified.
pub const BAD_CAVITY_DEFAULT_THRESHOLD: f64 = 20.0;

/// Closed-form two-spin-mode decay model obtained by adiabatically
/// eliminating the optical cavity and the microwave resonator.
///
/// The surviving amplitudes obey `d/dt (c, d) = -A (c, d)` with the real
/// symmetric matrix `A = [[a_cc, a_cd], [a_dc, a_dd]]`.
#[derive(Debug, Clone)]
pub struct ReducedSpinModel {
    pub a_cc: f64,
    pub a_cd: f64,
    pub a_dc: f64,
    pub a_dd: f64,
    /// Eigenvector slopes `nu` solving `a_cd nu^2 + (a_cc - a_dd) nu - a_cd = 0`;
    /// `None` when the cross coupling vanishes and the modes decay separately.
    pub nu_plus: Option<f64>,
    pub nu_minus: Option<f64>,
    /// Decay eigenvalues of `A` (equal to `a_cc` and `a_dd` when decoupled).
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// Whether `kappa_a >= threshold * |G1|` and
    /// `kappa_b >= threshold * max(|G2|, |Gnv|)` both hold.
    pub premise_satisfied: bool,
    /// Orthonormal eigenvectors of `A` in the `(c, d)` basis.
    e_plus: [f64; 2],
    e_minus: [f64; 2],
}

impl ReducedSpinModel {
    /// Spin amplitudes at time `t` from initial amplitudes `(c0, d0)`.
    pub fn amplitudes_at(&self, t: f64, c0: Complex64, d0: Complex64) -> (Complex64, Complex64) {
        let p_plus = c0 * self.e_plus[0] + d0 * self.e_plus[1];
        let p_minus = c0 * self.e_minus[0] + d0 * self.e_minus[1];
        let w_plus = p_plus * (-self.mu_plus * t).exp();
        let w_minus = p_minus * (-self.mu_minus * t).exp();
        (
            w_plus * self.e_plus[0] + w_minus * self.e_minus[0],
            w_plus * self.e_plus[1] + w_minus * self.e_minus[1],
        )
    }

    /// `|c(t)|^2` and `|d(t)|^2` for a unit excitation starting in `c`.
    pub fn populations_from_c(&self, t: f64) -> (f64, f64) {
        let (c, d) = self.amplitudes_at(t, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        (c.norm_sqr(), d.norm_sqr())
    }
}

/// Bad-cavity reduction with the default premise threshold.
pub fn bad_cavity_reduce(
    g1: f64,
    g2: f64,
    gnv: f64,
    channels: &LindbladChannelSet,
) -> Result<ReducedSpinModel> {
    bad_cavity_reduce_with_threshold(g1, g2, gnv, channels, BAD_CAVITY_DEFAULT_THRESHOLD)
}

/// Bad-cavity reduction, flagging (not rejecting) parameter sets where the
/// cavities are not fast enough for the elimination to be trustworthy.
pub fn bad_cavity_reduce_with_threshold(
    g1: f64,
    g2: f64,
    gnv: f64,
    channels: &LindbladChannelSet,
    threshold: f64,
) -> Result<ReducedSpinModel> {
    channels.validate()?;
    for (name, v) in [("g1", g1), ("g2", g2), ("gnv", gnv)] {
        if !v.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "coupling {name} must be finite"
            )));
        }
    }
    if channels.kappa_a <= 0.0 || channels.kappa_b <= 0.0 {
        return Err(CoreError::InvalidParameter(
            "bad-cavity reduction needs kappa_a > 0 and kappa_b > 0".into(),
        ));
    }
    if channels.n_th != 0.0 {
        return Err(CoreError::InvalidParameter(
            "bad-cavity reduction assumes a zero-temperature microwave bath".into(),
        ));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(CoreError::InvalidParameter(
            "premise threshold must be positive".into(),
        ));
    }

    let a_cc = 2.0 * g1 * g1 / channels.kappa_a
        + 2.0 * g2 * g2 / channels.kappa_b
        + channels.gamma_c / 2.0;
    let a_dd = 2.0 * gnv * gnv / channels.kappa_b + channels.gamma_d / 2.0;
    let a_cd = 2.0 * g2 * gnv / channels.kappa_b;

    let premise_satisfied = channels.kappa_a >= threshold * g1.abs()
        && channels.kappa_b >= threshold * g2.abs().max(gnv.abs());

    if a_cd == 0.0 {
        return Ok(ReducedSpinModel {
            a_cc,
            a_cd,
            a_dc: a_cd,
            a_dd,
            nu_plus: None,
            nu_minus: None,
            mu_plus: a_cc,
            mu_minus: a_dd,
            premise_satisfied,
            e_plus: [1.0, 0.0],
            e_minus: [0.0, 1.0],
        });
    }

    let disc = ((a_cc - a_dd).powi(2) + 4.0 * a_cd * a_cd).sqrt();
    let nu_plus = ((a_dd - a_cc) + disc) / (2.0 * a_cd);
    let nu_minus = ((a_dd - a_cc) - disc) / (2.0 * a_cd);
    let mu_plus = a_cc + a_cd * nu_plus;
    let mu_minus = a_cc + a_cd * nu_minus;
    let norm_plus = (1.0 + nu_plus * nu_plus).sqrt();
    let norm_minus = (1.0 + nu_minus * nu_minus).sqrt();

    Ok(ReducedSpinModel {
        a_cc,
        a_cd,
        a_dc: a_cd,
        a_dd,
        nu_plus: Some(nu_plus),
        nu_minus: Some(nu_minus),
        mu_plus,
        mu_minus,
        premise_satisfied,
        e_plus: [1.0 / norm_plus, nu_plus / norm_plus],
        e_minus: [1.0 / norm_minus, nu_minus / norm_minus],
    })
}
