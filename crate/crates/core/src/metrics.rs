//! Observables: populations, Uhlmann fidelity, Wootters concurrence,
//! transfer efficiency, and heralded entanglement rates.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::hilbert::{partial_trace, DensityMatrix};
use crate::lindblad::SimulationTrace;
use crate::{CoreError, Result};

/// What a [`MetricSeries`] is measuring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Population,
    Fidelity,
    Concurrence,
    TraceError,
}

/// A sampled scalar observable in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct MetricSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: MetricKind,
    /// Mode labels the observable refers to (one for populations, two for
    /// concurrence, empty when not mode-specific).
    pub modes: Vec<String>,
}

impl MetricSeries {
    pub fn peak(&self) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for (&t, &v) in self.times.iter().zip(&self.values) {
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((t, v));
            }
        }
        best
    }

    pub fn final_value(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// Allowed numerical undershoot/overshoot before a metric value is an error
/// rather than round-off.
pub const METRIC_CLAMP_TOL: f64 = 1e-9;

/// Snaps round-off just outside `[0, 1]` back onto the interval and rejects
/// anything worse.
pub fn clamp_metric(value: f64, what: &str) -> Result<f64> {
    if value.is_nan() {
        return Err(CoreError::numerical(format!("{what} evaluated to NaN")));
    }
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else if value < 0.0 && value >= -METRIC_CLAMP_TOL {
        Ok(0.0)
    } else if value > 1.0 && value <= 1.0 + METRIC_CLAMP_TOL {
        Ok(1.0)
    } else {
        Err(CoreError::numerical(format!(
            "{what} = {value} lies outside [0, 1] beyond tolerance {METRIC_CLAMP_TOL:.0e}"
        )))
    }
}

/// Mean occupation of one labelled mode over a sampled trajectory.
pub fn mode_population(trace: &SimulationTrace, mode: &str) -> Result<MetricSeries> {
    // Resolve the label once so unknown modes fail before any work.
    trace.register().index_of(mode)?;
    let mut values = Vec::with_capacity(trace.len());
    for state in trace.states() {
        values.push(state.mode_occupation(mode)?);
    }
    Ok(MetricSeries {
        times: trace.times().to_vec(),
        values,
        kind: MetricKind::Population,
        modes: vec![mode.to_string()],
    })
}

/// Final population of the transfer target; the efficiency of a Fock-state
/// transfer protocol.
pub fn transfer_efficiency(trace: &SimulationTrace, mode: &str) -> Result<f64> {
    let final_pop = trace.final_state().mode_occupation(mode)?;
    clamp_metric(final_pop, "transfer efficiency")
}

/// Hermitian square root of a positive-semidefinite matrix; eigenvalues
/// inside the validation tolerance below zero are clipped to zero.
/// Numerical-rank cut for PSD eigenvalues: anything at or below
/// `n * eps * lam_max` is eigensolver noise on a rank-deficient input.
/// Without the cut such noise enters square-root sums as `sqrt(eps) ~ 1e-8`
/// per spurious eigenvalue, which is what would limit the accuracy of
/// fidelities between (near-)pure states.
fn rank_floor(eigenvalues: &nalgebra::DVector<f64>) -> f64 {
    let lam_max = eigenvalues.iter().cloned().fold(0.0, f64::max);
    lam_max * eigenvalues.len() as f64 * f64::EPSILON
}

fn sqrt_psd(mat: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let sym = (mat + mat.adjoint()).map(|x| x * 0.5);
    let eig = sym.symmetric_eigen();
    let n = mat.nrows();
    let floor = rank_floor(&eig.eigenvalues);
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        if eig.eigenvalues[k] <= floor {
            continue;
        }
        let lam = eig.eigenvalues[k].sqrt();
        let v = eig.eigenvectors.column(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += v[i] * v[j].conj() * lam;
            }
        }
    }
    out
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2` between two
/// states on the same space.
pub fn transfer_fidelity(rho: &DensityMatrix, ideal: &DensityMatrix) -> Result<f64> {
    if rho.register().dim() != ideal.register().dim() || **rho.register() != **ideal.register() {
        return Err(CoreError::DimensionMismatch(
            "fidelity arguments belong to different registers".into(),
        ));
    }
    rho.validate()?;
    ideal.validate()?;

    let s = sqrt_psd(rho.matrix());
    let inner = &s * ideal.matrix() * &s;
    let sym = (&inner + inner.adjoint()).map(|x| x * 0.5);
    let eig = sym.symmetric_eigen();
    let floor = rank_floor(&eig.eigenvalues);
    let root_sum: f64 = eig
        .eigenvalues
        .iter()
        .map(|&lam| if lam > floor { lam.sqrt() } else { 0.0 })
        .sum();
    clamp_metric(root_sum * root_sum, "fidelity")
}

/// Reduces `rho` to the ordered mode pair and, where a mode is truncated
/// above two levels, projects it onto its lowest two; leakage above 1e-6 is
/// an error. Returns the renormalised two-qubit matrix.
fn two_qubit_reduction(rho: &DensityMatrix, mode_x: &str, mode_y: &str) -> Result<DMatrix<Complex64>> {
    if mode_x == mode_y {
        return Err(CoreError::InvalidParameter(
            "concurrence needs two distinct modes".into(),
        ));
    }
    let pair = partial_trace(rho, &[mode_x, mode_y])?;
    let reg = pair.register().clone();
    let (dx, dy) = (reg.mode_dim(0), reg.mode_dim(1));
    if dx == 2 && dy == 2 {
        return Ok(pair.matrix().clone());
    }
    // Project onto the {0,1} x {0,1} block.
    let mut out = DMatrix::zeros(4, 4);
    let mut kept_weight = 0.0;
    let map = |nx: usize, ny: usize| nx * dy + ny;
    for nx in 0..2 {
        for ny in 0..2 {
            kept_weight += pair.matrix()[(map(nx, ny), map(nx, ny))].re;
            for mx in 0..2 {
                for my in 0..2 {
                    out[(nx * 2 + ny, mx * 2 + my)] = pair.matrix()[(map(nx, ny), map(mx, my))];
                }
            }
        }
    }
    let leakage = 1.0 - kept_weight;
    if leakage > 1e-6 {
        return Err(CoreError::InvalidState(format!(
            "population {leakage:.3e} outside the qubit subspace of ({mode_x}, {mode_y}) exceeds 1e-6"
        )));
    }
    if kept_weight > 0.0 {
        out /= Complex64::new(kept_weight, 0.0);
    }
    Ok(out)
}

/// Wootters concurrence of the reduced state of two modes.
///
/// `C = max(0, l1 - l2 - l3 - l4)` where `l_i` are the decreasing square
/// roots of the eigenvalues of `rho (sy x sy) rho* (sy x sy)`, evaluated
/// through a Hermitian similarity so the eigenproblem stays well-behaved.
pub fn concurrence(rho: &DensityMatrix, mode_x: &str, mode_y: &str) -> Result<f64> {
    let q = two_qubit_reduction(rho, mode_x, mode_y)?;

    // sigma_y (x) sigma_y is real: antidiagonal (-1, 1, 1, -1).
    let mut yy = DMatrix::zeros(4, 4);
    yy[(0, 3)] = Complex64::new(-1.0, 0.0);
    yy[(1, 2)] = Complex64::new(1.0, 0.0);
    yy[(2, 1)] = Complex64::new(1.0, 0.0);
    yy[(3, 0)] = Complex64::new(-1.0, 0.0);

    let spun = &yy * q.map(|z| z.conj()) * &yy;
    // Same nonzero spectrum as rho * spun, but Hermitian and PSD.
    let s = sqrt_psd(&q);
    let m = &s * spun * &s;
    let sym = (&m + m.adjoint()).map(|x| x * 0.5);
    let eig = sym.symmetric_eigen();
    let mut lams: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&lam| lam.max(0.0).sqrt())
        .collect();
    lams.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let c = lams[0] - lams[1] - lams[2] - lams[3];
    clamp_metric(c.max(0.0), "concurrence")
}

/// Concurrence between two modes at every sample of a trajectory.
pub fn concurrence_series(
    trace: &SimulationTrace,
    mode_x: &str,
    mode_y: &str,
) -> Result<MetricSeries> {
    let mut values = Vec::with_capacity(trace.len());
    for state in trace.states() {
        values.push(concurrence(state, mode_x, mode_y)?);
    }
    Ok(MetricSeries {
        times: trace.times().to_vec(),
        values,
        kind: MetricKind::Concurrence,
        modes: vec![mode_x.to_string(), mode_y.to_string()],
    })
}

/// Rate of successfully heralded entanglement attempts: a single-click model
/// where each attempt succeeds with probability `p_det`.
pub fn heralded_rate(attempt_rate: f64, p_det: f64) -> Result<f64> {
    if !attempt_rate.is_finite() || attempt_rate < 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "attempt rate must be finite and non-negative, got {attempt_rate}"
        )));
    }
    if !(0.0..=1.0).contains(&p_det) {
        return Err(CoreError::InvalidParameter(format!(
            "detection probability must lie in [0, 1], got {p_det}"
        )));
    }
    Ok(attempt_rate * p_det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{basis_state, make_register, pure_state, DensityMatrix};
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit_pair() -> std::sync::Arc<crate::hilbert::ModeRegister> {
        make_register(&[("a", 2), ("d", 2)]).unwrap()
    }

    #[test]
    fn fidelity_of_identical_states_is_one() {
        let reg = make_register(&[("d", 2)]).unwrap();
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.7, 0.0);
        m[(1, 1)] = c(0.3, 0.0);
        m[(0, 1)] = c(0.2, 0.1);
        m[(1, 0)] = c(0.2, -0.1);
        let rho = DensityMatrix::new(reg, m).unwrap();
        let f = transfer_fidelity(&rho, &rho).unwrap();
        assert!((f - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fidelity_of_orthogonal_pure_states_is_zero() {
        let reg = make_register(&[("d", 2)]).unwrap();
        let zero = basis_state(&reg, &[0]).unwrap();
        let one = basis_state(&reg, &[1]).unwrap();
        let f = transfer_fidelity(&zero, &one).unwrap();
        assert!(f.abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_maximally_mixed_and_pure_is_half() {
        let reg = make_register(&[("d", 2)]).unwrap();
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.5, 0.0);
        m[(1, 1)] = c(0.5, 0.0);
        let mixed = DensityMatrix::new(reg.clone(), m).unwrap();
        let pure = basis_state(&reg, &[1]).unwrap();
        let f = transfer_fidelity(&mixed, &pure).unwrap();
        assert!((f - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fidelity_of_pure_states_is_the_overlap() {
        let reg = make_register(&[("d", 2)]).unwrap();
        let psi = pure_state(&reg, &[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let phi = pure_state(&reg, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let f = transfer_fidelity(&psi, &phi).unwrap();
        assert!((f - 0.36).abs() < 1e-10);
    }

    #[test]
    fn fidelity_is_symmetric_here_too() {
        let reg = make_register(&[("d", 2)]).unwrap();
        let mut m1 = DMatrix::zeros(2, 2);
        m1[(0, 0)] = c(0.8, 0.0);
        m1[(1, 1)] = c(0.2, 0.0);
        m1[(0, 1)] = c(0.1, 0.25);
        m1[(1, 0)] = c(0.1, -0.25);
        let mut m2 = DMatrix::zeros(2, 2);
        m2[(0, 0)] = c(0.35, 0.0);
        m2[(1, 1)] = c(0.65, 0.0);
        m2[(0, 1)] = c(-0.2, 0.05);
        m2[(1, 0)] = c(-0.2, -0.05);
        let rho = DensityMatrix::new(reg.clone(), m1).unwrap();
        let sig = DensityMatrix::new(reg, m2).unwrap();
        let f12 = transfer_fidelity(&rho, &sig).unwrap();
        let f21 = transfer_fidelity(&sig, &rho).unwrap();
        assert!((f12 - f21).abs() < 1e-10);
    }

    #[test]
    fn concurrence_of_bell_state_is_one() {
        let reg = qubit_pair();
        let inv = 1.0 / 2.0f64.sqrt();
        let rho = pure_state(&reg, &[c(0.0, 0.0), c(inv, 0.0), c(inv, 0.0), c(0.0, 0.0)]).unwrap();
        let conc = concurrence(&rho, "a", "d").unwrap();
        assert!((conc - 1.0).abs() < 1e-10);
    }

    #[test]
    fn concurrence_of_product_states_is_zero() {
        let reg = qubit_pair();
        let rho = basis_state(&reg, &[1, 0]).unwrap();
        assert!(concurrence(&rho, "a", "d").unwrap() < 1e-12);

        // Uncorrelated mixed marginals are separable too.
        let mut m = DMatrix::zeros(4, 4);
        for k in 0..4 {
            m[(k, k)] = c(0.25, 0.0);
        }
        let mixed = DensityMatrix::new(reg.clone(), m).unwrap();
        assert!(concurrence(&mixed, "a", "d").unwrap() < 1e-12);
    }

    #[test]
    fn concurrence_of_vacuum_mixed_pair_follows_the_coherence() {
        // rho = p |00><00| + (1-p) |psi><psi|, psi = x|01> + y|10>:
        // concurrence is exactly 2 (1-p) |x y|.
        let reg = qubit_pair();
        let (p, x, y) = (0.3, 0.6, 0.8);
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = c(p, 0.0);
        m[(1, 1)] = c((1.0 - p) * x * x, 0.0);
        m[(2, 2)] = c((1.0 - p) * y * y, 0.0);
        m[(1, 2)] = c((1.0 - p) * x * y, 0.0);
        m[(2, 1)] = c((1.0 - p) * x * y, 0.0);
        let rho = DensityMatrix::new(reg, m).unwrap();
        let conc = concurrence(&rho, "a", "d").unwrap();
        assert!((conc - 2.0 * (1.0 - p) * x * y).abs() < 1e-10, "got {conc}");
    }

    #[test]
    fn concurrence_reduces_from_larger_registers() {
        // Bell pair between a and d inside the four-mode register.
        let reg = make_register(&[("a", 2), ("b", 2), ("c", 2), ("d", 2)]).unwrap();
        let inv = 1.0 / 2.0f64.sqrt();
        let mut amps = vec![c(0.0, 0.0); 16];
        amps[8] = c(inv, 0.0); // |1000>
        amps[1] = c(0.0, inv); // i|0001>
        let rho = pure_state(&reg, &amps).unwrap();
        let conc = concurrence(&rho, "a", "d").unwrap();
        assert!((conc - 1.0).abs() < 1e-10);
    }

    #[test]
    fn concurrence_truncates_oversized_modes_when_leakage_is_tiny() {
        let reg = make_register(&[("a", 3), ("d", 2)]).unwrap();
        let inv = 1.0 / 2.0f64.sqrt();
        // No population on |2>_a at all.
        let mut amps = vec![c(0.0, 0.0); 6];
        amps[1] = c(inv, 0.0); // |0>_a |1>_d
        amps[2] = c(inv, 0.0); // |1>_a |0>_d
        let rho = pure_state(&reg, &amps).unwrap();
        let conc = concurrence(&rho, "a", "d").unwrap();
        assert!((conc - 1.0).abs() < 1e-10);

        // Now with visible leakage onto |2>_a.
        let mut leaky = vec![c(0.0, 0.0); 6];
        leaky[1] = c(0.7, 0.0);
        leaky[2] = c(0.7, 0.0);
        leaky[4] = c((1.0f64 - 0.98).sqrt(), 0.0); // |2>_a |0>_d
        let rho = pure_state(&reg, &leaky).unwrap();
        assert!(concurrence(&rho, "a", "d").is_err());
    }

    #[test]
    fn heralded_rate_multiplies_through() {
        assert_eq!(heralded_rate(1.0e6, 1.0e-4).unwrap(), 100.0);
        assert_eq!(heralded_rate(1.0e6, 0.0).unwrap(), 0.0);
        assert_eq!(heralded_rate(1.0e6, 1.0).unwrap(), 1.0e6);
        assert!(heralded_rate(1.0e6, 1.5).is_err());
        assert!(heralded_rate(1.0e6, -0.1).is_err());
        assert!(heralded_rate(-1.0, 0.5).is_err());
    }

    #[test]
    fn clamping_snaps_roundoff_and_rejects_worse() {
        assert_eq!(clamp_metric(-5e-10, "x").unwrap(), 0.0);
        assert_eq!(clamp_metric(1.0 + 5e-10, "x").unwrap(), 1.0);
        assert_eq!(clamp_metric(0.5, "x").unwrap(), 0.5);
        assert!(clamp_metric(-1e-8, "x").is_err());
        assert!(clamp_metric(1.1, "x").is_err());
        assert!(clamp_metric(f64::NAN, "x").is_err());
    }

    #[test]
    fn population_series_tracks_a_simple_decay() {
        use crate::hilbert::OperatorMatrix;
        use crate::lindblad::{evolve_master_static, EvolveOptions, LindbladChannelSet};
        let reg = make_register(&[("a", 2)]).unwrap();
        let rho0 = basis_state(&reg, &[1]).unwrap();
        let h = OperatorMatrix::zeros(reg.clone());
        let channels = LindbladChannelSet {
            kappa_a: 1.0,
            ..LindbladChannelSet::lossless()
        };
        let trace =
            evolve_master_static(&rho0, &h, &channels, (0.0, 1.0), &EvolveOptions::default())
                .unwrap();
        let series = mode_population(&trace, "a").unwrap();
        assert_eq!(series.values.len(), trace.len());
        assert!((series.values[0] - 1.0).abs() < 1e-12);
        let (peak_t, peak_v) = series.peak().unwrap();
        assert_eq!(peak_t, 0.0);
        assert!((peak_v - 1.0).abs() < 1e-12);
        assert!((series.final_value().unwrap() - (-1.0f64).exp()).abs() < 1e-6);
        assert!((transfer_efficiency(&trace, "a").unwrap() - (-1.0f64).exp()).abs() < 1e-6);
        assert!(mode_population(&trace, "zz").is_err());
    }
}
