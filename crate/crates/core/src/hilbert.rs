//! Composite Hilbert spaces of truncated bosonic modes.
//!
//! A [`ModeRegister`] fixes the tensor-factor ordering once and for all;
//! operators and density matrices carry a shared reference back to their
//! register, so dimension or ordering mistakes are caught at construction
//! time rather than deep inside an integrator loop.
//!
//! Basis indexing is row-major over the declared mode order: for dimensions
//! `(d0, d1, ..)` the stride of mode 0 is `d1*d2*..`, and the basis index of
//! occupations `(n0, n1, ..)` is `sum_k n_k * stride_k`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{CoreError, Result};

/// Ceiling on the composite dimension unless a caller raises it explicitly.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Tolerance on `max |rho - rho^dagger|` for a valid density matrix.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance on `|tr(rho) - 1|` for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-8;
/// The smallest eigenvalue of a valid density matrix may not sink below this.
pub const EIGENVALUE_FLOOR: f64 = -1e-8;

/// An ordered collection of labelled, truncated modes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeRegister {
    modes: Vec<(String, usize)>,
    strides: Vec<usize>,
    dim: usize,
}

impl ModeRegister {
    /// Builds a register with the default composite-dimension cap.
    pub fn new<S: AsRef<str>>(specs: &[(S, usize)]) -> Result<Self> {
        Self::with_cap(specs, DEFAULT_DIM_CAP)
    }

    /// Builds a register, rejecting composite dimensions above `cap`.
    pub fn with_cap<S: AsRef<str>>(specs: &[(S, usize)], cap: usize) -> Result<Self> {
        if specs.is_empty() {
            return Err(CoreError::InvalidRegister(
                "register needs at least one mode".into(),
            ));
        }
        let mut modes = Vec::with_capacity(specs.len());
        for (label, dim) in specs {
            let label = label.as_ref();
            if *dim < 2 {
                return Err(CoreError::InvalidRegister(format!(
                    "mode '{label}' has dimension {dim}; every mode needs at least two levels"
                )));
            }
            if modes.iter().any(|(l, _)| l == label) {
                return Err(CoreError::InvalidRegister(format!(
                    "duplicate mode label '{label}'"
                )));
            }
            modes.push((label.to_string(), *dim));
        }
        let mut dim: usize = 1;
        for (label, d) in &modes {
            dim = dim.checked_mul(*d).ok_or_else(|| {
                CoreError::InvalidRegister(format!("dimension overflow at mode '{label}'"))
            })?;
            if dim > cap {
                return Err(CoreError::InvalidRegister(format!(
                    "composite dimension exceeds cap {cap}"
                )));
            }
        }
        let mut strides = vec![1usize; modes.len()];
        for k in (0..modes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * modes[k + 1].1;
        }
        Ok(ModeRegister { modes, strides, dim })
    }

    /// Total composite dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of modes.
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.modes.iter().map(|(l, _)| l.as_str())
    }

    pub fn mode_dim(&self, mode: usize) -> usize {
        self.modes[mode].1
    }

    pub fn label(&self, mode: usize) -> &str {
        &self.modes[mode].0
    }

    /// Position of a labelled mode in the declared order.
    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| CoreError::InvalidRegister(format!("no mode labelled '{label}'")))
    }

    pub fn has_mode(&self, label: &str) -> bool {
        self.modes.iter().any(|(l, _)| l == label)
    }

    /// Occupation of `mode` in the computational basis state `basis`.
    pub fn occupation_of(&self, basis: usize, mode: usize) -> usize {
        (basis / self.strides[mode]) % self.modes[mode].1
    }

    /// Basis index of a full occupation listing, checked against truncations.
    pub fn basis_index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes.len() {
            return Err(CoreError::InvalidState(format!(
                "expected {} occupations, got {}",
                self.modes.len(),
                occupations.len()
            )));
        }
        let mut idx = 0usize;
        for (k, &n) in occupations.iter().enumerate() {
            if n >= self.modes[k].1 {
                return Err(CoreError::InvalidState(format!(
                    "occupation {n} exceeds truncation of mode '{}' (dim {})",
                    self.modes[k].0, self.modes[k].1
                )));
            }
            idx += n * self.strides[k];
        }
        Ok(idx)
    }
}

/// Convenience constructor used throughout the crate and by the CLI.
pub fn make_register<S: AsRef<str>>(specs: &[(S, usize)]) -> Result<Arc<ModeRegister>> {
    Ok(Arc::new(ModeRegister::new(specs)?))
}

/// A dense operator tied to a specific register.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    reg: Arc<ModeRegister>,
    mat: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn new(reg: Arc<ModeRegister>, mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != reg.dim() || mat.ncols() != reg.dim() {
            return Err(CoreError::DimensionMismatch(format!(
                "operator is {}x{} but the register dimension is {}",
                mat.nrows(),
                mat.ncols(),
                reg.dim()
            )));
        }
        Ok(OperatorMatrix { reg, mat })
    }

    pub fn zeros(reg: Arc<ModeRegister>) -> Self {
        let d = reg.dim();
        OperatorMatrix {
            reg,
            mat: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(reg: Arc<ModeRegister>) -> Self {
        let d = reg.dim();
        OperatorMatrix {
            reg,
            mat: DMatrix::identity(d, d),
        }
    }

    pub fn register(&self) -> &Arc<ModeRegister> {
        &self.reg
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn dagger(&self) -> OperatorMatrix {
        OperatorMatrix {
            reg: self.reg.clone(),
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> OperatorMatrix {
        OperatorMatrix {
            reg: self.reg.clone(),
            mat: self.mat.map(|x| x * factor),
        }
    }

    fn check_same_register(&self, other: &OperatorMatrix) -> Result<()> {
        if !Arc::ptr_eq(&self.reg, &other.reg) && self.reg != other.reg {
            return Err(CoreError::DimensionMismatch(
                "operators belong to different registers".into(),
            ));
        }
        Ok(())
    }

    pub fn mul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_same_register(other)?;
        Ok(OperatorMatrix {
            reg: self.reg.clone(),
            mat: &self.mat * &other.mat,
        })
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_same_register(other)?;
        Ok(OperatorMatrix {
            reg: self.reg.clone(),
            mat: &self.mat + &other.mat,
        })
    }

    /// `self + factor * other`, reusing the register handle.
    pub fn add_scaled(&self, factor: Complex64, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_same_register(other)?;
        let mut mat = self.mat.clone();
        mat.zip_apply(&other.mat, |x, y| *x += factor * y);
        Ok(OperatorMatrix { reg: self.reg.clone(), mat })
    }

    /// `self + self^dagger`, handy when assembling `X + h.c.` Hamiltonians.
    pub fn plus_hc(&self) -> OperatorMatrix {
        OperatorMatrix {
            reg: self.reg.clone(),
            mat: &self.mat + self.mat.adjoint(),
        }
    }
}

/// Embeds a single-mode operator at the tensor slot of `label`, identity on
/// every other mode.
pub fn embed_local(
    reg: &Arc<ModeRegister>,
    label: &str,
    local: &DMatrix<Complex64>,
) -> Result<OperatorMatrix> {
    let mode = reg.index_of(label)?;
    let d = reg.mode_dim(mode);
    if local.nrows() != d || local.ncols() != d {
        return Err(CoreError::DimensionMismatch(format!(
            "local operator is {}x{} but mode '{label}' has dimension {d}",
            local.nrows(),
            local.ncols()
        )));
    }
    let n = reg.dim();
    let stride = reg.strides[mode];
    let mut mat = DMatrix::zeros(n, n);
    for col in 0..n {
        let q = reg.occupation_of(col, mode);
        // Base index with the occupation of `mode` zeroed out.
        let base = col - q * stride;
        for p in 0..d {
            let v = local[(p, q)];
            if v != Complex64::new(0.0, 0.0) {
                mat[(base + p * stride, col)] = v;
            }
        }
    }
    Ok(OperatorMatrix { reg: reg.clone(), mat })
}

/// Annihilation operator of a labelled mode, truncated at its dimension.
pub fn annihilation_op(reg: &Arc<ModeRegister>, label: &str) -> Result<OperatorMatrix> {
    let mode = reg.index_of(label)?;
    let d = reg.mode_dim(mode);
    let mut local = DMatrix::zeros(d, d);
    for n in 1..d {
        local[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    embed_local(reg, label, &local)
}

/// Number operator of a labelled mode.
pub fn number_op(reg: &Arc<ModeRegister>, label: &str) -> Result<OperatorMatrix> {
    let mode = reg.index_of(label)?;
    let d = reg.mode_dim(mode);
    let mut local = DMatrix::zeros(d, d);
    for n in 0..d {
        local[(n, n)] = Complex64::new(n as f64, 0.0);
    }
    embed_local(reg, label, &local)
}

/// A validated density matrix on a register.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    reg: Arc<ModeRegister>,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, and positivity before accepting.
    pub fn new(reg: Arc<ModeRegister>, mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != reg.dim() || mat.ncols() != reg.dim() {
            return Err(CoreError::DimensionMismatch(format!(
                "state is {}x{} but the register dimension is {}",
                mat.nrows(),
                mat.ncols(),
                reg.dim()
            )));
        }
        let state = DensityMatrix { reg, mat };
        state.validate()?;
        Ok(state)
    }

    /// Builds `|psi><psi|` from a full-space amplitude vector.
    pub fn from_pure(reg: Arc<ModeRegister>, psi: &DVector<Complex64>) -> Result<Self> {
        if psi.len() != reg.dim() {
            return Err(CoreError::DimensionMismatch(format!(
                "amplitude vector has length {} but the register dimension is {}",
                psi.len(),
                reg.dim()
            )));
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(CoreError::InvalidState(format!(
                "amplitude vector norm {norm} deviates from 1 by more than 1e-10"
            )));
        }
        let mat = psi * psi.adjoint();
        Ok(DensityMatrix { reg, mat })
    }

    /// Skips validation; for integrator internals that re-check at sampling.
    pub(crate) fn from_parts_unchecked(reg: Arc<ModeRegister>, mat: DMatrix<Complex64>) -> Self {
        DensityMatrix { reg, mat }
    }

    pub fn register(&self) -> &Arc<ModeRegister> {
        &self.reg
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// Re-checks the density-matrix invariants on the current data.
    pub fn validate(&self) -> Result<()> {
        let herm = hermiticity_deviation(&self.mat);
        if herm > HERMITICITY_TOL {
            return Err(CoreError::InvalidState(format!(
                "Hermiticity deviation {herm:.3e} exceeds {HERMITICITY_TOL:.0e}"
            )));
        }
        let tr = self.mat.trace();
        let tr_err = (tr - Complex64::new(1.0, 0.0)).norm();
        if tr_err > TRACE_TOL {
            return Err(CoreError::InvalidState(format!(
                "trace deviates from 1 by {tr_err:.3e} (tolerance {TRACE_TOL:.0e})"
            )));
        }
        let min_eig = min_eigenvalue(&self.mat);
        if min_eig < EIGENVALUE_FLOOR {
            return Err(CoreError::InvalidState(format!(
                "smallest eigenvalue {min_eig:.3e} is below {EIGENVALUE_FLOOR:.0e}"
            )));
        }
        Ok(())
    }

    /// `tr(rho^2)`, equal to 1 for pure states.
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.mat.nrows() {
            for j in 0..self.mat.ncols() {
                acc += (self.mat[(i, j)] * self.mat[(j, i)]).re;
            }
        }
        acc
    }

    /// Expectation value of a (register-compatible) operator.
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<Complex64> {
        if self.reg.dim() != op.register().dim() || *self.reg != **op.register() {
            return Err(CoreError::DimensionMismatch(
                "operator and state belong to different registers".into(),
            ));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.mat.nrows() {
            for j in 0..self.mat.ncols() {
                acc += op.matrix()[(i, j)] * self.mat[(j, i)];
            }
        }
        Ok(acc)
    }

    /// Mean occupation of a labelled mode.
    pub fn mode_occupation(&self, label: &str) -> Result<f64> {
        let mode = self.reg.index_of(label)?;
        let mut acc = 0.0;
        for i in 0..self.reg.dim() {
            acc += self.mat[(i, i)].re * self.reg.occupation_of(i, mode) as f64;
        }
        Ok(acc)
    }
}

pub(crate) fn hermiticity_deviation(mat: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..mat.nrows() {
        for j in i..mat.ncols() {
            let dev = (mat[(i, j)] - mat[(j, i)].conj()).norm();
            if dev > worst {
                worst = dev;
            }
        }
    }
    worst
}

/// Smallest eigenvalue of a Hermitian matrix (symmetrised first so that
/// round-off in the input cannot trip the eigensolver).
pub(crate) fn min_eigenvalue(mat: &DMatrix<Complex64>) -> f64 {
    let herm = (mat + mat.adjoint()).map(|x| x * 0.5);
    let eig = herm.symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `|n0, n1, ..><n0, n1, ..|` for the given occupation listing.
pub fn basis_state(reg: &Arc<ModeRegister>, occupations: &[usize]) -> Result<DensityMatrix> {
    let idx = reg.basis_index(occupations)?;
    let mut psi = DVector::zeros(reg.dim());
    psi[idx] = Complex64::new(1.0, 0.0);
    DensityMatrix::from_pure(reg.clone(), &psi)
}

/// Pure state from a full-space amplitude listing (normalised to 1e-10).
pub fn pure_state(reg: &Arc<ModeRegister>, amplitudes: &[Complex64]) -> Result<DensityMatrix> {
    if amplitudes.len() != reg.dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "expected {} amplitudes, got {}",
            reg.dim(),
            amplitudes.len()
        )));
    }
    let psi = DVector::from_column_slice(amplitudes);
    DensityMatrix::from_pure(reg.clone(), &psi)
}

/// Pure state with one labelled mode in a superposition of its Fock levels
/// and every other mode in vacuum.
pub fn mode_superposition_state(
    reg: &Arc<ModeRegister>,
    label: &str,
    amplitudes: &[Complex64],
) -> Result<DensityMatrix> {
    let mode = reg.index_of(label)?;
    if amplitudes.len() > reg.mode_dim(mode) {
        return Err(CoreError::InvalidState(format!(
            "{} amplitudes exceed the dimension {} of mode '{label}'",
            amplitudes.len(),
            reg.mode_dim(mode)
        )));
    }
    let mut psi = DVector::zeros(reg.dim());
    let mut occs = vec![0usize; reg.n_modes()];
    for (n, &amp) in amplitudes.iter().enumerate() {
        occs[mode] = n;
        psi[reg.basis_index(&occs)?] = amp;
    }
    DensityMatrix::from_pure(reg.clone(), &psi)
}

/// Traces out every mode not listed in `keep`, preserving canonical register
/// order of the kept modes regardless of the order given.
pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    let reg = rho.register();
    if keep.is_empty() {
        return Err(CoreError::InvalidRegister(
            "partial trace must keep at least one mode".into(),
        ));
    }
    let mut keep_idx: Vec<usize> = Vec::with_capacity(keep.len());
    for label in keep {
        let k = reg.index_of(label)?;
        if keep_idx.contains(&k) {
            return Err(CoreError::InvalidRegister(format!(
                "mode '{label}' listed twice in partial trace"
            )));
        }
        keep_idx.push(k);
    }
    keep_idx.sort_unstable();

    let sub_specs: Vec<(String, usize)> = keep_idx
        .iter()
        .map(|&k| (reg.label(k).to_string(), reg.mode_dim(k)))
        .collect();
    let sub = Arc::new(ModeRegister::new(&sub_specs)?);

    // For every full-space basis index, its projection onto kept modes (as a
    // sub-register index) and onto traced modes (as an opaque key).
    let n = reg.dim();
    let mut keep_part = vec![0usize; n];
    let mut trace_part = vec![0usize; n];
    for i in 0..n {
        let mut kp = 0usize;
        let mut tp = 0usize;
        for m in 0..reg.n_modes() {
            let occ = reg.occupation_of(i, m);
            if keep_idx.contains(&m) {
                kp = kp * reg.mode_dim(m) + occ;
            } else {
                tp = tp * reg.mode_dim(m) + occ;
            }
        }
        keep_part[i] = kp;
        trace_part[i] = tp;
    }

    let mut out = DMatrix::zeros(sub.dim(), sub.dim());
    for i in 0..n {
        for j in 0..n {
            if trace_part[i] == trace_part[j] {
                out[(keep_part[i], keep_part[j])] += rho.matrix()[(i, j)];
            }
        }
    }
    DensityMatrix::new(sub, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn canonical_register() -> Arc<ModeRegister> {
        make_register(&[("a", 2), ("b", 2), ("c", 2), ("d", 2)]).unwrap()
    }

    #[test]
    fn register_strides_are_row_major() {
        let reg = canonical_register();
        assert_eq!(reg.dim(), 16);
        assert_eq!(reg.basis_index(&[1, 0, 0, 0]).unwrap(), 8);
        assert_eq!(reg.basis_index(&[0, 0, 0, 1]).unwrap(), 1);
        assert_eq!(reg.basis_index(&[1, 1, 1, 1]).unwrap(), 15);
        for i in 0..16 {
            let occs: Vec<usize> = (0..4).map(|m| reg.occupation_of(i, m)).collect();
            assert_eq!(reg.basis_index(&occs).unwrap(), i);
        }
    }

    #[test]
    fn register_rejects_bad_specs() {
        assert!(ModeRegister::new::<&str>(&[]).is_err());
        assert!(ModeRegister::new(&[("a", 1)]).is_err());
        assert!(ModeRegister::new(&[("a", 2), ("a", 2)]).is_err());
        // 2*2*2*2*2*2*2*2*2*2*2*2*2 = 8192 > 4096
        let big: Vec<(String, usize)> = (0..13).map(|k| (format!("m{k}"), 2)).collect();
        assert!(ModeRegister::new(&big).is_err());
        // Exactly at the cap is fine.
        let ok: Vec<(String, usize)> = (0..12).map(|k| (format!("m{k}"), 2)).collect();
        assert_eq!(ModeRegister::new(&ok).unwrap().dim(), 4096);
    }

    #[test]
    fn annihilation_matrix_elements_carry_sqrt_n() {
        let reg = make_register(&[("b", 4)]).unwrap();
        let b = annihilation_op(&reg, "b").unwrap();
        assert_eq!(b.matrix()[(0, 1)], c(1.0, 0.0));
        assert!((b.matrix()[(1, 2)].re - 2.0f64.sqrt()).abs() < 1e-15);
        assert!((b.matrix()[(2, 3)].re - 3.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.matrix()[(1, 0)], c(0.0, 0.0));

        // Number operator equals a^dagger a.
        let n_direct = number_op(&reg, "b").unwrap();
        let n_composed = b.dagger().mul(&b).unwrap();
        assert!((n_direct.matrix() - n_composed.matrix()).norm() < 1e-14);
    }

    #[test]
    fn embedded_annihilation_acts_on_its_slot_only() {
        let reg = canonical_register();
        let a = annihilation_op(&reg, "a").unwrap();
        // a |1000> = |0000>
        assert_eq!(a.matrix()[(0, 8)], c(1.0, 0.0));
        // a |1001> = |0001>
        assert_eq!(a.matrix()[(1, 9)], c(1.0, 0.0));
        // it must not touch |0001>
        for row in 0..16 {
            assert_eq!(a.matrix()[(row, 1)], c(0.0, 0.0));
        }

        // Commutator restricted below truncation: [a, a^dagger] acts as
        // identity on states with a-occupation below the cutoff.
        let comm = a.mul(&a.dagger()).unwrap().matrix() - a.dagger().mul(&a).unwrap().matrix();
        for i in 0..16 {
            let occ_a = reg.occupation_of(i, 0);
            if occ_a + 1 < reg.mode_dim(0) {
                assert!((comm[(i, i)] - c(1.0, 0.0)).norm() < 1e-14);
            }
            for j in 0..16 {
                if i != j {
                    assert!(comm[(i, j)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn basis_state_places_the_excitation() {
        let reg = canonical_register();
        let rho = basis_state(&reg, &[1, 0, 0, 0]).unwrap();
        assert_eq!(rho.matrix()[(8, 8)], c(1.0, 0.0));
        assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        assert!((rho.mode_occupation("a").unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rho.mode_occupation("b").unwrap(), 0.0);

        assert!(basis_state(&reg, &[2, 0, 0, 0]).is_err());
        assert!(basis_state(&reg, &[1, 0, 0]).is_err());
    }

    #[test]
    fn mode_superposition_builds_equal_weights() {
        let reg = canonical_register();
        let inv = 1.0 / 2.0f64.sqrt();
        let rho = mode_superposition_state(&reg, "d", &[c(inv, 0.0), c(inv, 0.0)]).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((rho.matrix()[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!((rho.matrix()[(0, 1)].re - 0.5).abs() < 1e-12);
        assert!((rho.purity() - 1.0).abs() < 1e-12);

        // Norm off by more than 1e-10 is rejected.
        let bad = mode_superposition_state(&reg, "d", &[c(inv + 1e-3, 0.0), c(inv, 0.0)]);
        assert!(bad.is_err());
    }

    #[test]
    fn density_matrix_validation_rejects_bad_inputs() {
        let reg = make_register(&[("a", 2)]).unwrap();

        let mut non_herm = DMatrix::zeros(2, 2);
        non_herm[(0, 0)] = c(0.5, 0.0);
        non_herm[(1, 1)] = c(0.5, 0.0);
        non_herm[(0, 1)] = c(0.3, 0.0);
        non_herm[(1, 0)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(reg.clone(), non_herm).is_err());

        let mut bad_trace = DMatrix::zeros(2, 2);
        bad_trace[(0, 0)] = c(0.7, 0.0);
        bad_trace[(1, 1)] = c(0.7, 0.0);
        assert!(DensityMatrix::new(reg.clone(), bad_trace).is_err());

        // Hermitian, unit trace, but indefinite.
        let mut neg = DMatrix::zeros(2, 2);
        neg[(0, 0)] = c(1.2, 0.0);
        neg[(1, 1)] = c(-0.2, 0.0);
        assert!(DensityMatrix::new(reg.clone(), neg).is_err());

        let mut ok = DMatrix::zeros(2, 2);
        ok[(0, 0)] = c(0.25, 0.0);
        ok[(1, 1)] = c(0.75, 0.0);
        let rho = DensityMatrix::new(reg, ok).unwrap();
        assert!((rho.purity() - (0.25f64 * 0.25 + 0.75 * 0.75)).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_state_recovers_factors() {
        let reg = canonical_register();
        // a in |1>, d in (|0> + |1>)/sqrt(2), b and c in vacuum.
        let inv = 1.0 / 2.0f64.sqrt();
        let mut psi = DVector::zeros(16);
        psi[8] = c(inv, 0.0);
        psi[9] = c(inv, 0.0);
        let rho = DensityMatrix::from_pure(reg.clone(), &psi).unwrap();

        let rho_a = partial_trace(&rho, &["a"]).unwrap();
        assert!((rho_a.matrix()[(1, 1)].re - 1.0).abs() < 1e-12);

        let rho_d = partial_trace(&rho, &["d"]).unwrap();
        assert!((rho_d.matrix()[(0, 1)].re - 0.5).abs() < 1e-12);
        assert!((rho_d.purity() - 1.0).abs() < 1e-12);

        // Keep order does not matter, canonical order is preserved.
        let rho_ad = partial_trace(&rho, &["d", "a"]).unwrap();
        assert_eq!(rho_ad.register().label(0), "a");
        assert_eq!(rho_ad.register().label(1), "d");
        assert!((rho_ad.purity() - 1.0).abs() < 1e-12);
        // |psi_ad> = |1>_a (|0>+|1>)_d / sqrt(2): entries at (2,2),(3,3),(2,3).
        assert!((rho_ad.matrix()[(2, 2)].re - 0.5).abs() < 1e-12);
        assert!((rho_ad.matrix()[(2, 3)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_entangled_pair_is_maximally_mixed() {
        let reg = make_register(&[("a", 2), ("d", 2)]).unwrap();
        let inv = 1.0 / 2.0f64.sqrt();
        let psi = DVector::from_column_slice(&[c(inv, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(inv, 0.0)]);
        let rho = DensityMatrix::from_pure(reg, &psi).unwrap();
        let rho_a = partial_trace(&rho, &["a"]).unwrap();
        assert!((rho_a.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((rho_a.matrix()[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!(rho_a.matrix()[(0, 1)].norm() < 1e-12);
        assert!((rho_a.purity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_is_associative_across_orders() {
        // Random-ish but fixed pure state on three modes.
        let reg = make_register(&[("a", 2), ("b", 3), ("c", 2)]).unwrap();
        let mut psi = DVector::zeros(reg.dim());
        for i in 0..reg.dim() {
            let x = (i as f64 * 0.7371).sin();
            let y = (i as f64 * 1.234 + 0.4).cos();
            psi[i] = c(x, 0.5 * y);
        }
        let norm = psi.norm();
        psi /= c(norm, 0.0);
        let rho = DensityMatrix::from_pure(reg, &psi).unwrap();

        let direct = partial_trace(&rho, &["a"]).unwrap();
        let ab = partial_trace(&rho, &["a", "b"]).unwrap();
        let via_ab = partial_trace(&ab, &["a"]).unwrap();
        let ac = partial_trace(&rho, &["a", "c"]).unwrap();
        let via_ac = partial_trace(&ac, &["a"]).unwrap();

        assert!((direct.matrix() - via_ab.matrix()).norm() < 1e-12);
        assert!((direct.matrix() - via_ac.matrix()).norm() < 1e-12);
        assert!((direct.trace() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_keep_lists() {
        let reg = canonical_register();
        let rho = basis_state(&reg, &[0, 0, 0, 0]).unwrap();
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&rho, &["x"]).is_err());
        assert!(partial_trace(&rho, &["a", "a"]).is_err());
    }
}
