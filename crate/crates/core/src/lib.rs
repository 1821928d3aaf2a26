//! Simulation library for a hybrid quantum transducer built from four coupled
//! modes: an optical cavity `a`, a microwave resonator `b`, a rare-earth-doped
//! crystal spin ensemble `c`, and an NV spin ensemble `d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`] - truncated-mode registers, operators, density matrices,
//!   partial traces.
//! * [`lindblad`] - a fixed-step master-equation integrator, the equivalent
//!   single-excitation amplitude equations, and the bad-cavity reduction to a
//!   two-spin-mode model.
//! * [`models`] - Hamiltonian builders: the four-mode effective model, the
//!   full three-level ensemble model it is derived from, the dark/bright mode
//!   decomposition, and the virtual-photon coupling reduction.
//! * [`protocols`] - time-dependent coupling schedules (sequential SWAP,
//!   adiabatic transfer, entanglement generation) and ideal two-mode gates.
//! * [`metrics`] - populations, transfer fidelity, concurrence, heralded
//!   rates.
//!
//! All frequencies and rates are expressed in units of a reference coupling
//! `g`, times in units of `1/g`, with `hbar = 1`.

pub mod hilbert;
pub mod lindblad;
pub mod metrics;
pub mod models;
pub mod protocols;

use thiserror::Error;

/// Errors produced by construction, validation, and integration routines.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A register specification was rejected (dimension cap, duplicate
    /// labels, zero-dimensional mode, unknown label lookups).
    #[error("invalid register: {0}")]
    InvalidRegister(String),

    /// A state failed validation (normalisation, Hermiticity, positivity) or
    /// was specified inconsistently.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A scalar parameter was out of range (negative rate, zero detuning
    /// where a finite one is required, malformed pulse shape, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two objects built against different registers, or a matrix of the
    /// wrong shape, were combined.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A numerical invariant (trace, Hermiticity, positivity, metric range)
    /// was violated during or after integration.
    #[error("numerical invariant violated{}: {what}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numerical {
        /// Integrator step at which the violation was detected, when known.
        step: Option<usize>,
        what: String,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn numerical(what: impl Into<String>) -> Self {
        CoreError::Numerical {
            step: None,
            what: what.into(),
        }
    }

    pub(crate) fn numerical_at(step: usize, what: impl Into<String>) -> Self {
        CoreError::Numerical {
            step: Some(step),
            what: what.into(),
        }
    }
}
