//! Scenario configuration: the on-disk TOML schema, semantic validation with
//! key-path diagnostics, canonical serialization, and the scenario hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// A full simulation scenario. Field order here fixes the canonical TOML
/// layout used for hashing, so re-serializing a parsed config reproduces the
/// same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub register: RegisterSection,
    pub couplings: CouplingsSection,
    pub channels: ChannelsSection,
    pub initial: InitialSection,
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterSection {
    pub modes: Vec<ModeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub label: String,
    pub dim: usize,
}

/// Effective couplings, given directly or derived from ensemble parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CouplingsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gnv: Option<f64>,
    /// Microscopic inputs that determine `g1` and `g2`; mutually exclusive
    /// with giving those two directly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derive: Option<DeriveSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveSection {
    pub g_o: f64,
    pub omega: f64,
    pub delta_o: f64,
    pub g_mu: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChannelsSection {
    #[serde(default)]
    pub kappa_a: f64,
    #[serde(default)]
    pub kappa_b: f64,
    #[serde(default)]
    pub gamma_c: f64,
    #[serde(default)]
    pub gamma_d: f64,
    #[serde(default)]
    pub n_th: f64,
}

/// Initial state: either integer occupations for every mode (in register
/// order) or a single-mode superposition with everything else in vacuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occupations: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Complex amplitudes as `[re, im]` pairs over the Fock levels of `mode`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    /// One of `swap`, `swap-reversed`, `adiabatic`, `entanglement`,
    /// `entanglement-reversed`, `hold`.
    pub name: String,
    /// Entangled-branch amplitude (entanglement protocols only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Stage duration (adiabatic and hold protocols only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_t: Option<f64>,
    /// Append a microwave -> NV pi-swap after the adiabatic stage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub append_swap: Option<bool>,
    /// Gaussian envelope for the optical coupling (adiabatic only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub g0: f64,
    pub t0: f64,
    pub w: f64,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_sample_every() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection { dt: default_dt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_sample_every")]
    pub sample_every: f64,
    /// Optional physical value of the reference coupling `g`, used to report
    /// durations in microseconds alongside the unitless `1/g` values. Has no
    /// effect on the dynamics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_physical_mhz: Option<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            sample_every: default_sample_every(),
            g_physical_mhz: None,
        }
    }
}

/// Which protocol a scenario runs, with its parameters resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolKind {
    Swap,
    SwapReversed,
    Adiabatic,
    Entanglement,
    EntanglementReversed,
    Hold,
}

impl ProtocolKind {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "swap" => ProtocolKind::Swap,
            "swap-reversed" => ProtocolKind::SwapReversed,
            "adiabatic" => ProtocolKind::Adiabatic,
            "entanglement" => ProtocolKind::Entanglement,
            "entanglement-reversed" => ProtocolKind::EntanglementReversed,
            "hold" => ProtocolKind::Hold,
            other => {
                return Err(CliError::Invalid(format!(
                    "protocol.name: unknown protocol '{other}' (expected swap, swap-reversed, \
                     adiabatic, entanglement, entanglement-reversed, or hold)"
                )))
            }
        })
    }
}

fn require_finite(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{path}: must be finite, got {v}")))
    }
}

fn require_non_negative(path: &str, v: f64) -> Result<(), CliError> {
    require_finite(path, v)?;
    if v < 0.0 {
        return Err(CliError::Invalid(format!(
            "{path}: must be non-negative, got {v}"
        )));
    }
    Ok(())
}

fn require_positive(path: &str, v: f64) -> Result<(), CliError> {
    require_finite(path, v)?;
    if v <= 0.0 {
        return Err(CliError::Invalid(format!(
            "{path}: must be positive, got {v}"
        )));
    }
    Ok(())
}

impl ScenarioConfig {
    /// Parses and semantically validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let config: ScenarioConfig = toml::from_str(text)
            .map_err(|e| CliError::Invalid(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Canonical serialization; the byte stream the scenario hash covers.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn scenario_hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_toml().as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(out, "{byte:02x}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn protocol_kind(&self) -> Result<ProtocolKind, CliError> {
        ProtocolKind::parse(&self.protocol.name)
    }

    /// Checks every cross-field rule, reporting the offending key path.
    pub fn validate(&self) -> Result<(), CliError> {
        // Register.
        if self.register.modes.is_empty() {
            return Err(CliError::Invalid(
                "register.modes: at least one mode is required".into(),
            ));
        }
        for (i, m) in self.register.modes.iter().enumerate() {
            if m.label.is_empty() {
                return Err(CliError::Invalid(format!(
                    "register.modes[{i}].label: must not be empty"
                )));
            }
            if m.dim < 2 {
                return Err(CliError::Invalid(format!(
                    "register.modes[{i}].dim: must be at least 2, got {}",
                    m.dim
                )));
            }
        }

        // Couplings: direct XOR derived for the (g1, g2) pair.
        let c = &self.couplings;
        if let Some(d) = &c.derive {
            if c.g1.is_some() || c.g2.is_some() {
                return Err(CliError::Invalid(
                    "couplings: give either g1/g2 or couplings.derive, not both".into(),
                ));
            }
            require_finite("couplings.derive.g_o", d.g_o)?;
            require_finite("couplings.derive.omega", d.omega)?;
            require_finite("couplings.derive.delta_o", d.delta_o)?;
            require_finite("couplings.derive.g_mu", d.g_mu)?;
            if d.delta_o == 0.0 {
                return Err(CliError::Invalid(
                    "couplings.derive.delta_o: must be nonzero".into(),
                ));
            }
            if d.n == 0 {
                return Err(CliError::Invalid(
                    "couplings.derive.n: ensemble size must be at least 1".into(),
                ));
            }
        }
        for (path, v) in [
            ("couplings.g1", c.g1),
            ("couplings.g2", c.g2),
            ("couplings.gnv", c.gnv),
        ] {
            if let Some(v) = v {
                require_finite(path, v)?;
            }
        }

        // Channels.
        require_non_negative("channels.kappa_a", self.channels.kappa_a)?;
        require_non_negative("channels.kappa_b", self.channels.kappa_b)?;
        require_non_negative("channels.gamma_c", self.channels.gamma_c)?;
        require_non_negative("channels.gamma_d", self.channels.gamma_d)?;
        require_non_negative("channels.n_th", self.channels.n_th)?;

        // Initial state: occupations XOR mode+amplitudes.
        let init = &self.initial;
        match (&init.occupations, &init.mode, &init.amplitudes) {
            (Some(occ), None, None) => {
                if occ.len() != self.register.modes.len() {
                    return Err(CliError::Invalid(format!(
                        "initial.occupations: expected {} entries (one per mode), got {}",
                        self.register.modes.len(),
                        occ.len()
                    )));
                }
                for (i, (&n, m)) in occ.iter().zip(&self.register.modes).enumerate() {
                    if n >= m.dim {
                        return Err(CliError::Invalid(format!(
                            "initial.occupations[{i}]: occupation {n} exceeds mode '{}' (dim {})",
                            m.label, m.dim
                        )));
                    }
                }
            }
            (None, Some(mode), Some(amps)) => {
                let Some(spec) = self.register.modes.iter().find(|m| &m.label == mode) else {
                    return Err(CliError::Invalid(format!(
                        "initial.mode: no mode labelled '{mode}' in the register"
                    )));
                };
                if amps.is_empty() || amps.len() > spec.dim {
                    return Err(CliError::Invalid(format!(
                        "initial.amplitudes: expected 1..={} entries for mode '{mode}', got {}",
                        spec.dim,
                        amps.len()
                    )));
                }
                let norm: f64 = amps.iter().map(|[re, im]| re * re + im * im).sum();
                if (norm - 1.0).abs() > 1e-8 {
                    return Err(CliError::Invalid(format!(
                        "initial.amplitudes: must be normalized, |psi|^2 = {norm}"
                    )));
                }
            }
            _ => {
                return Err(CliError::Invalid(
                    "initial: give either occupations or mode + amplitudes".into(),
                ));
            }
        }

        // Protocol-specific parameter requirements.
        let kind = self.protocol_kind()?;
        let p = &self.protocol;
        let forbid = |field: &str, set: bool| -> Result<(), CliError> {
            if set {
                Err(CliError::Invalid(format!(
                    "protocol.{field}: not used by protocol '{}'",
                    p.name
                )))
            } else {
                Ok(())
            }
        };
        match kind {
            ProtocolKind::Swap | ProtocolKind::SwapReversed => {
                forbid("alpha", p.alpha.is_some())?;
                forbid("total_t", p.total_t.is_some())?;
                forbid("append_swap", p.append_swap.is_some())?;
                forbid("pulse", p.pulse.is_some())?;
                self.require_coupling("g1", kind)?;
                self.require_coupling("g2", kind)?;
                self.require_coupling("gnv", kind)?;
            }
            ProtocolKind::Adiabatic => {
                forbid("alpha", p.alpha.is_some())?;
                let Some(pulse) = &p.pulse else {
                    return Err(CliError::Invalid(
                        "protocol.pulse: required by protocol 'adiabatic'".into(),
                    ));
                };
                require_finite("protocol.pulse.g0", pulse.g0)?;
                require_finite("protocol.pulse.t0", pulse.t0)?;
                require_positive("protocol.pulse.w", pulse.w)?;
                let Some(total_t) = p.total_t else {
                    return Err(CliError::Invalid(
                        "protocol.total_t: required by protocol 'adiabatic'".into(),
                    ));
                };
                require_positive("protocol.total_t", total_t)?;
                self.require_coupling("g2", kind)?;
                if p.append_swap == Some(true) {
                    self.require_coupling("gnv", kind)?;
                }
            }
            ProtocolKind::Entanglement | ProtocolKind::EntanglementReversed => {
                forbid("total_t", p.total_t.is_some())?;
                forbid("append_swap", p.append_swap.is_some())?;
                forbid("pulse", p.pulse.is_some())?;
                let Some(alpha) = p.alpha else {
                    return Err(CliError::Invalid(format!(
                        "protocol.alpha: required by protocol '{}'",
                        p.name
                    )));
                };
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(CliError::Invalid(format!(
                        "protocol.alpha: must lie in [0, 1], got {alpha}"
                    )));
                }
                self.require_coupling("g1", kind)?;
                self.require_coupling("g2", kind)?;
                self.require_coupling("gnv", kind)?;
            }
            ProtocolKind::Hold => {
                forbid("alpha", p.alpha.is_some())?;
                forbid("append_swap", p.append_swap.is_some())?;
                forbid("pulse", p.pulse.is_some())?;
                let Some(total_t) = p.total_t else {
                    return Err(CliError::Invalid(
                        "protocol.total_t: required by protocol 'hold'".into(),
                    ));
                };
                require_positive("protocol.total_t", total_t)?;
            }
        }

        // Integrator and output.
        require_positive("integrator.dt", self.integrator.dt)?;
        require_positive("output.sample_every", self.output.sample_every)?;
        if let Some(g) = self.output.g_physical_mhz {
            require_positive("output.g_physical_mhz", g)?;
        }
        Ok(())
    }

    fn require_coupling(&self, which: &str, kind: ProtocolKind) -> Result<(), CliError> {
        let derived = self.couplings.derive.is_some();
        let present = match which {
            "g1" => self.couplings.g1.is_some() || derived,
            "g2" => self.couplings.g2.is_some() || derived,
            "gnv" => self.couplings.gnv.is_some(),
            _ => unreachable!(),
        };
        if present {
            Ok(())
        } else {
            Err(CliError::Invalid(format!(
                "couplings.{which}: required by protocol '{}'",
                match kind {
                    ProtocolKind::Swap => "swap",
                    ProtocolKind::SwapReversed => "swap-reversed",
                    ProtocolKind::Adiabatic => "adiabatic",
                    ProtocolKind::Entanglement => "entanglement",
                    ProtocolKind::EntanglementReversed => "entanglement-reversed",
                    ProtocolKind::Hold => "hold",
                }
            )))
        }
    }

    /// Resolved `(g1, g2)`: direct values or the ensemble derivation.
    pub fn effective_g1_g2(&self) -> Result<(Option<f64>, Option<f64>), CliError> {
        if let Some(d) = &self.couplings.derive {
            let eff = transducer_core::models::build_effective_couplings(
                d.g_o, d.omega, d.delta_o, d.g_mu, d.n,
            )?;
            Ok((Some(eff.g1), Some(eff.g2)))
        } else {
            Ok((self.couplings.g1, self.couplings.g2))
        }
    }

    /// Writes one scalar field addressed by a dotted key path; the sweep
    /// engine's entry point. Only numeric leaf fields are addressable.
    pub fn set_scalar(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        match key {
            "couplings.g1" => self.couplings.g1 = Some(value),
            "couplings.g2" => self.couplings.g2 = Some(value),
            "couplings.gnv" => self.couplings.gnv = Some(value),
            "channels.kappa_a" => self.channels.kappa_a = value,
            "channels.kappa_b" => self.channels.kappa_b = value,
            "channels.gamma_c" => self.channels.gamma_c = value,
            "channels.gamma_d" => self.channels.gamma_d = value,
            "channels.n_th" => self.channels.n_th = value,
            "protocol.alpha" => self.protocol.alpha = Some(value),
            "protocol.total_t" => self.protocol.total_t = Some(value),
            "protocol.pulse.g0" | "protocol.pulse.t0" | "protocol.pulse.w" => {
                let Some(pulse) = self.protocol.pulse.as_mut() else {
                    return Err(CliError::Invalid(format!(
                        "{key}: the scenario has no protocol.pulse section"
                    )));
                };
                match key {
                    "protocol.pulse.g0" => pulse.g0 = value,
                    "protocol.pulse.t0" => pulse.t0 = value,
                    _ => pulse.w = value,
                }
            }
            "integrator.dt" => self.integrator.dt = value,
            "output.sample_every" => self.output.sample_every = value,
            other => {
                return Err(CliError::Invalid(format!(
                    "sweep parameter '{other}' does not address a scalar numeric field"
                )));
            }
        }
        Ok(())
    }
}
