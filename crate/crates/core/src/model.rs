//! Physical parameters and derived single-qubit quantities.
//!
//! All solver-facing quantities are kept in internal units: rates in units of
//! the reference qubit's bare decay γ_ref, positions in units of the
//! reference wavelength λ_ref = 2πv/ω_ref, frequencies as detunings from
//! ω_ref. The single dimensionless scale bridge is `inv_scale` = γ_ref/ω_ref,
//! which controls how far wavenumbers move with detuning and anharmonicity
//! (0 means ideal scale separation: every wavenumber is pinned to k_ref).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19; // C
pub const HBAR: f64 = 1.054_571_817e-34; // J s

/// Transmon circuit parameters (SI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Coupling/total capacitance ratio C_C/C_T.
    pub beta: f64,
    /// Josephson energy (J).
    pub ej: f64,
    /// Charging energy (J).
    pub ec: f64,
    /// Line impedance (Ω).
    pub z0: f64,
}

impl TransmonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must be in (0, 1], got {}", self.beta)));
        }
        if self.ej <= 0.0 || self.ec <= 0.0 {
            return Err(Error::Config("ej and ec must be positive".into()));
        }
        if self.z0 <= 0.0 {
            return Err(Error::Config("z0 must be positive".into()));
        }
        Ok(())
    }

    /// Non-error diagnostics (the transmon-regime check is advisory only).
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.ej / self.ec <= 1.0 {
            w.push(format!(
                "ej/ec = {:.3} is below the transmon regime (expected > 1)",
                self.ej / self.ec
            ));
        }
        w
    }

    /// Photon-qubit coupling g(ω) = e β (E_J/8E_C)^{1/4} √(2Z₀ω/πħ).
    ///
    /// `omega` in rad/s; the result has rad/s·Hz^{1/2} density units so that
    /// π g² is a rate.
    pub fn coupling_strength(&self, omega: f64) -> Result<f64> {
        if omega <= 0.0 {
            return Err(Error::Domain(format!(
                "coupling strength needs omega > 0, got {omega}"
            )));
        }
        Ok(ELEMENTARY_CHARGE
            * self.beta
            * (self.ej / (8.0 * self.ec)).powf(0.25)
            * (2.0 * self.z0 * omega / (std::f64::consts::PI * HBAR)).sqrt())
    }

    /// Bare decay rate π g(ω)² implied by the circuit.
    pub fn bare_decay(&self, omega: f64) -> Result<f64> {
        Ok(std::f64::consts::PI * self.coupling_strength(omega)?.powi(2))
    }

    /// Frequency-independent charge-matrix-element factor √2 e β (E_J/8E_C)^{1/4}.
    pub fn q_factor(&self) -> f64 {
        std::f64::consts::SQRT_2
            * ELEMENTARY_CHARGE
            * self.beta
            * (self.ej / (8.0 * self.ec)).powf(0.25)
    }
}

/// A single qubit in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitSpec {
    /// (ω_i − ω_ref)/γ_ref.
    pub detuning: f64,
    /// x_i/λ_ref, measured from the mirror at x = 0.
    pub position: f64,
    /// γ_i/γ_ref (bare rate of the fundamental transition).
    pub bare_decay: f64,
    /// Pure dephasing per excited level, γ_ref units; entry n−1 applies to
    /// level n. Missing upper entries fall back to the first entry.
    pub dephasing: Vec<f64>,
    /// α_i/γ_ref; successive transition frequencies shrink by this amount.
    pub anharmonicity: f64,
    /// Number of retained levels d ≥ 2.
    pub levels: usize,
    /// Charge-matrix-element factor when circuit parameters were given.
    pub q_factor: Option<f64>,
}

impl QubitSpec {
    pub fn two_level(position: f64, bare_decay: f64, dephasing: f64) -> Self {
        QubitSpec {
            detuning: 0.0,
            position,
            bare_decay,
            dephasing: vec![dephasing],
            anharmonicity: 0.0,
            levels: 2,
            q_factor: None,
        }
    }

    /// Dephasing rate acting on excited level `n` (1-based).
    pub fn dephasing_for_level(&self, n: usize) -> f64 {
        self.dephasing
            .get(n - 1)
            .or_else(|| self.dephasing.first())
            .copied()
            .unwrap_or(0.0)
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        if self.position < 0.0 {
            return Err(Error::Config(format!(
                "qubit {index}: position must be >= 0 (mirror at x = 0), got {}",
                self.position
            )));
        }
        if self.bare_decay < 0.0 {
            return Err(Error::Config(format!("qubit {index}: bare_decay must be >= 0")));
        }
        if self.dephasing.iter().any(|&g| g < 0.0) {
            return Err(Error::Config(format!("qubit {index}: dephasing rates must be >= 0")));
        }
        if self.levels < 2 {
            return Err(Error::Config(format!(
                "qubit {index}: levels must be >= 2, got {}",
                self.levels
            )));
        }
        Ok(())
    }
}

/// Continuous-wave probe in internal units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    /// Reference Rabi amplitude Ω_p^N (γ_ref units), as seen by the
    /// outermost qubit.
    pub rabi: f64,
    /// (ω_p − ω_ref)/γ_ref.
    pub detuning: f64,
}

impl ProbeSpec {
    pub fn new(rabi: f64, detuning: f64) -> Self {
        ProbeSpec { rabi, detuning }
    }
}

/// The waveguide itself: a wave speed and the mirror boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    /// v in m/s.
    pub wavespeed: f64,
    /// Antinode boundary at x = 0; always true in this artifact.
    pub mirror: bool,
}

impl WaveguideSpec {
    pub fn new(wavespeed: f64) -> Result<Self> {
        if wavespeed <= 0.0 {
            return Err(Error::Config(format!("wavespeed must be > 0, got {wavespeed}")));
        }
        Ok(WaveguideSpec { wavespeed, mirror: true })
    }
}

/// SI normalization scales retained for exact round-trips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiScales {
    /// γ_ref in rad/s.
    pub gamma_ref: f64,
    /// ω_ref in rad/s.
    pub omega_ref: f64,
    /// Waveguide speed v in m/s.
    pub wavespeed: f64,
}

impl SiScales {
    /// λ_ref = 2πv/ω_ref in meters.
    pub fn lambda_ref(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.wavespeed / self.omega_ref
    }
}

/// The normalized qubit array plus the scale bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct System {
    pub qubits: Vec<QubitSpec>,
    /// γ_ref/ω_ref; 0 means ideal scale separation (wavenumbers frozen at k_ref).
    pub inv_scale: f64,
    /// 0-based index of the normalization reference qubit.
    pub reference: usize,
    /// Present when the system came from SI inputs.
    pub si: Option<SiScales>,
}

impl System {
    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits.is_empty() {
            return Err(Error::Config("at least one qubit is required".into()));
        }
        for (i, q) in self.qubits.iter().enumerate() {
            q.validate(i)?;
        }
        if self.reference >= self.qubits.len() {
            return Err(Error::Config(format!(
                "reference qubit index {} out of range",
                self.reference
            )));
        }
        if self.inv_scale < 0.0 {
            return Err(Error::Config("inv_scale must be >= 0".into()));
        }
        let with_q = self.qubits.iter().filter(|q| q.q_factor.is_some()).count();
        if with_q != 0 && with_q != self.qubits.len() {
            return Err(Error::Config(
                "circuit parameters must be given for all qubits or for none".into(),
            ));
        }
        Ok(())
    }

    /// ω_i/ω_ref.
    pub fn freq_ratio(&self, i: usize) -> f64 {
        1.0 + self.qubits[i].detuning * self.inv_scale
    }

    /// ω_n^i/ω_ref for the |n−1⟩→|n⟩ transition (n 1-based).
    pub fn transition_ratio(&self, i: usize, n: usize) -> f64 {
        1.0 + (self.qubits[i].detuning - (n as f64 - 1.0) * self.qubits[i].anharmonicity)
            * self.inv_scale
    }

    /// ω_p/ω_ref for a probe at the given detuning.
    pub fn probe_ratio(&self, probe_detuning: f64) -> f64 {
        1.0 + probe_detuning * self.inv_scale
    }

    /// Index of the outermost qubit (largest position): the reference "N"
    /// for the probe amplitude and the η ratios.
    pub fn outermost(&self) -> usize {
        let mut best = 0;
        for (i, q) in self.qubits.iter().enumerate() {
            if q.position > self.qubits[best].position {
                best = i;
            }
        }
        best
    }

    /// η between two qubits: the coupling ratio g_a(ω)/g_b(ω), frequency
    /// independent. 1 when no circuit parameters are present.
    pub fn eta_pair(&self, a: usize, b: usize) -> Result<f64> {
        match (self.qubits[a].q_factor, self.qubits[b].q_factor) {
            (None, None) => Ok(1.0),
            (Some(qa), Some(qb)) => Ok(qa / qb),
            _ => Err(Error::Config(
                "circuit parameters must be given for all qubits or for none".into(),
            )),
        }
    }

    /// η_Ni with N the outermost qubit.
    pub fn eta(&self, i: usize) -> Result<f64> {
        self.eta_pair(self.outermost(), i)
    }

    /// Rabi amplitude seen by qubit i: Ω_p^i = Ω_p^N/η_Ni. The spatial
    /// factor cos(k_p x_i) is applied separately by the generator builders.
    pub fn rabi_at(&self, i: usize, probe: &ProbeSpec) -> Result<f64> {
        Ok(probe.rabi / self.eta(i)?)
    }

    /// cos(k_p x_i) at the probe wavenumber.
    pub fn probe_mode(&self, i: usize, probe: &ProbeSpec) -> f64 {
        let kp = 2.0 * std::f64::consts::PI * self.probe_ratio(probe.detuning);
        (kp * self.qubits[i].position).cos()
    }

    /// Largest level count across the array.
    pub fn max_levels(&self) -> usize {
        self.qubits.iter().map(|q| q.levels).max().unwrap_or(2)
    }
}
