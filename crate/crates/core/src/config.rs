//! Declarative configuration files and unit normalization.
//!
//! Two parameterizations are accepted. `"units": "natural"` gives rates in
//! units of the reference qubit's bare decay and positions in units of
//! λ_ref (the common path for scale-free runs); `"units": "si"` gives
//! angular frequencies in rad/s and positions in meters or λ_ref, with
//! bare decays either explicit or derived from transmon circuit parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProbeSpec, QubitSpec, SiScales, System, TransmonParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Natural,
    Si,
}

/// Position in either length unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Position {
    Lambda { lambda: f64 },
    Meters { meters: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitConfig {
    /// Natural: (ω_i − ω_ref)/γ_ref. SI: ω_i in rad/s.
    pub omega: f64,
    pub position: Position,
    /// Natural: γ_i/γ_ref. SI: rad/s; may be omitted when `circuit` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bare_decay: Option<f64>,
    /// Pure dephasing rates per excited level (same units as bare_decay).
    #[serde(default)]
    pub dephasing: Vec<f64>,
    #[serde(default)]
    pub anharmonicity: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<TransmonParams>,
}

fn default_levels() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideConfig {
    /// v in m/s.
    pub wavespeed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.min + step * k as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Natural: Ω_p^N/γ_ref. SI: rad/s.
    pub rabi: f64,
    /// Detuning grid in γ_ref units (both modes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_grid: Option<GridConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(default)]
    pub units: Units,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveguide: Option<WaveguideConfig>,
    /// 1-based reference qubit for normalization; defaults to 1 (mirror side).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<usize>,
    /// Natural mode only: ω_ref/γ_ref, enabling wavenumber corrections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub qubits: Vec<QubitConfig>,
    pub probe: ProbeConfig,
}

/// A fully normalized run input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub system: System,
    /// Ω_p^N in γ_ref units.
    pub rabi: f64,
    pub grid: Option<GridConfig>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<ConfigFile> {
        let cfg: ConfigFile = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn reference_index(&self) -> usize {
        self.reference.unwrap_or(1).saturating_sub(1)
    }

    /// Advisory diagnostics (never fatal).
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (i, q) in self.qubits.iter().enumerate() {
            if let Some(c) = &q.circuit {
                for msg in c.warnings() {
                    w.push(format!("qubit {}: {}", i + 1, msg));
                }
            }
        }
        w
    }
}

/// Normalize a configuration to internal units (γ_ref = 1, λ_ref = 1).
pub fn to_internal_units(cfg: &ConfigFile) -> Result<Normalized> {
    if cfg.qubits.is_empty() {
        return Err(Error::Config("qubit list is empty".into()));
    }
    let rix = cfg.reference_index();
    if rix >= cfg.qubits.len() {
        return Err(Error::Config(format!(
            "reference qubit {} out of range (have {})",
            rix + 1,
            cfg.qubits.len()
        )));
    }
    for (i, q) in cfg.qubits.iter().enumerate() {
        if let Some(c) = &q.circuit {
            c.validate()
                .map_err(|e| Error::Config(format!("qubit {}: {}", i + 1, e)))?;
        }
    }
    match cfg.units {
        Units::Natural => natural_to_internal(cfg, rix),
        Units::Si => si_to_internal(cfg, rix),
    }
}

fn natural_to_internal(cfg: &ConfigFile, rix: usize) -> Result<Normalized> {
    if cfg.qubits.iter().any(|q| q.circuit.is_some()) {
        return Err(Error::Config(
            "circuit parameters are SI quantities; use units = \"si\"".into(),
        ));
    }
    let gamma_ref = cfg.qubits[rix]
        .bare_decay
        .ok_or_else(|| Error::Config("reference qubit needs bare_decay".into()))?;
    if gamma_ref <= 0.0 {
        return Err(Error::Config("reference bare_decay must be > 0".into()));
    }
    let omega_ref = cfg.qubits[rix].omega;
    let inv_scale = match cfg.scale {
        Some(s) if s > 0.0 => gamma_ref / (s * gamma_ref),
        Some(_) => return Err(Error::Config("scale must be > 0".into())),
        None => 0.0,
    };
    let mut qubits = Vec::with_capacity(cfg.qubits.len());
    for (i, q) in cfg.qubits.iter().enumerate() {
        let position = match q.position {
            Position::Lambda { lambda } => lambda,
            Position::Meters { .. } => {
                return Err(Error::Config(format!(
                    "qubit {}: positions in meters need si units with a wavespeed",
                    i + 1
                )))
            }
        };
        let bare = q.bare_decay.ok_or_else(|| {
            Error::Config(format!("qubit {}: bare_decay required in natural units", i + 1))
        })?;
        qubits.push(QubitSpec {
            detuning: (q.omega - omega_ref) / gamma_ref,
            position,
            bare_decay: bare / gamma_ref,
            dephasing: q.dephasing.iter().map(|g| g / gamma_ref).collect(),
            anharmonicity: q.anharmonicity / gamma_ref,
            levels: q.levels,
            q_factor: None,
        });
    }
    let system = System { qubits, inv_scale, reference: rix, si: None };
    system.validate()?;
    Ok(Normalized { system, rabi: cfg.probe.rabi / gamma_ref, grid: cfg.probe.detuning_grid })
}

fn si_to_internal(cfg: &ConfigFile, rix: usize) -> Result<Normalized> {
    let wav = cfg
        .waveguide
        .ok_or_else(|| Error::Config("si units require waveguide.wavespeed".into()))?;
    if wav.wavespeed <= 0.0 {
        return Err(Error::Config("wavespeed must be > 0".into()));
    }
    let omega_ref = cfg.qubits[rix].omega;
    if omega_ref <= 0.0 {
        return Err(Error::Config("reference qubit omega must be > 0".into()));
    }
    let bare_of = |i: usize, q: &QubitConfig| -> Result<f64> {
        match (&q.circuit, q.bare_decay) {
            (Some(c), Some(given)) => {
                let derived = c.bare_decay(q.omega)?;
                if ((given - derived) / derived).abs() > 1e-10 {
                    return Err(Error::Config(format!(
                        "qubit {}: bare_decay {given:.6e} inconsistent with circuit value {derived:.6e}",
                        i + 1
                    )));
                }
                Ok(given)
            }
            (Some(c), None) => c.bare_decay(q.omega),
            (None, Some(given)) => Ok(given),
            (None, None) => Err(Error::Config(format!(
                "qubit {}: needs bare_decay or circuit",
                i + 1
            ))),
        }
    };
    let gamma_ref = bare_of(rix, &cfg.qubits[rix])?;
    if gamma_ref <= 0.0 {
        return Err(Error::Config("reference bare_decay must be > 0".into()));
    }
    let lambda_ref = 2.0 * std::f64::consts::PI * wav.wavespeed / omega_ref;
    let mut qubits = Vec::with_capacity(cfg.qubits.len());
    for (i, q) in cfg.qubits.iter().enumerate() {
        if q.omega <= 0.0 {
            return Err(Error::Config(format!("qubit {}: omega must be > 0", i + 1)));
        }
        let position = match q.position {
            Position::Lambda { lambda } => lambda,
            Position::Meters { meters } => meters / lambda_ref,
        };
        qubits.push(QubitSpec {
            detuning: (q.omega - omega_ref) / gamma_ref,
            position,
            bare_decay: bare_of(i, q)? / gamma_ref,
            dephasing: q.dephasing.iter().map(|g| g / gamma_ref).collect(),
            anharmonicity: q.anharmonicity / gamma_ref,
            levels: q.levels,
            q_factor: q.circuit.as_ref().map(|c| c.q_factor()),
        });
    }
    let system = System {
        qubits,
        inv_scale: gamma_ref / omega_ref,
        reference: rix,
        si: Some(SiScales { gamma_ref, omega_ref, wavespeed: wav.wavespeed }),
    };
    system.validate()?;
    Ok(Normalized { system, rabi: cfg.probe.rabi / gamma_ref, grid: cfg.probe.detuning_grid })
}

/// Inverse conversion: reconstruct an SI configuration (positions in meters).
///
/// Only valid for systems that carry SI scales. Round-trips with
/// [`to_internal_units`] to relative 1e-12.
pub fn to_si_config(n: &Normalized) -> Result<ConfigFile> {
    let si = n
        .system
        .si
        .ok_or_else(|| Error::Config("system carries no SI scales".into()))?;
    let lambda_ref = si.lambda_ref();
    let qubits = n
        .system
        .qubits
        .iter()
        .map(|q| QubitConfig {
            omega: si.omega_ref + q.detuning * si.gamma_ref,
            position: Position::Meters { meters: q.position * lambda_ref },
            bare_decay: Some(q.bare_decay * si.gamma_ref),
            dephasing: q.dephasing.iter().map(|g| g * si.gamma_ref).collect(),
            anharmonicity: q.anharmonicity * si.gamma_ref,
            levels: q.levels,
            circuit: None,
        })
        .collect();
    Ok(ConfigFile {
        units: Units::Si,
        waveguide: Some(WaveguideConfig { wavespeed: si.wavespeed }),
        reference: Some(n.system.reference + 1),
        scale: None,
        qubits,
        probe: ProbeConfig {
            rabi: n.rabi * si.gamma_ref,
            detuning_grid: n.grid,
        },
    })
}

/// Probe spec for a detuning measured from qubit `axis_ref`'s frequency.
pub fn probe_at(n: &Normalized, axis_ref: usize, axis_detuning: f64) -> ProbeSpec {
    ProbeSpec::new(n.rabi, axis_detuning + n.system.qubits[axis_ref].detuning)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = std::f64::consts::TAU;

    fn natural_json() -> &'static str {
        r#"{
            "units": "natural",
            "qubits": [
                {"omega": 0.0, "position": {"lambda": 0.0}, "bare_decay": 1.0, "dephasing": [0.2]},
                {"omega": 0.0, "position": {"lambda": 1.25}, "bare_decay": 1.0, "dephasing": [0.2]}
            ],
            "probe": {"rabi": 0.01, "detuning_grid": {"min": -6.0, "max": 6.0, "points": 1201}}
        }"#
    }

    #[test]
    fn parses_natural_config() {
        let cfg = ConfigFile::from_json(natural_json()).unwrap();
        let n = to_internal_units(&cfg).unwrap();
        assert_eq!(n.system.n_qubits(), 2);
        assert_eq!(n.system.qubits[1].position, 1.25);
        assert_eq!(n.rabi, 0.01);
        assert_eq!(n.system.inv_scale, 0.0);
    }

    #[test]
    fn lambda_positions_pass_through() {
        let cfg = ConfigFile::from_json(natural_json()).unwrap();
        let n = to_internal_units(&cfg).unwrap();
        assert_eq!(n.system.qubits[1].position, 1.25);
    }

    #[test]
    fn natural_rates_normalize_by_reference() {
        let mut cfg = ConfigFile::from_json(natural_json()).unwrap();
        // give everything in 2pi x MHz instead of gamma0 units
        let g0 = TAU * 17.2e6;
        cfg.qubits[0].bare_decay = Some(g0);
        cfg.qubits[1].bare_decay = Some(g0);
        cfg.qubits[0].dephasing = vec![0.25 * g0];
        cfg.qubits[1].dephasing = vec![0.25 * g0];
        cfg.probe.rabi = 0.01 * g0;
        let n = to_internal_units(&cfg).unwrap();
        assert!((n.system.qubits[0].dephasing[0] - 0.25).abs() < 1e-14);
        assert!((n.rabi - 0.01).abs() < 1e-15);
    }

    fn si_json() -> String {
        let g0 = TAU * 17.2e6;
        format!(
            r#"{{
            "units": "si",
            "waveguide": {{"wavespeed": 8.948e7}},
            "reference": 2,
            "qubits": [
                {{"omega": {w1}, "position": {{"lambda": 0.0}}, "bare_decay": {g0},
                  "dephasing": [{d1l}, {d1u}], "anharmonicity": {a1}, "levels": 3}},
                {{"omega": {w2}, "position": {{"lambda": 1.755}}, "bare_decay": {g0},
                  "dephasing": [{d2l}, {d2u}], "anharmonicity": {a2}, "levels": 3}}
            ],
            "probe": {{"rabi": {rabi}, "detuning_grid": {{"min": -6.0, "max": 6.0, "points": 1201}}}}
        }}"#,
            w1 = TAU * 4.755e9,
            w2 = TAU * 4.759e9,
            g0 = g0,
            d1l = 0.17 * g0,
            d1u = 0.28 * g0,
            d2l = 0.13 * g0,
            d2u = 0.25 * g0,
            a1 = TAU * 406e6,
            a2 = TAU * 324e6,
            rabi = 0.01 * g0,
        )
    }

    #[test]
    fn si_normalization_reproduces_quoted_scales() {
        let cfg = ConfigFile::from_json(&si_json()).unwrap();
        let n = to_internal_units(&cfg).unwrap();
        let si = n.system.si.unwrap();
        // lambda = v/f2 = 18.80 mm
        assert!((si.lambda_ref() - 18.80e-3).abs() < 0.01e-3);
        // qubit 1 sits -4 MHz from the reference
        assert!((n.system.qubits[0].detuning - (-4.0 / 17.2)).abs() < 1e-12);
        // dephasing in gamma0 units
        assert!((n.system.qubits[0].dephasing[1] - 0.28).abs() < 1e-12);
        assert!((n.system.qubits[1].anharmonicity - 324.0 / 17.2).abs() < 1e-9);
        assert!((n.rabi - 0.01).abs() < 1e-12);
        assert_eq!(n.system.reference, 1);
    }

    #[test]
    fn si_round_trip_is_exact() {
        let cfg = ConfigFile::from_json(&si_json()).unwrap();
        let n = to_internal_units(&cfg).unwrap();
        let back = to_si_config(&n).unwrap();
        let n2 = to_internal_units(&back).unwrap();
        for (a, b) in n.system.qubits.iter().zip(n2.system.qubits.iter()) {
            assert!((a.detuning - b.detuning).abs() <= 1e-12 * (1.0 + a.detuning.abs()));
            assert!((a.position - b.position).abs() <= 1e-12 * (1.0 + a.position.abs()));
            assert!((a.bare_decay - b.bare_decay).abs() <= 1e-12 * a.bare_decay.abs());
            for (x, y) in a.dephasing.iter().zip(b.dephasing.iter()) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
            assert!((a.anharmonicity - b.anharmonicity).abs() <= 1e-12 * (1.0 + a.anharmonicity.abs()));
        }
        assert!((n.rabi - n2.rabi).abs() <= 1e-12 * n.rabi.abs());
        assert!((n.system.inv_scale - n2.system.inv_scale).abs() <= 1e-15);
    }

    #[test]
    fn meters_without_wavespeed_is_config_error() {
        let cfg = ConfigFile::from_json(
            r#"{
            "units": "natural",
            "qubits": [{"omega": 0.0, "position": {"meters": 0.01}, "bare_decay": 1.0}],
            "probe": {"rabi": 0.01}
        }"#,
        )
        .unwrap();
        assert!(matches!(to_internal_units(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn empty_qubits_is_config_error() {
        let cfg = ConfigFile::from_json(r#"{"qubits": [], "probe": {"rabi": 0.01}}"#).unwrap();
        assert!(matches!(to_internal_units(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn circuit_bare_decay_consistency_enforced() {
        let g0 = TAU * 17.2e6;
        let w1 = TAU * 4.755e9;
        // g is linear in beta, so solve pi g(w1)^2 = g0 directly
        let ec = 6.62607015e-34 * 250e6;
        let unit = TransmonParams { beta: 1.0, ej: 50.0 * ec, ec, z0: 50.0 };
        let g_unit = unit.coupling_strength(w1).unwrap();
        let beta = (g0 / std::f64::consts::PI).sqrt() / g_unit;
        let consistent = TransmonParams { beta, ej: 50.0 * ec, ec, z0: 50.0 };
        let derived = consistent.bare_decay(w1).unwrap();
        assert!(((derived - g0) / g0).abs() < 1e-10);
        let mk = |bare: f64| {
            format!(
                r#"{{
                "units": "si",
                "waveguide": {{"wavespeed": 8.948e7}},
                "qubits": [{{"omega": {w1}, "position": {{"lambda": 0.0}}, "bare_decay": {bare},
                           "circuit": {{"beta": {beta}, "ej": {ej}, "ec": {ec}, "z0": 50.0}}}}],
                "probe": {{"rabi": 1.0}}
            }}"#,
                w1 = w1,
                bare = bare,
                beta = consistent.beta,
                ej = consistent.ej,
                ec = consistent.ec,
            )
        };
        let good = ConfigFile::from_json(&mk(derived)).unwrap();
        assert!(to_internal_units(&good).is_ok());
        let bad = ConfigFile::from_json(&mk(derived * 1.001)).unwrap();
        assert!(matches!(to_internal_units(&bad), Err(Error::Config(_))));
    }
}
