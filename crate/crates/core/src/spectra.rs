//! Reflection spectra: per-point reflection coefficients, detuning scans,
//! and extraction of the split features (dip positions, δ_split, r_mid).

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::liouville::{build_master, build_master_multilevel};
use crate::model::{ProbeSpec, System};
use crate::rddi::{build_couplings, build_level_couplings};
use crate::solve::{coherences, coherences_multilevel, steady_state, weakfield_steady};

/// Which solver backs each scan point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Full,
    WeakField,
    MultiLevel,
}

impl std::fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverChoice::Full => write!(f, "full"),
            SolverChoice::WeakField => write!(f, "weakfield"),
            SolverChoice::MultiLevel => write!(f, "multilevel"),
        }
    }
}

/// Reflection coefficient from steady-state coherences (two-level form):
/// r = |1 + i Σ_i (2 η_Ni γ_i / Ω_p^N) cos(k_p x_i) ⟨σ_i⁻⟩|
/// with γ_i the bare (position-independent) rate.
pub fn reflection(coh: &[C64], system: &System, probe: &ProbeSpec) -> Result<f64> {
    if probe.rabi <= 0.0 {
        return Err(Error::Domain("reflection needs a positive probe amplitude".into()));
    }
    let mut acc = C64::new(0.0, 0.0);
    for (i, c) in coh.iter().enumerate() {
        let eta = system.eta(i)?;
        let weight = 2.0 * eta * system.qubits[i].bare_decay * system.probe_mode(i, probe);
        acc += C64::new(weight / probe.rabi, 0.0) * c;
    }
    Ok((C64::new(1.0, 0.0) + C64::new(0.0, 1.0) * acc).norm())
}

/// Multi-level reflection from per-transition coherences ⟨σ_{n−1,n}^i⟩
/// weighted by √n and the bare rate of each ladder transition.
pub fn reflection_multilevel(
    coh: &[Vec<C64>],
    system: &System,
    probe: &ProbeSpec,
) -> Result<f64> {
    if probe.rabi <= 0.0 {
        return Err(Error::Domain("reflection needs a positive probe amplitude".into()));
    }
    let mut acc = C64::new(0.0, 0.0);
    for (i, per_level) in coh.iter().enumerate() {
        let eta = system.eta(i)?;
        let mode = system.probe_mode(i, probe);
        for (k, c) in per_level.iter().enumerate() {
            let n = k + 1;
            // bare rate of the |n-1> -> |n> transition: follows g ∝ √ω for
            // circuit-parameterized qubits, frequency-independent otherwise
            let bare = if system.qubits[i].q_factor.is_some() {
                system.qubits[i].bare_decay * system.transition_ratio(i, n)
                    / system.freq_ratio(i)
            } else {
                system.qubits[i].bare_decay
            };
            let weight = 2.0 * eta * bare * (n as f64).sqrt() * mode;
            acc += C64::new(weight / probe.rabi, 0.0) * c;
        }
    }
    Ok((C64::new(1.0, 0.0) + C64::new(0.0, 1.0) * acc).norm())
}

/// One failed scan point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    pub detuning: f64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveMeta {
    pub solver: SolverChoice,
    pub rabi: f64,
    /// Qubit whose frequency defines δ = 0 on the detuning axis.
    pub axis_reference: usize,
    pub config_hash: String,
    /// Probe beyond 0.5γ₀: the coherent reflection formula omits inelastic
    /// components there.
    pub strong_probe_warning: bool,
}

/// A sampled reflection spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub detuning: Vec<f64>,
    pub r: Vec<f64>,
    /// Symmetric/antisymmetric single-excitation populations (N = 2 only).
    pub rho_ss: Option<Vec<f64>>,
    pub rho_aa: Option<Vec<f64>>,
    pub failures: Vec<PointFailure>,
    pub meta: CurveMeta,
}

struct PointData {
    r: f64,
    rho_ss: Option<f64>,
    rho_aa: Option<f64>,
}

fn sa_populations_full(
    sop: &crate::liouville::Superoperator,
    rho: &crate::solve::DensityMatrix,
) -> Option<(f64, f64)> {
    let hs = &sop.space;
    if hs.dims.len() != 2 {
        return None;
    }
    let dim = hs.dim();
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut s: Array1<C64> = Array1::zeros(dim);
    let mut a: Array1<C64> = Array1::zeros(dim);
    s[hs.index(&[1, 0])] = C64::new(inv, 0.0);
    s[hs.index(&[0, 1])] = C64::new(inv, 0.0);
    a[hs.index(&[1, 0])] = C64::new(inv, 0.0);
    a[hs.index(&[0, 1])] = C64::new(-inv, 0.0);
    Some((rho.population_of(&s), rho.population_of(&a)))
}

/// Hash of the physics-relevant inputs; identical configurations produce
/// identical hashes across runs and platforms.
pub fn physics_hash(system: &System, rabi: f64, grid: &[f64], solver: SolverChoice) -> String {
    #[derive(Serialize)]
    struct Payload<'a> {
        system: &'a System,
        rabi: f64,
        grid: &'a [f64],
        solver: SolverChoice,
    }
    let text = serde_json::to_string(&Payload { system, rabi, grid, solver })
        .expect("hash payload serializes");
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Scan a detuning grid, one steady-state solve per point.
///
/// `axis_reference` picks the qubit whose frequency defines δ = 0 (defaults
/// to the mirror-side qubit, the one closest to x = 0). Points solve
/// independently in parallel and merge in grid order; per-point failures are
/// collected without aborting the scan.
pub fn scan(
    system: &System,
    rabi: f64,
    grid: &[f64],
    solver: SolverChoice,
    axis_reference: Option<usize>,
) -> Result<SpectrumCurve> {
    system.validate()?;
    if grid.is_empty() {
        return Err(Error::Config("empty detuning grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("detuning grid must be strictly increasing".into()));
    }
    let axis_ref = axis_reference.unwrap_or_else(|| {
        let mut best = 0;
        for (i, q) in system.qubits.iter().enumerate() {
            if q.position < system.qubits[best].position {
                best = i;
            }
        }
        best
    });
    let axis_offset = system.qubits[axis_ref].detuning;
    let couplings = build_couplings(system)?;
    let level_couplings = match solver {
        SolverChoice::MultiLevel => Some(build_level_couplings(system)?),
        _ => None,
    };
    let results: Vec<std::result::Result<PointData, String>> = grid
        .par_iter()
        .map(|&axis_det| {
            let probe = ProbeSpec::new(rabi, axis_det + axis_offset);
            let run = || -> Result<PointData> {
                match solver {
                    SolverChoice::Full => {
                        let sop = build_master(system, &couplings, &probe)?;
                        let rho = steady_state(&sop)?;
                        let coh = coherences(&sop, &rho);
                        let r = reflection(&coh, system, &probe)?;
                        let sa = sa_populations_full(&sop, &rho);
                        Ok(PointData {
                            r,
                            rho_ss: sa.map(|p| p.0),
                            rho_aa: sa.map(|p| p.1),
                        })
                    }
                    SolverChoice::WeakField => {
                        let amp = weakfield_steady(system, &couplings, &probe)?;
                        let r = reflection(&amp.sites, system, &probe)?;
                        let (ss, aa) = if system.n_qubits() == 2 {
                            (Some(amp.c_s().norm_sqr()), Some(amp.c_a().norm_sqr()))
                        } else {
                            (None, None)
                        };
                        Ok(PointData { r, rho_ss: ss, rho_aa: aa })
                    }
                    SolverChoice::MultiLevel => {
                        let lev = level_couplings.as_ref().expect("level couplings built");
                        let sop = build_master_multilevel(system, lev, &probe)?;
                        let rho = steady_state(&sop)?;
                        let coh = coherences_multilevel(&sop, &rho);
                        let r = reflection_multilevel(&coh, system, &probe)?;
                        let sa = sa_populations_full(&sop, &rho);
                        Ok(PointData {
                            r,
                            rho_ss: sa.map(|p| p.0),
                            rho_aa: sa.map(|p| p.1),
                        })
                    }
                }
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let n = grid.len();
    let mut r = Vec::with_capacity(n);
    let mut rho_ss = Vec::with_capacity(n);
    let mut rho_aa = Vec::with_capacity(n);
    let mut have_pops = true;
    let mut failures = Vec::new();
    for (idx, res) in results.into_iter().enumerate() {
        match res {
            Ok(p) => {
                r.push(p.r);
                match (p.rho_ss, p.rho_aa) {
                    (Some(s), Some(a)) => {
                        rho_ss.push(s);
                        rho_aa.push(a);
                    }
                    _ => have_pops = false,
                }
            }
            Err(message) => {
                r.push(f64::NAN);
                rho_ss.push(f64::NAN);
                rho_aa.push(f64::NAN);
                failures.push(PointFailure { index: idx, detuning: grid[idx], message });
            }
        }
    }
    let meta = CurveMeta {
        solver,
        rabi,
        axis_reference: axis_ref,
        config_hash: physics_hash(system, rabi, grid, solver),
        strong_probe_warning: rabi > 0.5,
    };
    Ok(SpectrumCurve {
        detuning: grid.to_vec(),
        r,
        rho_ss: have_pops.then_some(rho_ss),
        rho_aa: have_pops.then_some(rho_aa),
        failures,
        meta,
    })
}

/// One extracted dip.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Dip {
    pub position: f64,
    pub r_min: f64,
    /// Depth below the lower of the two neighboring maxima.
    pub depth: f64,
    /// Full width at half depth.
    pub width: f64,
}

/// Split features of a spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitFeatures {
    pub dips: Vec<Dip>,
    /// Positions of the two deepest dips, ordered; present when both exist.
    pub delta_minus: Option<f64>,
    pub delta_plus: Option<f64>,
    /// |δ₊ − δ₋|; 0 when fewer than two dips were found.
    pub delta_split: f64,
    /// Interpolated r(δ = 0).
    pub r_mid: f64,
    /// False when fewer than two dips were found.
    pub split_found: bool,
}

pub const DIP_PROMINENCE_DEFAULT: f64 = 0.02;

pub fn extract_features(curve: &SpectrumCurve) -> Result<SplitFeatures> {
    extract_features_with(curve, DIP_PROMINENCE_DEFAULT)
}

pub fn extract_features_with(curve: &SpectrumCurve, prominence: f64) -> Result<SplitFeatures> {
    let d = &curve.detuning;
    let r = &curve.r;
    let n = d.len();
    if n < 8 {
        return Err(Error::Resolution("need at least 8 scan points".into()));
    }
    if r.iter().any(|v| v.is_nan()) {
        return Err(Error::Resolution(
            "curve contains failed points; re-run the scan".into(),
        ));
    }
    let h = d[1] - d[0];
    if h > 1.0 / 8.0 + 1e-12 {
        return Err(Error::Resolution(format!(
            "grid spacing {h:.3} too coarse: need >= 8 points per unit rate"
        )));
    }
    let mut dips = Vec::new();
    for k in 1..n - 1 {
        if !(r[k] < r[k - 1] && r[k] < r[k + 1]) {
            continue;
        }
        // prominence: highest level reached on each side before descending
        // below r[k]
        let mut left_max = r[k];
        for j in (0..k).rev() {
            left_max = left_max.max(r[j]);
            if r[j] < r[k] {
                break;
            }
        }
        let mut right_max = r[k];
        for j in k + 1..n {
            right_max = right_max.max(r[j]);
            if r[j] < r[k] {
                break;
            }
        }
        let ref_level = left_max.min(right_max);
        let prom = ref_level - r[k];
        if prom < prominence {
            continue;
        }
        // parabolic refinement through the three points around the minimum
        let denom = r[k - 1] - 2.0 * r[k] + r[k + 1];
        let (pos, r_min) = if denom.abs() > 1e-300 {
            let off = 0.5 * (r[k - 1] - r[k + 1]) / denom;
            (
                d[k] + off * h,
                r[k] - 0.125 * (r[k - 1] - r[k + 1]).powi(2) / denom,
            )
        } else {
            (d[k], r[k])
        };
        let depth = ref_level - r_min;
        // full width at half depth via linear interpolation outward
        let half = r_min + 0.5 * depth;
        let mut wl = d[0];
        for j in (0..k).rev() {
            if r[j] >= half {
                let t = (half - r[j + 1]) / (r[j] - r[j + 1]);
                wl = d[j + 1] + t * (d[j] - d[j + 1]);
                break;
            }
        }
        let mut wr = d[n - 1];
        for j in k + 1..n {
            if r[j] >= half {
                let t = (half - r[j - 1]) / (r[j] - r[j - 1]);
                wr = d[j - 1] + t * (d[j] - d[j - 1]);
                break;
            }
        }
        dips.push(Dip { position: pos, r_min, depth, width: wr - wl });
    }
    // r_mid by linear interpolation at delta = 0
    let r_mid = if d[0] <= 0.0 && d[n - 1] >= 0.0 {
        let k = d.partition_point(|&x| x < 0.0).min(n - 1).max(1);
        let t = (0.0 - d[k - 1]) / (d[k] - d[k - 1]);
        r[k - 1] + t * (r[k] - r[k - 1])
    } else {
        return Err(Error::Resolution("grid does not bracket delta = 0".into()));
    };
    let mut deepest: Vec<&Dip> = dips.iter().collect();
    deepest.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    let (delta_minus, delta_plus, delta_split, split_found) = if deepest.len() >= 2 {
        let mut pair = [deepest[0].position, deepest[1].position];
        pair.sort_by(f64::total_cmp);
        (Some(pair[0]), Some(pair[1]), pair[1] - pair[0], true)
    } else {
        (None, None, 0.0, false)
    };
    Ok(SplitFeatures { dips, delta_minus, delta_plus, delta_split, r_mid, split_found })
}

/// Fixed-format value with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// CSV export with the fixed header and 12-significant-digit values.
pub fn write_csv<W: std::io::Write>(curve: &SpectrumCurve, w: &mut W) -> std::io::Result<()> {
    write!(w, "detuning_over_gamma0,r,rho_ss,rho_aa\n")?;
    for k in 0..curve.detuning.len() {
        let ss = curve.rho_ss.as_ref().map_or(f64::NAN, |v| v[k]);
        let aa = curve.rho_aa.as_ref().map_or(f64::NAN, |v| v[k]);
        write!(
            w,
            "{},{},{},{}\n",
            fmt_sig(curve.detuning[k]),
            fmt_sig(curve.r[k]),
            fmt_sig(ss),
            fmt_sig(aa)
        )?;
    }
    Ok(())
}

/// JSON sidecar: configuration, features, and curve metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub system: System,
    pub rabi: f64,
    pub meta: CurveMeta,
    pub features: SplitFeatures,
    pub failures: Vec<PointFailure>,
}

impl Sidecar {
    pub fn from_curve(system: &System, curve: &SpectrumCurve) -> Result<Sidecar> {
        let features = extract_features(curve)?;
        Ok(Sidecar {
            system: system.clone(),
            rabi: curve.meta.rabi,
            meta: curve.meta.clone(),
            features,
            failures: curve.failures.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Sidecar> {
        Ok(serde_json::from_str(text)?)
    }
}
