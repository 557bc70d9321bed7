//! Giant-atom reduction for arrays pinned to nodes and antinodes.
//!
//! Maximal runs of same-kind qubits collapse to collective two-level
//! "giant atoms": an antinode group of size n carries decay nγ₀ and drive
//! enhancement √n, node groups are dark and undriven, and exchange √(nn′)γ₀
//! survives only from an antinode group to a node group farther from the
//! mirror (the image and direct sine terms cancel in the other order).

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::System;
use crate::spectra::{CurveMeta, SolverChoice, SpectrumCurve};

/// Position tolerance for exact-grid classification, in λ.
pub const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Antinode,
    Node,
}

/// One collective group of same-kind qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub kind: GroupKind,
    /// 0-based indices into the original array, in position order.
    pub members: Vec<usize>,
    pub positions: Vec<f64>,
    /// (−1)^(2x/λ) at antinodes, (−1)^(2x/λ − 1/2) at nodes.
    pub signs: Vec<f64>,
}

impl Group {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// The reduced alternating antinode/node description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiantAtomScheme {
    pub groups: Vec<Group>,
    /// Common bare decay of the array (γ_ref units).
    pub gamma0: f64,
}

impl GiantAtomScheme {
    /// Amplitude decay of group j: n_jγ₀ for antinode groups, 0 for nodes.
    pub fn decay(&self, j: usize) -> f64 {
        match self.groups[j].kind {
            GroupKind::Antinode => self.groups[j].size() as f64 * self.gamma0,
            GroupKind::Node => 0.0,
        }
    }

    /// Collective coupling enhancement √n_j.
    pub fn enhancement(&self, j: usize) -> f64 {
        (self.groups[j].size() as f64).sqrt()
    }

    /// Exchange coupling between groups (γ_ref units); nonzero only from an
    /// antinode group to a node group farther from the mirror.
    pub fn exchange(&self, j: usize, jp: usize) -> f64 {
        if j == jp {
            return 0.0;
        }
        let (lo, hi) = (j.min(jp), j.max(jp));
        match (self.groups[lo].kind, self.groups[hi].kind) {
            (GroupKind::Antinode, GroupKind::Node) => {
                self.gamma0 * self.enhancement(lo) * self.enhancement(hi)
            }
            _ => 0.0,
        }
    }

    /// Mutual decay between two antinode groups (γ_ref units).
    pub fn mutual_decay(&self, j: usize, jp: usize) -> f64 {
        if j == jp {
            return 0.0;
        }
        match (self.groups[j].kind, self.groups[jp].kind) {
            (GroupKind::Antinode, GroupKind::Antinode) => {
                self.gamma0 * self.enhancement(j) * self.enhancement(jp)
            }
            _ => 0.0,
        }
    }

    pub fn antinode_count(&self) -> usize {
        self.groups
            .iter()
            .filter(|g| g.kind == GroupKind::Antinode)
            .map(Group::size)
            .sum()
    }

    pub fn node_count(&self) -> usize {
        self.groups
            .iter()
            .filter(|g| g.kind == GroupKind::Node)
            .map(Group::size)
            .sum()
    }
}

impl std::fmt::Display for GiantAtomScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (j, g) in self.groups.iter().enumerate() {
            let label = match g.kind {
                GroupKind::Antinode => 'A',
                GroupKind::Node => 'B',
            };
            let members: Vec<String> = g.members.iter().map(|m| (m + 1).to_string()).collect();
            let signs: Vec<&str> = g.signs.iter().map(|&s| if s > 0.0 { "+" } else { "-" }).collect();
            let pos: Vec<String> = g.positions.iter().map(|p| format!("{p}")).collect();
            write!(
                f,
                "[{label}{}] {:?} n={} qubits {{{}}} at x/lambda = {} signs ({})",
                j + 1,
                g.kind,
                g.size(),
                members.join(","),
                pos.join(", "),
                signs.join(",")
            )?;
            if g.kind == GroupKind::Antinode {
                write!(
                    f,
                    "  decay {}*gamma0, drive enhancement sqrt({})",
                    g.size(),
                    g.size()
                )?;
            }
            writeln!(f)?;
            for jp in j + 1..self.groups.len() {
                let ex = self.exchange(j, jp);
                if ex != 0.0 {
                    writeln!(
                        f,
                        "    exchange sqrt({})*gamma0 -> [{}{}]",
                        self.groups[j].size() * self.groups[jp].size(),
                        match self.groups[jp].kind {
                            GroupKind::Antinode => 'A',
                            GroupKind::Node => 'B',
                        },
                        jp + 1
                    )?;
                }
                let md = self.mutual_decay(j, jp);
                if md != 0.0 {
                    writeln!(
                        f,
                        "    mutual decay sqrt({})*gamma0 <-> [A{}]",
                        self.groups[j].size() * self.groups[jp].size(),
                        jp + 1
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn classify_one(index: usize, x: f64) -> Result<(GroupKind, f64)> {
    let quarters = 4.0 * x;
    let k = quarters.round();
    let dist = (x - k / 4.0).abs();
    if dist > GRID_TOL {
        return Err(Error::OffGrid { index, position: x, distance: dist });
    }
    let k = k as i64;
    if k.rem_euclid(2) == 0 {
        // antinode: sign (−1)^(2x/λ) = (−1)^(k/2)
        let sign = if (k / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        Ok((GroupKind::Antinode, sign))
    } else {
        // node: sign (−1)^(2x/λ − 1/2) = (−1)^((k−1)/2)
        let sign = if ((k - 1) / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        Ok((GroupKind::Node, sign))
    }
}

/// Classify positions (λ units) and group maximal same-kind runs.
pub fn classify_and_group(positions: &[f64]) -> Result<GiantAtomScheme> {
    classify_and_group_with_gamma(positions, 1.0)
}

pub fn classify_and_group_with_gamma(
    positions: &[f64],
    gamma0: f64,
) -> Result<GiantAtomScheme> {
    if positions.is_empty() {
        return Err(Error::Config("no positions to classify".into()));
    }
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
    let mut groups: Vec<Group> = Vec::new();
    for &idx in &order {
        let (kind, sign) = classify_one(idx, positions[idx])?;
        match groups.last_mut() {
            Some(g) if g.kind == kind => {
                g.members.push(idx);
                g.positions.push(positions[idx]);
                g.signs.push(sign);
            }
            _ => groups.push(Group {
                kind,
                members: vec![idx],
                positions: vec![positions[idx]],
                signs: vec![sign],
            }),
        }
    }
    Ok(GiantAtomScheme { groups, gamma0 })
}

/// Build the scheme from a system of identical on-grid qubits.
pub fn scheme_from_system(system: &System) -> Result<GiantAtomScheme> {
    system.validate()?;
    let g0 = system.qubits[0].bare_decay;
    for (i, q) in system.qubits.iter().enumerate() {
        if (q.bare_decay - g0).abs() > 1e-12 * g0.max(1.0) || q.detuning != system.qubits[0].detuning
        {
            return Err(Error::Config(format!(
                "reduction needs identical qubits; qubit {} differs",
                i + 1
            )));
        }
        if q.levels != 2 {
            return Err(Error::Config("reduction covers two-level qubits".into()));
        }
    }
    let positions: Vec<f64> = system.qubits.iter().map(|q| q.position).collect();
    classify_and_group_with_gamma(&positions, g0)
}

/// Snap positions to the nearest quarter-wavelength; returns the snapped
/// values and (index, shift) pairs for every moved qubit.
pub fn snap_positions(positions: &[f64]) -> (Vec<f64>, Vec<(usize, f64)>) {
    let mut snapped = Vec::with_capacity(positions.len());
    let mut moved = Vec::new();
    for (i, &x) in positions.iter().enumerate() {
        let s = (4.0 * x).round() / 4.0;
        if (s - x).abs() > GRID_TOL {
            moved.push((i, s - x));
        }
        snapped.push(s);
    }
    (snapped, moved)
}

/// Dephasing-free splitting law: δ_split = 2√(n₁n₂)γ₀.
pub fn predicted_splitting(n1: usize, n2: usize, gamma0: f64) -> f64 {
    2.0 * ((n1 * n2) as f64).sqrt() * gamma0
}

fn scheme_hash(scheme: &GiantAtomScheme, dephasing: &[f64], rabi: f64, grid: &[f64]) -> String {
    #[derive(Serialize)]
    struct Payload<'a> {
        scheme: &'a GiantAtomScheme,
        dephasing: &'a [f64],
        rabi: f64,
        grid: &'a [f64],
    }
    let text = serde_json::to_string(&Payload { scheme, dephasing, rabi, grid })
        .expect("hash payload serializes");
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Weak-field spectrum of the reduced few-body system.
///
/// `dephasing` carries one rate per group (the per-qubit rate, not
/// collectively enhanced). Matches the full N-qubit weak-field scan on
/// every all-on-grid configuration.
pub fn reduced_spectrum(
    scheme: &GiantAtomScheme,
    dephasing: &[f64],
    rabi: f64,
    grid: &[f64],
) -> Result<SpectrumCurve> {
    let m = scheme.groups.len();
    if dephasing.len() != m {
        return Err(Error::Config(format!(
            "need one dephasing rate per group ({m}), got {}",
            dephasing.len()
        )));
    }
    if rabi <= 0.0 {
        return Err(Error::Domain("reduced spectrum needs a positive probe".into()));
    }
    let mut r_vals = Vec::with_capacity(grid.len());
    for &delta in grid {
        let mut mm: Array2<C64> = Array2::zeros((m, m));
        let mut drive: Array1<C64> = Array1::zeros(m);
        for j in 0..m {
            mm[[j, j]] = C64::new(scheme.decay(j) + dephasing[j], -delta);
            for jp in 0..m {
                if jp == j {
                    continue;
                }
                let ex = scheme.exchange(j, jp);
                if ex != 0.0 {
                    mm[[j, jp]] += C64::new(0.0, ex);
                }
                let md = scheme.mutual_decay(j, jp);
                if md != 0.0 {
                    mm[[j, jp]] += C64::new(md, 0.0);
                }
            }
            if scheme.groups[j].kind == GroupKind::Antinode {
                drive[j] = C64::new(0.0, scheme.enhancement(j) * rabi);
            }
        }
        let c = mm
            .solve(&drive)
            .map_err(|e| Error::Singular(format!("reduced system is singular: {e}")))?;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..m {
            if scheme.groups[j].kind == GroupKind::Antinode {
                acc += C64::new(2.0 * scheme.gamma0 * scheme.enhancement(j) / rabi, 0.0) * c[j];
            }
        }
        r_vals.push((C64::new(1.0, 0.0) + C64::new(0.0, 1.0) * acc).norm());
    }
    Ok(SpectrumCurve {
        detuning: grid.to_vec(),
        r: r_vals,
        rho_ss: None,
        rho_aa: None,
        failures: Vec::new(),
        meta: CurveMeta {
            solver: SolverChoice::WeakField,
            rabi,
            axis_reference: 0,
            config_hash: scheme_hash(scheme, dephasing, rabi, grid),
            strong_probe_warning: rabi > 0.5,
        },
    })
}
