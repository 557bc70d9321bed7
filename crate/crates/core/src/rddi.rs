//! Mirror-modified dipole-dipole couplings.
//!
//! A qubit at x sees both the real partner at |x_i − x_j| and its mirror
//! image at x_i + x_j, giving the decay rate γ_ij and exchange shift Δ_ij
//! as sums of two trig terms. The two are a Kramers-Kronig pair, which
//! `kk_check` verifies by principal-value quadrature.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::System;

/// Mutual decay rate between qubits at x_i and x_j.
///
/// `kj` is the wavenumber of the mediating transition (radians per unit of
/// the positions); `gamma0_ij` is the bare prefactor.
pub fn gamma_ij(xi: f64, xj: f64, kj: f64, gamma0_ij: f64) -> f64 {
    0.5 * gamma0_ij * ((kj * (xi + xj)).cos() + (kj * (xi - xj).abs()).cos())
}

/// Exchange shift between qubits at x_i and x_j.
pub fn delta_ij(xi: f64, xj: f64, kj: f64, gamma0_ij: f64) -> f64 {
    0.5 * gamma0_ij * ((kj * (xi + xj)).sin() + (kj * (xi - xj).abs()).sin())
}

/// The full set of coupling matrices for one transition manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub gamma: Array2<f64>,
    pub delta: Array2<f64>,
    /// Bare prefactors γ⁰_ij (not symmetric for non-identical circuits).
    pub gamma0: Array2<f64>,
    pub gamma_plus: Array2<f64>,
    pub gamma_minus: Array2<f64>,
    pub delta_plus: Array2<f64>,
    pub delta_minus: Array2<f64>,
}

impl CouplingMatrices {
    fn from_parts(gamma: Array2<f64>, delta: Array2<f64>, gamma0: Array2<f64>) -> Self {
        let gt = gamma.t().to_owned();
        let dt = delta.t().to_owned();
        CouplingMatrices {
            gamma_plus: (&gamma + &gt) * 0.5,
            gamma_minus: (&gamma - &gt) * 0.5,
            delta_plus: (&delta + &dt) * 0.5,
            delta_minus: (&delta - &dt) * 0.5,
            gamma,
            delta,
            gamma0,
        }
    }

    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }
}

/// Bare prefactor γ⁰_ij evaluated at the transition `ratio` = ω/ω_ref of the
/// mediating frequency. Frequency-independent in the direct-γ
/// parameterization; follows g ∝ √ω when circuit parameters are present.
fn gamma0_at(system: &System, i: usize, j: usize, ratio: f64) -> f64 {
    let bi = system.qubits[i].bare_decay;
    let bj = system.qubits[j].bare_decay;
    if system.qubits[i].q_factor.is_some() {
        // gamma_i(w) = bare_i * (w / w_i)
        let ri = system.freq_ratio(i);
        let rj = system.freq_ratio(j);
        (bi * bj / (ri * rj)).sqrt() * ratio
    } else {
        (bi * bj).sqrt()
    }
}

/// Coupling matrices at the fundamental transitions, with k_j = ω_j/v.
pub fn build_couplings(system: &System) -> Result<CouplingMatrices> {
    system.validate()?;
    let n = system.n_qubits();
    let mut gamma = Array2::zeros((n, n));
    let mut delta = Array2::zeros((n, n));
    let mut gamma0 = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let kj = std::f64::consts::TAU * system.freq_ratio(j);
            let g0 = gamma0_at(system, i, j, system.freq_ratio(j));
            let xi = system.qubits[i].position;
            let xj = system.qubits[j].position;
            gamma[[i, j]] = gamma_ij(xi, xj, kj, g0);
            delta[[i, j]] = delta_ij(xi, xj, kj, g0);
            gamma0[[i, j]] = g0;
        }
    }
    Ok(CouplingMatrices::from_parts(gamma, delta, gamma0))
}

/// Per-transition-level coupling matrices for multi-level qubits.
///
/// Slice `n − 1` holds the matrices evaluated at ω_n^j = ω_j − (n−1)α_j,
/// the |n−1⟩→|n⟩ transition of the column qubit. The √n matrix-element
/// enhancements are applied in the master equation, not here.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCouplings {
    pub levels: Vec<CouplingMatrices>,
}

impl LevelCouplings {
    pub fn transition(&self, n: usize) -> &CouplingMatrices {
        &self.levels[n - 1]
    }

    pub fn max_transition(&self) -> usize {
        self.levels.len()
    }
}

pub fn build_level_couplings(system: &System) -> Result<LevelCouplings> {
    system.validate()?;
    let nq = system.n_qubits();
    let d_max = system.max_levels();
    for (i, q) in system.qubits.iter().enumerate() {
        for n in 1..q.levels {
            if system.transition_ratio(i, n) <= 0.0 {
                return Err(Error::Domain(format!(
                    "qubit {i}: transition {n} frequency is not positive (anharmonicity too large)"
                )));
            }
        }
    }
    let mut levels = Vec::with_capacity(d_max - 1);
    for n in 1..d_max {
        let mut gamma = Array2::zeros((nq, nq));
        let mut delta = Array2::zeros((nq, nq));
        let mut gamma0 = Array2::zeros((nq, nq));
        for i in 0..nq {
            for j in 0..nq {
                let ratio = system.transition_ratio(j, n);
                let kj = std::f64::consts::TAU * ratio;
                let g0 = gamma0_at(system, i, j, ratio);
                let xi = system.qubits[i].position;
                let xj = system.qubits[j].position;
                gamma[[i, j]] = gamma_ij(xi, xj, kj, g0);
                delta[[i, j]] = delta_ij(xi, xj, kj, g0);
                gamma0[[i, j]] = g0;
            }
        }
        levels.push(CouplingMatrices::from_parts(gamma, delta, gamma0));
    }
    Ok(LevelCouplings { levels })
}

/// Reconstruct the exchange shift at `omega_eval` from decay-rate samples by
/// the principal-value Hilbert transform Δ(ω) = (1/π) PV ∫ γ(ω′)/(ω−ω′) dω′.
///
/// `omega_grid` must be uniform with `omega_eval` on an interior grid point;
/// the singular point is excluded symmetrically and the skip-rule bias
/// h·γ′(ω) is cancelled with a central difference.
pub fn kk_check(omega_grid: &[f64], gamma_samples: &[f64], omega_eval: f64) -> Result<f64> {
    let n = omega_grid.len();
    if n < 16 || gamma_samples.len() != n {
        return Err(Error::Resolution(
            "need a sample grid with at least 16 matching points".into(),
        ));
    }
    let h = omega_grid[1] - omega_grid[0];
    if h <= 0.0 {
        return Err(Error::Resolution("grid must be strictly increasing".into()));
    }
    for k in 1..n {
        if ((omega_grid[k] - omega_grid[k - 1]) - h).abs() > 1e-9 * h {
            return Err(Error::Resolution("grid must be uniform".into()));
        }
    }
    let k0f = (omega_eval - omega_grid[0]) / h;
    let k0 = k0f.round() as usize;
    if k0f.round() < 1.0 || k0 >= n - 1 || (k0f - k0f.round()).abs() > 1e-6 {
        return Err(Error::Resolution(
            "omega_eval must sit on an interior grid point".into(),
        ));
    }
    // oscillation diagnostics from sign changes around the sample mean
    let mean = gamma_samples.iter().sum::<f64>() / n as f64;
    let amp = gamma_samples
        .iter()
        .map(|g| (g - mean).abs())
        .fold(0.0_f64, f64::max);
    if amp > 1e-12 * (1.0 + mean.abs()) {
        let mut crossings = 0usize;
        let mut last = 0.0_f64;
        for g in gamma_samples {
            let s = g - mean;
            if s != 0.0 {
                if last != 0.0 && s.signum() != last.signum() {
                    crossings += 1;
                }
                last = s;
            }
        }
        if crossings >= 2 && crossings < 80 {
            return Err(Error::Resolution(format!(
                "window spans only ~{} oscillation periods (need >= 40)",
                crossings / 2
            )));
        }
        if crossings >= 80 && n < 2 * crossings {
            return Err(Error::Resolution(
                "fewer than 4 sample points per oscillation period".into(),
            ));
        }
    }
    let mut s = 0.0;
    for k in 0..n {
        if k == k0 {
            continue;
        }
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        s += w * gamma_samples[k] / (omega_eval - omega_grid[k]) * h;
    }
    s -= 0.5 * (gamma_samples[k0 + 1] - gamma_samples[k0 - 1]);
    Ok(s / std::f64::consts::PI)
}

/// Default quadrature window (γ_ref units of frequency) and sample count.
pub const KK_DEFAULT_WINDOW: f64 = 200.0;
pub const KK_DEFAULT_POINTS: usize = 8192;

/// Sample γ_ij over a frequency window and reconstruct Δ_ij through
/// [`kk_check`]; returns `(reconstructed, direct)` for comparison.
///
/// The continuum samples use a synthetic frequency scale chosen so the
/// window spans at least 50 oscillation periods of the image term (the KK
/// pair relation holds for any scale), pinned so the wavenumber at
/// `omega_eval` matches the system's k_j exactly.
pub fn kk_reconstruct_shift(
    system: &System,
    i: usize,
    j: usize,
    window: f64,
    points: usize,
) -> Result<(f64, f64)> {
    let n = if points % 2 == 0 { points + 1 } else { points };
    let xi = system.qubits[i].position;
    let xj = system.qubits[j].position;
    let span = (xi + xj).max((xi - xj).abs());
    let ratio_j = system.freq_ratio(j);
    // d(k x)/dw' = 2 pi * inv * x; want >= 50 periods over the window
    let inv = if span > 1e-9 { 50.0 / (window * span) } else { 0.2 };
    let g0 = gamma0_at(system, i, j, ratio_j);
    let omega_eval = 0.0; // offsets cancel; only w - w' enters
    let grid: Vec<f64> = (0..n)
        .map(|k| -window / 2.0 + window * k as f64 / (n - 1) as f64)
        .collect();
    let samples: Vec<f64> = grid
        .iter()
        .map(|&w| {
            let k = std::f64::consts::TAU * (ratio_j + (w - omega_eval) * inv);
            gamma_ij(xi, xj, k, g0)
        })
        .collect();
    let rec = kk_check(&grid, &samples, omega_eval)?;
    let direct = delta_ij(xi, xj, std::f64::consts::TAU * ratio_j, g0);
    Ok((rec, direct))
}
