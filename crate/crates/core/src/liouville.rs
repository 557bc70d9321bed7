//! Master-equation generators as vectorized linear operators.
//!
//! Density matrices are column-stacked: vec(ρ)[r + dim·c] = ρ[r, c], so
//! AρB ↦ (Bᵀ ⊗ A) vec(ρ). Generators come out dense below
//! [`DENSE_DIM_LIMIT`] and as CSR above it.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{Csr, SparseOp};
use crate::model::{ProbeSpec, System};
use crate::rddi::{CouplingMatrices, LevelCouplings};

/// Hilbert dimension above which generators are stored sparse.
pub const DENSE_DIM_LIMIT: usize = 64;

/// Tensor-product space with qubit 1 as the slowest index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    pub dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>) -> Self {
        HilbertSpace { dims }
    }

    pub fn from_system(system: &System) -> Self {
        HilbertSpace::new(system.qubits.iter().map(|q| q.levels).collect())
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn stride(&self, site: usize) -> usize {
        self.dims[site + 1..].iter().product()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dims.len());
        multi
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&m, &d)| acc * d + m)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for site in (0..self.dims.len()).rev() {
            out[site] = idx % self.dims[site];
            idx /= self.dims[site];
        }
        out
    }

    /// Embed the local operator |a⟩⟨b| of `site` into the product space.
    pub fn transition_op(&self, site: usize, a: usize, b: usize) -> SparseOp {
        let dim = self.dim();
        let d = self.dims[site];
        debug_assert!(a < d && b < d);
        let stride = self.stride(site);
        let outer = dim / (d * stride);
        let mut entries = Vec::with_capacity(outer * stride);
        for pre in 0..outer {
            for suf in 0..stride {
                let base = pre * d * stride + suf;
                entries.push((base + a * stride, base + b * stride, C64::new(1.0, 0.0)));
            }
        }
        SparseOp { dim, entries }
    }
}

#[derive(Debug, Clone)]
enum GeneratorStorage {
    Dense(Array2<C64>),
    Sparse(Csr),
}

/// Storage selection for generator builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StoragePolicy {
    /// Dense when dim ≤ [`DENSE_DIM_LIMIT`], sparse beyond.
    #[default]
    Auto,
    Dense,
    Sparse,
}

/// The vectorized master-equation generator.
#[derive(Debug, Clone)]
pub struct Superoperator {
    pub space: HilbertSpace,
    storage: GeneratorStorage,
    /// Smallest eigenvalue of the (Hermitian) dissipator coefficient matrix;
    /// negative values flag non-Lindblad configurations.
    pub dissipator_min_eig: f64,
    /// Largest dissipator eigenvalue, for scale-aware tolerance checks.
    pub dissipator_max_eig: f64,
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn vec_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, GeneratorStorage::Dense(_))
    }

    /// The generator passes the Lindblad positive-semidefiniteness check.
    pub fn is_lindblad(&self) -> bool {
        self.dissipator_min_eig >= -1e-12 * self.dissipator_max_eig.max(1.0)
    }

    pub fn dense(&self) -> Option<&Array2<C64>> {
        match &self.storage {
            GeneratorStorage::Dense(m) => Some(m),
            GeneratorStorage::Sparse(_) => None,
        }
    }

    pub fn sparse(&self) -> Option<&Csr> {
        match &self.storage {
            GeneratorStorage::Sparse(m) => Some(m),
            GeneratorStorage::Dense(_) => None,
        }
    }

    /// Materialize the generator densely regardless of storage.
    pub fn to_dense(&self) -> Array2<C64> {
        match &self.storage {
            GeneratorStorage::Dense(m) => m.clone(),
            GeneratorStorage::Sparse(m) => {
                let n = self.vec_dim();
                let mut out = Array2::zeros((n, n));
                for r in 0..n {
                    for k in m.indptr[r]..m.indptr[r + 1] {
                        out[[r, m.indices[k]]] = m.data[k];
                    }
                }
                out
            }
        }
    }

    pub fn apply_vec(&self, v: &Array1<C64>) -> Array1<C64> {
        match &self.storage {
            GeneratorStorage::Dense(m) => m.dot(v),
            GeneratorStorage::Sparse(m) => m.matvec(v),
        }
    }

    /// Apply to a density matrix: dρ/dt.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let dim = self.dim();
        let v = vectorize(rho);
        let out = self.apply_vec(&v);
        unvectorize(&out, dim)
    }

    pub fn frob_norm(&self) -> f64 {
        match &self.storage {
            GeneratorStorage::Dense(m) => crate::linalg::frob_norm(m),
            GeneratorStorage::Sparse(m) => m.frob_norm(),
        }
    }

    /// Dump the generator as `row col re im` triplet lines.
    pub fn write_triplets<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        match &self.storage {
            GeneratorStorage::Dense(m) => {
                for ((r, c), v) in m.indexed_iter() {
                    if v.norm_sqr() > 0.0 {
                        writeln!(w, "{} {} {:.17e} {:.17e}", r, c, v.re, v.im)?;
                    }
                }
            }
            GeneratorStorage::Sparse(m) => {
                for r in 0..m.nrows {
                    for k in m.indptr[r]..m.indptr[r + 1] {
                        let v = m.data[k];
                        writeln!(w, "{} {} {:.17e} {:.17e}", r, m.indices[k], v.re, v.im)?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn vectorize(rho: &Array2<C64>) -> Array1<C64> {
    let dim = rho.nrows();
    let mut v = Array1::zeros(dim * dim);
    for c in 0..dim {
        for r in 0..dim {
            v[r + dim * c] = rho[[r, c]];
        }
    }
    v
}

pub fn unvectorize(v: &Array1<C64>, dim: usize) -> Array2<C64> {
    let mut rho = Array2::zeros((dim, dim));
    for c in 0..dim {
        for r in 0..dim {
            rho[[r, c]] = v[r + dim * c];
        }
    }
    rho
}

/// Accumulates superoperator triplets from operator-level terms.
struct GeneratorBuilder {
    dim: usize,
    triplets: Vec<(usize, usize, C64)>,
}

impl GeneratorBuilder {
    fn new(dim: usize) -> Self {
        GeneratorBuilder { dim, triplets: Vec::new() }
    }

    /// coeff · Aρ
    fn left(&mut self, coeff: C64, a: &SparseOp) {
        let dim = self.dim;
        for &(r, c, v) in &a.entries {
            for blk in 0..dim {
                self.triplets.push((r + dim * blk, c + dim * blk, coeff * v));
            }
        }
    }

    /// coeff · ρB
    fn right(&mut self, coeff: C64, b: &SparseOp) {
        let dim = self.dim;
        for &(cp, c, v) in &b.entries {
            for r in 0..dim {
                self.triplets.push((r + dim * c, r + dim * cp, coeff * v));
            }
        }
    }

    /// coeff · AρB
    fn sandwich(&mut self, coeff: C64, a: &SparseOp, b: &SparseOp) {
        let dim = self.dim;
        for &(r, rp, va) in &a.entries {
            for &(cp, c, vb) in &b.entries {
                self.triplets.push((r + dim * c, rp + dim * cp, coeff * va * vb));
            }
        }
    }

    /// coeff · [H, ρ]
    fn commutator(&mut self, coeff: C64, h: &SparseOp) {
        self.left(coeff, h);
        self.right(-coeff, h);
    }

    /// coeff · (2 BρA − ABρ − ρAB): the two-operator dissipator with jump
    /// pair (A, B) = (σ_i⁺-like, σ_j⁻-like).
    fn dissipator(&mut self, coeff: C64, a: &SparseOp, b: &SparseOp) {
        let ab = a.matmul(b);
        self.sandwich(coeff * 2.0, b, a);
        self.left(-coeff, &ab);
        self.right(-coeff, &ab);
    }

    fn finish(self, policy: StoragePolicy) -> GeneratorStorage {
        let n = self.dim * self.dim;
        let dense = match policy {
            StoragePolicy::Dense => true,
            StoragePolicy::Sparse => false,
            StoragePolicy::Auto => self.dim <= DENSE_DIM_LIMIT,
        };
        if dense {
            let mut m = Array2::zeros((n, n));
            for (r, c, v) in self.triplets {
                m[[r, c]] += v;
            }
            GeneratorStorage::Dense(m)
        } else {
            GeneratorStorage::Sparse(Csr::from_triplets(n, n, self.triplets))
        }
    }
}

fn dissipator_spectrum(coeff: &Array2<C64>) -> Result<(f64, f64)> {
    let (eigs, _) = coeff.eigh(UPLO::Lower)?;
    let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

/// Two-level master-equation generator.
pub fn build_master(
    system: &System,
    couplings: &CouplingMatrices,
    probe: &ProbeSpec,
) -> Result<Superoperator> {
    build_master_with(system, couplings, probe, StoragePolicy::Auto)
}

pub fn build_master_with(
    system: &System,
    couplings: &CouplingMatrices,
    probe: &ProbeSpec,
    policy: StoragePolicy,
) -> Result<Superoperator> {
    system.validate()?;
    let n = system.n_qubits();
    if couplings.n() != n {
        return Err(Error::Config(format!(
            "coupling matrices are {}x{} but the system has {} qubits",
            couplings.n(),
            couplings.n(),
            n
        )));
    }
    if system.qubits.iter().any(|q| q.levels != 2) {
        return Err(Error::Config(
            "build_master handles two-level qubits; use build_master_multilevel".into(),
        ));
    }
    let space = HilbertSpace::from_system(system);
    let dim = space.dim();
    let mut b = GeneratorBuilder::new(dim);
    let raise: Vec<SparseOp> = (0..n).map(|i| space.transition_op(i, 1, 0)).collect();
    let lower: Vec<SparseOp> = (0..n).map(|i| space.transition_op(i, 0, 1)).collect();
    let excited: Vec<SparseOp> = (0..n).map(|i| space.transition_op(i, 1, 1)).collect();

    for i in 0..n {
        let det = probe.detuning - system.qubits[i].detuning;
        b.commutator(C64::new(0.0, det), &excited[i]);
    }
    for i in 0..n {
        for j in 0..n {
            let c = C64::new(couplings.delta_plus[[i, j]], -couplings.gamma_minus[[i, j]]);
            let op = raise[i].matmul(&lower[j]);
            b.commutator(C64::new(0.0, -1.0) * c, &op);
        }
    }
    for i in 0..n {
        let amp = system.rabi_at(i, probe)? * system.probe_mode(i, probe);
        if amp != 0.0 {
            let x = raise[i].add(&lower[i]);
            b.commutator(C64::new(0.0, amp), &x);
        }
    }
    let mut diss_coeff = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let d = C64::new(couplings.gamma_plus[[i, j]], couplings.delta_minus[[i, j]]);
            diss_coeff[[i, j]] = d;
            b.dissipator(d, &raise[i], &lower[j]);
        }
    }
    for i in 0..n {
        let g = system.qubits[i].dephasing_for_level(1);
        if g != 0.0 {
            b.dissipator(C64::new(g, 0.0), &excited[i], &excited[i]);
        }
    }
    let (min_eig, max_eig) = dissipator_spectrum(&diss_coeff)?;
    Ok(Superoperator {
        space,
        storage: b.finish(policy),
        dissipator_min_eig: min_eig,
        dissipator_max_eig: max_eig,
    })
}

/// Multi-level master-equation generator covering anharmonic ladders.
pub fn build_master_multilevel(
    system: &System,
    level_couplings: &LevelCouplings,
    probe: &ProbeSpec,
) -> Result<Superoperator> {
    build_master_multilevel_with(system, level_couplings, probe, StoragePolicy::Auto)
}

pub fn build_master_multilevel_with(
    system: &System,
    level_couplings: &LevelCouplings,
    probe: &ProbeSpec,
    policy: StoragePolicy,
) -> Result<Superoperator> {
    system.validate()?;
    let nq = system.n_qubits();
    if level_couplings.max_transition() + 1 < system.max_levels() {
        return Err(Error::Config(format!(
            "level couplings cover {} transitions but the system needs {}",
            level_couplings.max_transition(),
            system.max_levels() - 1
        )));
    }
    let space = HilbertSpace::from_system(system);
    let dim = space.dim();
    let mut b = GeneratorBuilder::new(dim);

    // transitions per qubit: n = 1..levels-1 indexes |n-1> -> |n>
    let trans = |i: usize| 1..system.qubits[i].levels;

    for i in 0..nq {
        let q = &system.qubits[i];
        for lvl in 1..q.levels {
            let nf = lvl as f64;
            let det = nf * (probe.detuning - q.detuning) + nf * (nf - 1.0) * q.anharmonicity / 2.0;
            let proj = space.transition_op(i, lvl, lvl);
            b.commutator(C64::new(0.0, det), &proj);
        }
        let amp = system.rabi_at(i, probe)? * system.probe_mode(i, probe);
        if amp != 0.0 {
            for ntr in trans(i) {
                let up = space.transition_op(i, ntr, ntr - 1);
                let dn = space.transition_op(i, ntr - 1, ntr);
                let x = up.add(&dn).scaled(C64::new((ntr as f64).sqrt(), 0.0));
                b.commutator(C64::new(0.0, amp), &x);
            }
        }
    }

    // cross terms and dissipators, indexed by (qubit, transition) pairs
    let mut pair_index = Vec::new();
    for i in 0..nq {
        for ntr in trans(i) {
            pair_index.push((i, ntr));
        }
    }
    let np = pair_index.len();
    let mut diss_coeff = Array2::zeros((np, np));
    for (a, &(i, ntr)) in pair_index.iter().enumerate() {
        let up_i = space.transition_op(i, ntr, ntr - 1);
        for (bidx, &(j, mtr)) in pair_index.iter().enumerate() {
            let dn_j = space.transition_op(j, mtr - 1, mtr);
            let gm = &level_couplings.transition(mtr).gamma;
            let gn = &level_couplings.transition(ntr).gamma;
            let dm = &level_couplings.transition(mtr).delta;
            let dn = &level_couplings.transition(ntr).delta;
            let factor = ((ntr * mtr) as f64).sqrt();
            let ham = C64::new(
                (dm[[i, j]] + dn[[j, i]]) / 2.0,
                -(gm[[i, j]] - gn[[j, i]]) / 2.0,
            );
            let dis = C64::new(
                (gm[[i, j]] + gn[[j, i]]) / 2.0,
                (dm[[i, j]] - dn[[j, i]]) / 2.0,
            );
            let op = up_i.matmul(&dn_j);
            b.commutator(C64::new(0.0, -factor) * ham, &op);
            b.dissipator(dis * factor, &up_i, &dn_j);
            diss_coeff[[a, bidx]] = dis * factor;
        }
    }

    for i in 0..nq {
        for lvl in 1..system.qubits[i].levels {
            let g = system.qubits[i].dephasing_for_level(lvl);
            if g != 0.0 {
                let proj = space.transition_op(i, lvl, lvl);
                b.dissipator(C64::new(g, 0.0), &proj, &proj);
            }
        }
    }

    let (min_eig, max_eig) = dissipator_spectrum(&diss_coeff)?;
    Ok(Superoperator {
        space,
        storage: b.finish(policy),
        dissipator_min_eig: min_eig,
        dissipator_max_eig: max_eig,
    })
}

/// Geometry labels for the two-qubit closed-form cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectiveCase {
    /// x₂ on an in-phase antinode (…, λ, 2λ).
    AntinodeAntinode,
    /// x₂ on an in-phase node (1.25λ, 2.25λ, …): Δ₁₂ = +γ₀.
    AntinodeNode,
    /// x₂ on an anti-phase antinode (1.5λ, 2.5λ, …): roles of s and a swap.
    AntinodeAntiphase,
    /// x₂ on an anti-phase node (1.75λ, …): Δ₁₂ = −γ₀.
    AntinodeNodeAntiphase,
    /// Any N: site-basis single-excitation matrix.
    General,
}

/// Weak-field non-Hermitian Hamiltonian on {ground} ∪ {single excitation}.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    /// (N+1)×(N+1); row/column 0 is the ground state.
    pub matrix: Array2<C64>,
    pub basis: Vec<String>,
}

impl EffectiveHamiltonian {
    /// Amplitude decay rates: eigenvalues of −(H − H†)/2i on the excited
    /// block, all ≥ 0 for Lindblad-valid configurations.
    pub fn decay_eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.matrix.nrows() - 1;
        let mut anti = Array2::zeros((n, n));
        for r in 0..n {
            for c in 0..n {
                let h = self.matrix[[r + 1, c + 1]];
                let hd = self.matrix[[c + 1, r + 1]].conj();
                anti[[r, c]] = -(h - hd) / C64::new(0.0, 2.0);
            }
        }
        let (eigs, _) = anti.eigh(UPLO::Lower)?;
        Ok(eigs.to_vec())
    }
}

/// General site-basis single-excitation matrix and drive vector:
/// H_ij = (−δ_i − iγ_i^φ)δ_ij + (Δ_ij − iγ_ij), drive_i = Ω_p^i cos(k_p x_i).
pub fn site_hamiltonian(
    system: &System,
    couplings: &CouplingMatrices,
    probe: &ProbeSpec,
) -> Result<(Array2<C64>, Array1<C64>)> {
    let n = system.n_qubits();
    let mut h = Array2::zeros((n, n));
    let mut drive = Array1::zeros(n);
    for i in 0..n {
        let det = probe.detuning - system.qubits[i].detuning;
        for j in 0..n {
            h[[i, j]] = C64::new(couplings.delta[[i, j]], -couplings.gamma[[i, j]]);
        }
        h[[i, i]] += C64::new(-det, -system.qubits[i].dephasing_for_level(1));
        drive[i] = C64::new(system.rabi_at(i, probe)? * system.probe_mode(i, probe), 0.0);
    }
    Ok((h, drive))
}

fn nearest_grid_distance(x: f64, offset: f64) -> f64 {
    // distance to the nearest offset + k/2 (k integer)
    let t = (x - offset) * 2.0;
    (t - t.round()).abs() / 2.0
}

pub fn build_effective_hamiltonian(
    system: &System,
    couplings: &CouplingMatrices,
    probe: &ProbeSpec,
    case: EffectiveCase,
) -> Result<EffectiveHamiltonian> {
    let n = system.n_qubits();
    let (h_site, drive) = site_hamiltonian(system, couplings, probe)?;
    if case == EffectiveCase::General {
        let mut m = Array2::zeros((n + 1, n + 1));
        for i in 0..n {
            m[[0, i + 1]] = -drive[i];
            m[[i + 1, 0]] = -drive[i];
            for j in 0..n {
                m[[i + 1, j + 1]] = h_site[[i, j]];
            }
        }
        let mut basis = vec!["g".to_string()];
        basis.extend((0..n).map(|i| format!("q{}", i + 1)));
        return Ok(EffectiveHamiltonian { matrix: m, basis });
    }
    if n != 2 {
        return Err(Error::Config(format!(
            "labeled two-qubit cases need exactly 2 qubits, got {n}"
        )));
    }
    let tol = 1e-6;
    let x1 = system.qubits[0].position;
    let x2 = system.qubits[1].position;
    if nearest_grid_distance(x1, 0.0) > tol {
        return Err(Error::Config(format!(
            "labeled cases put qubit 1 on an antinode; x1 = {x1}λ is off by {:.2e}λ",
            nearest_grid_distance(x1, 0.0)
        )));
    }
    let expect_offset = match case {
        EffectiveCase::AntinodeAntinode => 0.0,   // cos = +1 grid
        EffectiveCase::AntinodeAntiphase => 0.5,  // cos = −1 grid
        EffectiveCase::AntinodeNode => 0.25,      // sin = +1 grid
        EffectiveCase::AntinodeNodeAntiphase => 0.75, // sin = −1 grid
        EffectiveCase::General => unreachable!(),
    };
    let dist = {
        // grid period is one wavelength for the phase-resolved labels
        let t = x2 - expect_offset;
        (t - t.round()).abs()
    };
    if dist > tol {
        return Err(Error::Config(format!(
            "x2 = {x2}λ is {dist:.2e}λ away from the {case:?} grid"
        )));
    }
    // rotate the excited block to the symmetric/antisymmetric basis
    let s = |i: usize, j: usize| h_site[[i, j]];
    let h_ss = (s(0, 0) + s(1, 1) + s(0, 1) + s(1, 0)) / 2.0;
    let h_aa = (s(0, 0) + s(1, 1) - s(0, 1) - s(1, 0)) / 2.0;
    let h_sa = (s(0, 0) - s(1, 1) - s(0, 1) + s(1, 0)) / 2.0;
    let h_as = (s(0, 0) - s(1, 1) + s(0, 1) - s(1, 0)) / 2.0;
    let d_s = (drive[0] + drive[1]) / C64::new(std::f64::consts::SQRT_2, 0.0);
    let d_a = (drive[0] - drive[1]) / C64::new(std::f64::consts::SQRT_2, 0.0);
    let mut m = Array2::zeros((3, 3));
    m[[0, 1]] = -d_s;
    m[[1, 0]] = -d_s;
    m[[0, 2]] = -d_a;
    m[[2, 0]] = -d_a;
    m[[1, 1]] = h_ss;
    m[[2, 2]] = h_aa;
    m[[1, 2]] = h_sa;
    m[[2, 1]] = h_as;
    Ok(EffectiveHamiltonian {
        matrix: m,
        basis: vec!["g".into(), "s".into(), "a".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QubitSpec;
    use crate::rddi::build_couplings;
    use ndarray::array;

    fn ident(positions: &[f64], dephasing: f64) -> System {
        System {
            qubits: positions
                .iter()
                .map(|&x| QubitSpec::two_level(x, 1.0, dephasing))
                .collect(),
            inv_scale: 0.0,
            reference: 0,
            si: None,
        }
    }

    fn random_hermitian(dim: usize, seed: u64) -> Array2<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut m: Array2<C64> = Array2::zeros((dim, dim));
        for r in 0..dim {
            for c in 0..dim {
                m[[r, c]] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let md = crate::linalg::dagger(&m);
        (&m + &md) / C64::new(2.0, 0.0)
    }

    #[test]
    fn hilbert_index_round_trip() {
        let hs = HilbertSpace::new(vec![2, 3, 2]);
        assert_eq!(hs.dim(), 12);
        for idx in 0..hs.dim() {
            let multi = hs.multi_index(idx);
            assert_eq!(hs.index(&multi), idx);
        }
        // qubit 1 is the slowest index
        assert_eq!(hs.index(&[1, 0, 0]), 6);
        assert_eq!(hs.index(&[0, 0, 1]), 1);
    }

    #[test]
    fn trace_and_hermiticity_preservation() {
        let sys = ident(&[0.0, 1.25], 0.2);
        let c = build_couplings(&sys).unwrap();
        let probe = ProbeSpec::new(0.01, 0.3);
        let sop = build_master(&sys, &c, &probe).unwrap();
        let norm = sop.frob_norm();
        for seed in 0..100 {
            let rho = random_hermitian(4, seed);
            let out = sop.apply(&rho);
            let tr: C64 = (0..4).map(|k| out[[k, k]]).sum();
            let rho_norm = crate::linalg::frob_norm(&rho);
            assert!(tr.norm() <= 1e-12 * norm.max(1.0) * rho_norm);
            // L(rho^dagger) = (L rho)^dagger; rho already Hermitian, so out must be too
            let outd = crate::linalg::dagger(&out);
            let diff = crate::linalg::frob_norm(&(&out - &outd));
            assert!(diff <= 1e-12 * norm.max(1.0) * rho_norm);
        }
    }

    #[test]
    fn dissipator_psd_for_identical_qubits() {
        for &x2 in &[1.0, 1.25, 1.375, 1.5] {
            let sys = ident(&[0.0, x2], 0.2);
            let c = build_couplings(&sys).unwrap();
            let sop = build_master(&sys, &c, &ProbeSpec::new(0.01, 0.0)).unwrap();
            assert!(
                sop.is_lindblad(),
                "x2 = {x2}: min eig {}",
                sop.dissipator_min_eig
            );
        }
    }

    #[test]
    fn non_lindblad_reported_for_mismatched_qubits() {
        // strong frequency mismatch puts qubit 2 between its node and
        // antinode at the shifted wavenumber
        let mut sys = ident(&[0.0, 1.25], 0.0);
        sys.qubits[1].detuning = 1.0;
        sys.inv_scale = 0.3; // ratio 1.3
        let c = build_couplings(&sys).unwrap();
        let sop = build_master(&sys, &c, &ProbeSpec::new(0.01, 0.0)).unwrap();
        assert!(!sop.is_lindblad());
        assert!(sop.dissipator_min_eig < -0.1);
    }

    #[test]
    fn dark_state_is_annihilated_at_antinode() {
        // x = (0, 1): the antisymmetric state decouples entirely
        let sys = ident(&[0.0, 1.0], 0.0);
        let c = build_couplings(&sys).unwrap();
        let sop = build_master(&sys, &c, &ProbeSpec::new(0.01, 0.0)).unwrap();
        let hs = &sop.space;
        let (ge, eg) = (hs.index(&[0, 1]), hs.index(&[1, 0]));
        let mut a = Array1::<C64>::zeros(4);
        a[ge] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        a[eg] = C64::new(-std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut rho = Array2::zeros((4, 4));
        for r in 0..4 {
            for c2 in 0..4 {
                rho[[r, c2]] = a[r] * a[c2].conj();
            }
        }
        let out = sop.apply(&rho);
        assert!(crate::linalg::frob_norm(&out) < 1e-12);
    }

    #[test]
    fn effective_hamiltonian_antinode_eigenvalues() {
        let sys = ident(&[0.0, 1.0], 0.0);
        let c = build_couplings(&sys).unwrap();
        let probe = ProbeSpec::new(0.001, 0.0);
        let eff =
            build_effective_hamiltonian(&sys, &c, &probe, EffectiveCase::AntinodeAntinode)
                .unwrap();
        let mut eigs = eff.decay_eigenvalues().unwrap();
        eigs.sort_by(f64::total_cmp);
        assert!(eigs[0].abs() < 1e-12); // dark |a>
        assert!((eigs[1] - 2.0).abs() < 1e-12); // superradiant |s>
    }

    #[test]
    fn effective_hamiltonian_antinode_gamma_big() {
        // with dephasing: Gamma = 2g0 + (g1 + g2)/2 on |s>
        let mut sys = ident(&[0.0, 1.0], 0.0);
        sys.qubits[0].dephasing = vec![0.3];
        sys.qubits[1].dephasing = vec![0.1];
        let c = build_couplings(&sys).unwrap();
        let eff = build_effective_hamiltonian(
            &sys,
            &c,
            &ProbeSpec::new(0.001, 0.0),
            EffectiveCase::AntinodeAntinode,
        )
        .unwrap();
        let gamma_big = -eff.matrix[[1, 1]].im;
        assert!((gamma_big - (2.0 + 0.2)).abs() < 1e-12);
        // dephasing-mismatch cross term couples s and a symmetrically
        assert!((eff.matrix[[1, 2]] - C64::new(0.0, -0.1)).norm() < 1e-12);
        assert!((eff.matrix[[2, 1]] - C64::new(0.0, -0.1)).norm() < 1e-12);
    }

    #[test]
    fn effective_hamiltonian_node_splitting() {
        let sys = ident(&[0.0, 1.25], 0.2);
        let c = build_couplings(&sys).unwrap();
        let eff = build_effective_hamiltonian(
            &sys,
            &c,
            &ProbeSpec::new(0.001, 0.0),
            EffectiveCase::AntinodeNode,
        )
        .unwrap();
        // s/a energies split by 2 Delta_12 = 2 gamma0
        let split = eff.matrix[[1, 1]].re - eff.matrix[[2, 2]].re;
        assert!((split - 2.0).abs() < 1e-12);
        // equal decay gamma_plus on both
        let gp = (1.0 + 0.2 + 0.2) / 2.0;
        assert!((-eff.matrix[[1, 1]].im - gp).abs() < 1e-12);
        assert!((-eff.matrix[[2, 2]].im - gp).abs() < 1e-12);
        // gamma_minus cross coupling
        let gm = (1.0 + 0.2 - 0.2) / 2.0;
        assert!((eff.matrix[[1, 2]] - C64::new(0.0, -gm)).norm() < 1e-12);
    }

    #[test]
    fn effective_hamiltonian_role_swap_at_antiphase() {
        let sys = ident(&[0.0, 1.5], 0.0);
        let c = build_couplings(&sys).unwrap();
        let eff = build_effective_hamiltonian(
            &sys,
            &c,
            &ProbeSpec::new(0.001, 0.0),
            EffectiveCase::AntinodeAntiphase,
        )
        .unwrap();
        // dark state is |s>, superradiant is |a>
        assert!(eff.matrix[[1, 1]].im.abs() < 1e-12);
        assert!((-eff.matrix[[2, 2]].im - 2.0).abs() < 1e-12);
        // and the drive couples to |a> only
        assert!(eff.matrix[[0, 1]].norm() < 1e-12);
        assert!(eff.matrix[[0, 2]].norm() > 1e-4);
    }

    #[test]
    fn effective_case_position_mismatch_is_config_error() {
        let sys = ident(&[0.0, 1.25], 0.2);
        let c = build_couplings(&sys).unwrap();
        let res = build_effective_hamiltonian(
            &sys,
            &c,
            &ProbeSpec::new(0.001, 0.0),
            EffectiveCase::AntinodeAntinode,
        );
        assert!(matches!(res, Err(Error::Config(_))));
        // off-grid position rejected for labeled cases but fine for General
        let sys2 = ident(&[0.0, 1.37], 0.2);
        let c2 = build_couplings(&sys2).unwrap();
        assert!(build_effective_hamiltonian(
            &sys2,
            &c2,
            &ProbeSpec::new(0.001, 0.0),
            EffectiveCase::AntinodeNode
        )
        .is_err());
        assert!(build_effective_hamiltonian(
            &sys2,
            &c2,
            &ProbeSpec::new(0.001, 0.0),
            EffectiveCase::General
        )
        .is_ok());
    }

    #[test]
    fn antihermitian_part_negative_semidefinite_when_lindblad() {
        for &x2 in &[1.0, 1.25, 1.5, 1.75] {
            let sys = ident(&[0.0, x2], 0.15);
            let c = build_couplings(&sys).unwrap();
            let eff = build_effective_hamiltonian(
                &sys,
                &c,
                &ProbeSpec::new(0.001, 0.0),
                EffectiveCase::General,
            )
            .unwrap();
            let n = 2;
            let mut anti = Array2::zeros((n, n));
            for r in 0..n {
                for c2 in 0..n {
                    let h = eff.matrix[[r + 1, c2 + 1]];
                    let hd = eff.matrix[[c2 + 1, r + 1]].conj();
                    anti[[r, c2]] = (h - hd) / C64::new(0.0, 2.0);
                }
            }
            let (eigs, _) = anti.eigh(UPLO::Lower).unwrap();
            assert!(eigs.iter().all(|&e| e <= 1e-12), "x2 = {x2}: {eigs:?}");
        }
    }

    #[test]
    fn multilevel_reduces_to_two_level_generator() {
        // d = 2 everywhere: multilevel builder must match build_master exactly
        let mut sys = ident(&[0.0, 1.25], 0.2);
        sys.qubits[0].anharmonicity = 23.0;
        sys.qubits[1].anharmonicity = 19.0;
        sys.inv_scale = 17.2 / 4759.0;
        sys.qubits[1].detuning = -4.0 / 17.2;
        let c = build_couplings(&sys).unwrap();
        let lev = crate::rddi::build_level_couplings(&sys).unwrap();
        let probe = ProbeSpec::new(0.01, 0.7);
        let two = build_master(&sys, &c, &probe).unwrap();
        let multi = build_master_multilevel(&sys, &lev, &probe).unwrap();
        let d2 = two.to_dense();
        let dm = multi.to_dense();
        let diff = crate::linalg::frob_norm(&(&d2 - &dm));
        assert!(diff < 1e-12 * two.frob_norm().max(1.0), "diff = {diff}");
    }

    #[test]
    fn multilevel_projects_onto_two_level_block() {
        // restricting the d=3 generator to the {0,1} block with the level-2
        // couplings zeroed reproduces the two-level generator
        let mut sys3 = ident(&[0.0, 1.25], 0.2);
        for q in &mut sys3.qubits {
            q.levels = 3;
            q.anharmonicity = 20.0;
        }
        sys3.inv_scale = 1e-3;
        let mut lev = crate::rddi::build_level_couplings(&sys3).unwrap();
        let z = Array2::zeros((2, 2));
        lev.levels[1].gamma = z.clone();
        lev.levels[1].delta = z.clone();
        lev.levels[1].gamma_plus = z.clone();
        lev.levels[1].gamma_minus = z.clone();
        lev.levels[1].delta_plus = z.clone();
        lev.levels[1].delta_minus = z;
        let probe = ProbeSpec::new(0.01, 0.4);
        let multi = build_master_multilevel(&sys3, &lev, &probe).unwrap();

        let sys2 = {
            let mut s = sys3.clone();
            for q in &mut s.qubits {
                q.levels = 2;
            }
            s
        };
        let c2 = build_couplings(&sys2).unwrap();
        let two = build_master(&sys2, &c2, &probe).unwrap();

        // map two-level vec indices into the 3-level vec space
        let hs3 = &multi.space;
        let hs2 = &two.space;
        let dim3 = hs3.dim();
        let m3 = multi.to_dense();
        let m2 = two.to_dense();
        let mut sub: Vec<usize> = Vec::new();
        for idx in 0..hs2.dim() {
            let multi_idx = hs2.multi_index(idx);
            sub.push(hs3.index(&multi_idx));
        }
        for (r2, &r3) in sub.iter().enumerate() {
            for (c2i, &c3) in sub.iter().enumerate() {
                for (rr2, &rr3) in sub.iter().enumerate() {
                    for (cc2, &cc3) in sub.iter().enumerate() {
                        let a = m3[[r3 + dim3 * c3, rr3 + dim3 * cc3]];
                        let b = m2[[r2 + hs2.dim() * c2i, rr2 + hs2.dim() * cc2]];
                        assert!((a - b).norm() < 1e-12, "mismatch at block entry");
                    }
                }
            }
        }
    }

    #[test]
    fn triplet_dump_round_trips() {
        let sys = ident(&[0.0, 1.25], 0.2);
        let c = build_couplings(&sys).unwrap();
        let sop = build_master(&sys, &c, &ProbeSpec::new(0.01, 0.0)).unwrap();
        let mut buf = Vec::new();
        sop.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let dense = sop.to_dense();
        let mut rebuilt: Array2<C64> = Array2::zeros(dense.raw_dim());
        for line in text.lines() {
            let f: Vec<&str> = line.split_whitespace().collect();
            let (r, c): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
            rebuilt[[r, c]] = C64::new(f[2].parse().unwrap(), f[3].parse().unwrap());
        }
        assert!(crate::linalg::frob_norm(&(&dense - &rebuilt)) < 1e-12);
    }

    #[test]
    fn storage_policy_sparse_matches_dense() {
        let sys = ident(&[0.0, 1.0, 1.25], 0.1);
        let c = build_couplings(&sys).unwrap();
        let probe = ProbeSpec::new(0.01, 0.2);
        let dense = build_master_with(&sys, &c, &probe, StoragePolicy::Dense).unwrap();
        let sparse = build_master_with(&sys, &c, &probe, StoragePolicy::Sparse).unwrap();
        assert!(!sparse.is_dense());
        let diff = &dense.to_dense() - &sparse.to_dense();
        assert!(crate::linalg::frob_norm(&diff) < 1e-13);
        // matvec agreement on a random vector
        let v = vectorize(&random_hermitian(8, 7));
        let dv = dense.apply_vec(&v);
        let sv = sparse.apply_vec(&v);
        let d = &dv - &sv;
        assert!(crate::linalg::vec_norm(&d) < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let sys = ident(&[0.0, 1.25], 0.2);
        let c3 = build_couplings(&ident(&[0.0, 1.0, 2.0], 0.2)).unwrap();
        assert!(matches!(
            build_master(&sys, &c3, &ProbeSpec::new(0.01, 0.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn vectorization_convention_is_column_stacking() {
        let rho = array![
            [C64::new(1.0, 0.0), C64::new(2.0, 0.0)],
            [C64::new(3.0, 0.0), C64::new(4.0, 0.0)]
        ];
        let v = vectorize(&rho);
        assert_eq!(v[0], C64::new(1.0, 0.0));
        assert_eq!(v[1], C64::new(3.0, 0.0)); // column-major
        assert_eq!(v[2], C64::new(2.0, 0.0));
        let back = unvectorize(&v, 2);
        assert_eq!(back, rho);
    }
}
