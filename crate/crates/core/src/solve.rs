//! Steady states and time evolution of the master equation, plus the
//! single-excitation weak-field solver.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Factorize, ReciprocalConditionNum, Solve, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{bicgstab, vec_norm};
use crate::liouville::{site_hamiltonian, unvectorize, vectorize, Superoperator};
use crate::model::{ProbeSpec, System};
use crate::rddi::CouplingMatrices;

/// Relative residual contract for steady-state solves.
const RESIDUAL_TOL: f64 = 1e-10;

/// LAPACK's Fortran kernels use automatic (stack) arrays that overflow the
/// default 2 MiB worker stacks once the vectorized dimension gets large, so
/// big factorizations run on a dedicated thread.
fn with_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(64 * 1024 * 1024)
            .spawn_scoped(scope, f)
            .expect("spawn big-stack worker")
            .join()
            .expect("big-stack worker panicked")
    })
}

/// A solved steady state with its quality diagnostics.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub matrix: Array2<C64>,
    /// ‖Lρ‖ / ‖L‖ after the solve.
    pub residual: f64,
    /// Smallest eigenvalue; may be below -1e-8 only for non-Lindblad
    /// configurations (reported, not rejected).
    pub min_eigenvalue: f64,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|k| self.matrix[[k, k]]).sum()
    }

    pub fn expectation(&self, op: &Array2<C64>) -> C64 {
        // tr(rho op)
        let prod = self.matrix.dot(op);
        (0..self.dim()).map(|k| prod[[k, k]]).sum()
    }

    /// Population of the normalized pure state `amplitudes`.
    pub fn population_of(&self, amplitudes: &Array1<C64>) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                acc += amplitudes[r].conj() * self.matrix[[r, c]] * amplitudes[c];
            }
        }
        acc.re
    }
}

fn hermitize(m: &Array2<C64>) -> Array2<C64> {
    let md = crate::linalg::dagger(m);
    (m + &md) / C64::new(2.0, 0.0)
}

/// Count eigenvalues of the generator within `tol` of zero.
fn kernel_dimension(sop: &Superoperator) -> Result<usize> {
    with_big_stack(|| {
        let dense = sop.to_dense();
        let (eigs, _) = dense.eig()?;
        let scale = eigs.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1e-300);
        Ok(eigs.iter().filter(|z| z.norm() <= 1e-8 * scale).count())
    })
}

/// Unique steady state of the generator: Lρ = 0 with tr ρ = 1.
///
/// Dense generators go through a direct LU solve of the trace-modified
/// system; sparse ones through shifted inverse power iteration with
/// BiCGStab inner solves. Either path enforces the residual contract and
/// reports degenerate kernels instead of picking a representative.
pub fn steady_state(sop: &Superoperator) -> Result<DensityMatrix> {
    let dim = sop.dim();
    let l_norm = sop.frob_norm();
    let rho = if sop.is_dense() {
        steady_dense(sop)?
    } else {
        steady_sparse(sop)?
    };
    let v = vectorize(&rho);
    let residual = vec_norm(&sop.apply_vec(&v)) / l_norm.max(1e-300);
    if residual > RESIDUAL_TOL {
        // distinguish a degenerate kernel from a plain numerical failure
        let kdim = kernel_dimension(sop)?;
        if kdim != 1 {
            return Err(Error::DegenerateKernel { dim: kdim });
        }
        return Err(Error::Linalg(format!(
            "steady-state residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}"
        )));
    }
    let rho = hermitize(&rho);
    let (eigs, _) = rho.eigh(UPLO::Lower)?;
    let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    if sop.is_lindblad() && min_eig < -1e-8 {
        return Err(Error::Linalg(format!(
            "steady state violates positivity (min eigenvalue {min_eig:.3e}) for a Lindblad-valid generator"
        )));
    }
    let tr = (0..dim).map(|k| rho[[k, k]]).sum::<C64>();
    if (tr - C64::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(Error::Linalg(format!("steady-state trace {tr} not normalized")));
    }
    Ok(DensityMatrix { matrix: rho, residual, min_eigenvalue: min_eig })
}

fn steady_dense(sop: &Superoperator) -> Result<Array2<C64>> {
    let dim = sop.dim();
    let n = sop.vec_dim();
    let mut m = sop.dense().expect("dense storage").clone();
    // the diagonal-entry rows sum to zero (trace preservation), so one of
    // them is redundant; replace the (0,0) row with the trace constraint
    for c in 0..n {
        m[[0, c]] = C64::new(0.0, 0.0);
    }
    for k in 0..dim {
        m[[0, k + dim * k]] = C64::new(1.0, 0.0);
    }
    let mut b: Array1<C64> = Array1::zeros(n);
    b[0] = C64::new(1.0, 0.0);
    let solved: Result<(Array1<C64>, f64)> = with_big_stack(|| {
        let f = m
            .factorize()
            .map_err(|e| Error::Linalg(format!("steady-state LU failed: {e}")))?;
        let rcond = f.rcond().map_err(|e| Error::Linalg(e.to_string()))?;
        let v = f
            .solve(&b)
            .map_err(|e| Error::Linalg(format!("steady-state solve failed: {e}")))?;
        Ok((v, rcond))
    });
    let (v, rcond) = solved?;
    // a singular trace-modified system means a traceless kernel combination,
    // i.e. a kernel of dimension >= 2
    if rcond < 1e-13 {
        let kdim = kernel_dimension(sop)?;
        if kdim != 1 {
            return Err(Error::DegenerateKernel { dim: kdim });
        }
        return Err(Error::Linalg(format!(
            "trace-modified system nearly singular (rcond = {rcond:.2e})"
        )));
    }
    Ok(unvectorize(&v, dim))
}

fn steady_sparse(sop: &Superoperator) -> Result<Array2<C64>> {
    let dim = sop.dim();
    let n = sop.vec_dim();
    let csr = sop.sparse().expect("sparse storage");
    let diag = csr.diagonal();
    let scale = diag.iter().map(|z| z.norm()).sum::<f64>() / n as f64;
    let sigma = C64::new(0.02 * scale.max(1e-12), 0.0);
    let shifted_diag: Array1<C64> = Array1::from_iter(diag.iter().map(|d| d - sigma));
    let apply = |v: &Array1<C64>| -> Array1<C64> { &csr.matvec(v) - &(v * sigma) };

    let run = |start: &Array1<C64>| -> Result<Array1<C64>> {
        let mut x = start.clone();
        let nrm = vec_norm(&x);
        x.mapv_inplace(|z| z / nrm);
        for _ in 0..200 {
            let y = bicgstab(apply, &x, &shifted_diag, 1e-13, 20 * n)?;
            let nrm = vec_norm(&y);
            if nrm < 1e-290 {
                return Err(Error::Linalg("inverse iteration collapsed".into()));
            }
            let y = y.mapv(|z| z / nrm);
            let res = vec_norm(&sop.apply_vec(&y)) / sop.frob_norm().max(1e-300);
            x = y;
            if res < 0.1 * RESIDUAL_TOL {
                break;
            }
        }
        Ok(x)
    };

    // deterministic pair of starts; disagreement means a degenerate kernel
    let mixed: Array1<C64> = {
        let rho0 = Array2::eye(dim).mapv(|z: f64| C64::new(z / dim as f64, 0.0));
        vectorize(&rho0)
    };
    let x1 = run(&mixed)?;
    let skewed: Array1<C64> = Array1::from_iter(
        (0..n).map(|k| C64::new(1.0 + (k as f64 * 0.7).sin(), (k as f64 * 1.3).cos() * 0.5)),
    );
    let x2 = run(&skewed)?;
    let to_state = |x: &Array1<C64>| -> Result<Array2<C64>> {
        let rho = unvectorize(x, dim);
        let tr = (0..dim).map(|k| rho[[k, k]]).sum::<C64>();
        if tr.norm() < 1e-10 {
            return Err(Error::Linalg("kernel vector has vanishing trace".into()));
        }
        Ok(rho.mapv(|z| z / tr))
    };
    let r1 = to_state(&x1)?;
    let r2 = to_state(&x2)?;
    let diff = crate::linalg::frob_norm(&(&r1 - &r2));
    if diff > 1e-6 * crate::linalg::frob_norm(&r1).max(1.0) {
        let kdim = kernel_dimension(sop)?;
        return Err(Error::DegenerateKernel { dim: kdim.max(2) });
    }
    Ok(r1)
}

/// A time-evolved trajectory of accepted integrator steps.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Array2<C64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &Array2<C64> {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

// Dormand-Prince 5(4) tableau
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate dρ/dt = Lρ from `rho0` to `t_final` with an adaptive embedded
/// Runge-Kutta 5(4) pair.
pub fn evolve(
    sop: &Superoperator,
    rho0: &Array2<C64>,
    t_final: f64,
    tol: f64,
) -> Result<Trajectory> {
    if t_final <= 0.0 {
        return Err(Error::Domain(format!("t_final must be > 0, got {t_final}")));
    }
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::Domain(format!(
            "tol must be within [1e-12, 1e-4], got {tol:e}"
        )));
    }
    let mut y = vectorize(rho0);
    let n = y.len();
    let mut t = 0.0;
    let rate = (sop.frob_norm() / (n as f64).sqrt()).max(1e-12);
    let mut dt = (0.1 / rate).min(t_final);
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let err_norm = |e: &Array1<C64>, y: &Array1<C64>| -> f64 {
        let mut acc = 0.0;
        for k in 0..n {
            let sc = tol * 1e-2 + tol * y[k].norm();
            let r = e[k].norm() / sc;
            acc += r * r;
        }
        (acc / n as f64).sqrt()
    };
    let dim = sop.dim();
    let mut k: Vec<Array1<C64>> = Vec::with_capacity(7);
    while t < t_final {
        if dt < 1e-14 * t_final {
            return Err(Error::Stiffness { t });
        }
        let h = dt.min(t_final - t);
        k.clear();
        k.push(sop.apply_vec(&y));
        for stage in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = DP_A[stage][j];
                if a != 0.0 {
                    ys = ys + kj * C64::new(a * h, 0.0);
                }
            }
            k.push(sop.apply_vec(&ys));
        }
        let _ = DP_C; // nodes are implicit for an autonomous generator
        let mut y5 = y.clone();
        let mut err: Array1<C64> = Array1::zeros(n);
        for (j, kj) in k.iter().enumerate() {
            if DP_B5[j] != 0.0 {
                y5 = y5 + kj * C64::new(DP_B5[j] * h, 0.0);
            }
            let d = DP_B5[j] - DP_B4[j];
            if d != 0.0 {
                err = err + kj * C64::new(d * h, 0.0);
            }
        }
        let e = err_norm(&err, &y5);
        if e <= 1.0 {
            t += h;
            y = y5;
            times.push(t);
            states.push(unvectorize(&y, dim));
        }
        let factor = if e > 0.0 { 0.9 * e.powf(-0.2) } else { 5.0 };
        dt = h * factor.clamp(0.2, 5.0);
    }
    Ok(Trajectory { times, states })
}

/// Weak-field single-excitation amplitudes.
#[derive(Debug, Clone)]
pub struct AmplitudeVector {
    /// Ground-state amplitude (≈ 1 in the weak-field regime).
    pub ground: C64,
    /// Site-basis excitation amplitudes; entry i multiplies |…e_i…⟩.
    pub sites: Vec<C64>,
    /// Probe was within the advertised weak-field range Ω_p ≤ 0.05γ₀.
    pub weak_field_ok: bool,
}

impl AmplitudeVector {
    /// Symmetric combination (N = 2 only).
    pub fn c_s(&self) -> C64 {
        assert_eq!(self.sites.len(), 2);
        (self.sites[0] + self.sites[1]) / C64::new(std::f64::consts::SQRT_2, 0.0)
    }

    /// Antisymmetric combination (N = 2 only).
    pub fn c_a(&self) -> C64 {
        assert_eq!(self.sites.len(), 2);
        (self.sites[0] - self.sites[1]) / C64::new(std::f64::consts::SQRT_2, 0.0)
    }

    /// Σ|c_i|², the excited weight (should be O(Ω²/γ²)).
    pub fn excited_weight(&self) -> f64 {
        self.sites.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Steady-state amplitudes from the single-excitation effective Hamiltonian:
/// solves H c = Ω̃ in the site basis.
pub fn weakfield_steady(
    system: &System,
    couplings: &CouplingMatrices,
    probe: &ProbeSpec,
) -> Result<AmplitudeVector> {
    let (h, drive) = site_hamiltonian(system, couplings, probe)?;
    let sites = h.solve(&drive).map_err(|e| {
        Error::Singular(format!(
            "single-excitation system is singular (drive orthogonal to all damped modes?): {e}"
        ))
    })?;
    Ok(AmplitudeVector {
        ground: C64::new(1.0, 0.0),
        sites: sites.to_vec(),
        weak_field_ok: probe.rabi <= 0.05,
    })
}

/// ⟨σ_i⁻⟩ for every qubit from a full density matrix (two-level systems).
pub fn coherences(sop: &Superoperator, rho: &DensityMatrix) -> Vec<C64> {
    let hs = &sop.space;
    let nq = hs.dims.len();
    (0..nq)
        .map(|i| {
            let op = hs.transition_op(i, 0, 1); // |g><e| at site i
            let mut acc = C64::new(0.0, 0.0);
            for &(r, c, v) in &op.entries {
                // tr(rho |r><c|) = rho[c, r]
                acc += v * rho.matrix[[c, r]];
            }
            acc
        })
        .collect()
}

/// ⟨σ_{n−1,n}^i⟩ for every qubit and transition (multi-level systems).
pub fn coherences_multilevel(sop: &Superoperator, rho: &DensityMatrix) -> Vec<Vec<C64>> {
    let hs = &sop.space;
    let nq = hs.dims.len();
    (0..nq)
        .map(|i| {
            (1..hs.dims[i])
                .map(|n| {
                    let op = hs.transition_op(i, n - 1, n);
                    let mut acc = C64::new(0.0, 0.0);
                    for &(r, c, v) in &op.entries {
                        acc += v * rho.matrix[[c, r]];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}
