//! Small complex linear-algebra helpers shared across the crate: sparse
//! operators in triplet form, CSR matrices with BiCGStab, and a few dense
//! conveniences on top of LAPACK.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn frob_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn cdot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// A Hilbert-space operator stored as (row, col, value) triplets.
///
/// Embedded site operators and their products are extremely sparse, so
/// generator assembly works on triplets and only materializes dense or CSR
/// storage at the end.
#[derive(Debug, Clone)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn zero(dim: usize) -> Self {
        SparseOp { dim, entries: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        SparseOp {
            dim,
            entries: (0..dim).map(|k| (k, k, C64::new(1.0, 0.0))).collect(),
        }
    }

    /// Operator product `self * other`.
    pub fn matmul(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.dim, other.dim);
        let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for &(r, c, v) in &other.entries {
            by_row[r].push((c, v));
        }
        let mut acc: std::collections::HashMap<(usize, usize), C64> =
            std::collections::HashMap::new();
        for &(r, k, va) in &self.entries {
            for &(c, vb) in &by_row[k] {
                *acc.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += va * vb;
            }
        }
        let mut entries: Vec<(usize, usize, C64)> = acc
            .into_iter()
            .filter(|&(_, v)| v.norm_sqr() > 0.0)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        SparseOp { dim: self.dim, entries }
    }

    pub fn scaled(&self, s: C64) -> SparseOp {
        SparseOp {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (r, c, s * v)).collect(),
        }
    }

    pub fn add(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.dim, other.dim);
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        SparseOp { dim: self.dim, entries }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for &(r, c, v) in &self.entries {
            m[[r, c]] += v;
        }
        m
    }
}

/// Compressed sparse row matrix over complex entries.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<C64>,
}

impl Csr {
    /// Build from triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, C64)>) -> Csr {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<C64> = Vec::with_capacity(t.len());
        let mut rows: Vec<usize> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    *data.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            data.push(v);
        }
        // prune zeros introduced by cancellation
        let mut pi = 0;
        for k in 0..data.len() {
            if data[k].norm_sqr() > 0.0 {
                rows[pi] = rows[k];
                indices[pi] = indices[k];
                data[pi] = data[k];
                pi += 1;
            }
        }
        rows.truncate(pi);
        indices.truncate(pi);
        data.truncate(pi);
        for &r in &rows {
            indptr[r + 1] += 1;
        }
        for k in 0..nrows {
            indptr[k + 1] += indptr[k];
        }
        Csr { nrows, ncols, indptr, indices, data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn matvec(&self, x: &Array1<C64>) -> Array1<C64> {
        let mut y = Array1::zeros(self.nrows);
        for r in 0..self.nrows {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn diagonal(&self) -> Array1<C64> {
        let mut d = Array1::zeros(self.nrows.min(self.ncols));
        for r in 0..self.nrows.min(self.ncols) {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.indices[k] == r {
                    d[r] = self.data[k];
                }
            }
        }
        d
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// BiCGStab with Jacobi (diagonal) right preconditioning.
///
/// Solves `apply(x) = b` to relative residual `tol`.
pub fn bicgstab<F>(
    apply: F,
    b: &Array1<C64>,
    diag: &Array1<C64>,
    tol: f64,
    max_iter: usize,
) -> Result<Array1<C64>>
where
    F: Fn(&Array1<C64>) -> Array1<C64>,
{
    let n = b.len();
    let precond = |v: &Array1<C64>| -> Array1<C64> {
        Array1::from_iter(v.iter().zip(diag.iter()).map(|(x, d)| {
            if d.norm_sqr() > 1e-300 {
                x / d
            } else {
                *x
            }
        }))
    };
    let bnorm = vec_norm(b).max(1e-300);
    let mut x: Array1<C64> = Array1::zeros(n);
    let mut r = b.clone();
    let r0 = r.clone();
    let mut rho = C64::new(1.0, 0.0);
    let mut alpha = C64::new(1.0, 0.0);
    let mut omega = C64::new(1.0, 0.0);
    let mut v: Array1<C64> = Array1::zeros(n);
    let mut p: Array1<C64> = Array1::zeros(n);
    for _ in 0..max_iter {
        let rho_new = cdot(&r0, &r);
        if rho_new.norm() < 1e-290 {
            return Err(Error::Linalg("bicgstab breakdown (rho -> 0)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p = &r + &((&p - &(&v * omega)) * beta);
        let ph = precond(&p);
        v = apply(&ph);
        alpha = rho / cdot(&r0, &v);
        let s = &r - &(&v * alpha);
        if vec_norm(&s) / bnorm < tol {
            x = &x + &(&ph * alpha);
            return Ok(x);
        }
        let sh = precond(&s);
        let t = apply(&sh);
        let tt = cdot(&t, &t);
        if tt.norm() < 1e-290 {
            return Err(Error::Linalg("bicgstab breakdown (t -> 0)".into()));
        }
        omega = cdot(&t, &s) / tt;
        x = &x + &(&ph * alpha) + &(&sh * omega);
        r = &s - &(&t * omega);
        if vec_norm(&r) / bnorm < tol {
            return Ok(x);
        }
        if omega.norm() < 1e-290 {
            return Err(Error::Linalg("bicgstab breakdown (omega -> 0)".into()));
        }
    }
    Err(Error::Linalg(format!(
        "bicgstab did not converge in {max_iter} iterations"
    )))
}
