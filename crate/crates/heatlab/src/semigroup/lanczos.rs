//! Hermitian Lanczos with full reorthogonalization.
//!
//! One basis serves both consumers: Ritz extraction for eigenpairs and the
//! Krylov approximation of `exp(-s A) f`. The basis is grown on demand; every
//! new vector is reorthogonalized against all previous ones (two passes), so
//! near-converged ladders of tiny eigenvalues stay clean.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::sparse::SparseOperator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub struct LanczosBasis<'a> {
    op: &'a SparseOperator,
    /// Orthonormal basis vectors v_1 .. v_m.
    vectors: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Unnormalized candidate for the next vector.
    residual: Vec<Complex64>,
    /// Norm of the starting vector.
    pub start_norm: f64,
    /// Set once the residual vanishes: the Krylov space is invariant.
    pub breakdown: bool,
}

impl<'a> LanczosBasis<'a> {
    pub fn new(op: &'a SparseOperator, start: &[Complex64]) -> Self {
        let start_norm = norm(start);
        let v0 = if start_norm > 0.0 {
            start.iter().map(|x| x / start_norm).collect()
        } else {
            vec![ZERO; start.len()]
        };
        LanczosBasis {
            op,
            vectors: vec![v0],
            alpha: Vec::new(),
            beta: Vec::new(),
            residual: Vec::new(),
            start_norm,
            breakdown: start_norm == 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Extend the basis by one step; returns false on breakdown.
    pub fn step(&mut self) -> bool {
        if self.breakdown {
            return false;
        }
        let m = self.alpha.len();
        let v = self.vectors[m].clone();
        let mut w = self.op.apply_vec(&v);
        let a = dot(&v, &w).re;
        self.alpha.push(a);
        // full reorthogonalization, two passes
        for _pass in 0..2 {
            for u in &self.vectors {
                let c = dot(u, &w);
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
        }
        let b = norm(&w);
        if b < 1e-14 * self.op.max_norm().max(1.0) {
            self.breakdown = true;
            self.beta.push(0.0);
            self.residual = w;
            return false;
        }
        for wi in &mut w {
            *wi /= b;
        }
        self.beta.push(b);
        self.vectors.push(w.clone());
        self.residual = w;
        true
    }

    fn tridiagonal(&self) -> DMatrix<f64> {
        let m = self.alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = self.alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        t
    }

    /// Ritz values with residual bounds `beta_m * |last component|`.
    pub fn ritz(&self) -> Vec<RitzPair> {
        let m = self.alpha.len();
        if m == 0 {
            return Vec::new();
        }
        let eig = SymmetricEigen::new(self.tridiagonal());
        let beta_last = self.beta[m - 1];
        let mut out: Vec<RitzPair> = (0..m)
            .map(|i| RitzPair {
                value: eig.eigenvalues[i],
                residual_bound: beta_last * eig.eigenvectors[(m - 1, i)].abs(),
                coeffs: (0..m).map(|r| eig.eigenvectors[(r, i)]).collect(),
            })
            .collect();
        out.sort_by(|a, b| a.value.total_cmp(&b.value));
        out
    }

    /// Assemble the full-space vector for a Ritz pair.
    pub fn ritz_vector(&self, pair: &RitzPair) -> Vec<Complex64> {
        let n = self.vectors[0].len();
        let mut out = vec![ZERO; n];
        for (c, v) in pair.coeffs.iter().zip(&self.vectors) {
            let cc = Complex64::new(*c, 0.0);
            for (o, vi) in out.iter_mut().zip(v) {
                *o += cc * vi;
            }
        }
        out
    }

    /// Krylov approximation of `exp(-s A) f` where `f` is the start vector,
    /// together with the standard a-posteriori error estimate.
    pub fn expm(&self, s: f64) -> (Vec<Complex64>, f64) {
        let n = self.vectors[0].len();
        let m = self.alpha.len();
        if self.start_norm == 0.0 {
            return (vec![ZERO; n], 0.0);
        }
        if m == 0 {
            // no steps taken: only sensible for s = 0
            let mut out = self.vectors[0].clone();
            for x in &mut out {
                *x *= self.start_norm;
            }
            return (out, f64::INFINITY);
        }
        let eig = SymmetricEigen::new(self.tridiagonal());
        // w = U exp(-s Θ) Uᵀ e_1, scaled by |f|
        let mut w = vec![0.0f64; m];
        for i in 0..m {
            let phase = (-s * eig.eigenvalues[i]).exp();
            let u0 = eig.eigenvectors[(0, i)];
            for r in 0..m {
                w[r] += eig.eigenvectors[(r, i)] * phase * u0;
            }
        }
        let mut out = vec![ZERO; n];
        for (c, v) in w.iter().zip(&self.vectors) {
            let cc = Complex64::new(c * self.start_norm, 0.0);
            for (o, vi) in out.iter_mut().zip(v) {
                *o += cc * vi;
            }
        }
        let err = if self.breakdown {
            0.0
        } else {
            self.beta[m - 1] * w[m - 1].abs() * self.start_norm
        };
        (out, err)
    }
}

#[derive(Debug, Clone)]
pub struct RitzPair {
    pub value: f64,
    /// Upper bound on `|A v - value v|` for the assembled Ritz vector.
    pub residual_bound: f64,
    coeffs: Vec<f64>,
}
