//! Szego projector onto the (discrete) kernel of `Zbar`.
//!
//! Two constructions, matching the two ways the projector is characterized:
//!
//! * [`SzegoProjector`]: for weights whose null space is spanned by
//!   `exp(-τp) z^k`, sample those states, run them through a long heat
//!   smoothing (`exp(-s boxt)` keeps the near-null ladder and strips the
//!   truncation junk the raw samples carry), force the interior rows of
//!   `Zbar` to vanish exactly by a constrained least-squares correction, and
//!   orthonormalize by pivoted QR. The result is a rank-(K+1) orthogonal
//!   projector whose range annihilates `Zbar` on interior rows to rounding.
//! * [`SmoothedProjector`]: weight-agnostic columns via the Green identity
//!   `I - S = Zbar† (box + ε)^{-1} Zbar`; the ridge ε sits between the
//!   near-null ladder and the physical bottom of `box`.

use num_complex::Complex64;

use crate::discretize::{assemble_first_order, OperatorKind};
use crate::error::{HeatlabError, Result};
use crate::grid::{Grid, GridFunction};
use crate::polygeom::SubharmonicPolynomial;
use crate::semigroup::heat::HeatEngine;
use crate::semigroup::lanczos::LanczosBasis;
use crate::sparse::{BandedCholesky, SparseOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tuning for the monomial-basis construction.
#[derive(Debug, Clone, Copy)]
pub struct SzegoOptions {
    /// Heat-smoothing time applied to the sampled basis before the interior
    /// correction; long enough to strip spectral content above the null
    /// ladder, short enough to keep the high-degree ladder states alive.
    pub smoothing_time: f64,
    /// Kill ratio for pivoted QR: columns whose residual norm drops below
    /// `rank_tol * max column norm` are dropped.
    pub rank_tol: f64,
    /// Required mass fraction of `exp(-τp) z^K` inside the mass radius.
    pub mass_fraction: f64,
    /// Mass radius as a fraction of the grid half width.
    pub mass_radius_fraction: f64,
}

impl Default for SzegoOptions {
    fn default() -> Self {
        SzegoOptions {
            smoothing_time: 32.0,
            rank_tol: 1e-6,
            mass_fraction: 0.999,
            mass_radius_fraction: 0.875,
        }
    }
}

/// Orthogonal projector `S = Q Q†` onto the corrected weighted-monomial span.
pub struct SzegoProjector {
    grid: Grid,
    /// Orthonormal basis columns (plain ℓ² normalization).
    q: Vec<Vec<Complex64>>,
    /// Max interior-row norm of `Zbar q_k` (should be rounding-level).
    pub interior_annihilation: f64,
    /// Gram deviation `|Q†Q - I|_2`, bounds `|S² - S|`.
    pub gram_defect: f64,
    pub degree: usize,
}

impl SzegoProjector {
    /// Build for weight `p` and parameter `τ > 0` with monomial degrees
    /// `0..=max_degree`. Errors when `exp(-τp) z^max_degree` parks more than
    /// the allowed mass outside the mass radius, naming the max admissible
    /// degree.
    pub fn build(
        p: &SubharmonicPolynomial,
        tau: f64,
        grid: Grid,
        max_degree: usize,
        boxt: &SparseOperator,
        opts: SzegoOptions,
    ) -> Result<Self> {
        assert!(tau > 0.0, "Szego projector needs τ > 0");
        let admissible = max_admissible_degree(p, tau, grid, &opts);
        if max_degree > admissible {
            return Err(HeatlabError::SzegoDegree {
                requested: max_degree,
                max_admissible: admissible,
            });
        }

        // 1. sample and normalize the weighted monomials
        let mut cols: Vec<Vec<Complex64>> = (0..=max_degree)
            .map(|k| {
                let f: Vec<Complex64> = (0..grid.len())
                    .map(|i| {
                        let z = grid.coord_of(i);
                        z.powu(k as u32) * Complex64::new((-tau * p.eval(z)).exp(), 0.0)
                    })
                    .collect();
                normalize(f)
            })
            .collect();

        // 2. heat smoothing strips content above the null ladder
        let engine = HeatEngine::new(boxt, grid, 1e-10);
        for col in &mut cols {
            let smoothed = engine.apply_raw(opts.smoothing_time, col)?;
            *col = normalize(smoothed);
        }

        // 3. exact interior annihilation: project onto the interior-row
        //    kernel of Zbar by a least-squares correction
        let zbar = assemble_first_order(OperatorKind::ZBar, p, tau, grid)?;
        let corrector = InteriorCorrector::new(&zbar, grid)?;
        for col in &mut cols {
            corrector.correct(col);
            *col = normalize(std::mem::take(col));
        }

        // 4. pivoted QR (modified Gram-Schmidt, two passes)
        let q = pivoted_orthonormalize(cols, opts.rank_tol);

        let interior_annihilation = q
            .iter()
            .map(|col| interior_row_norm(&zbar, grid, col))
            .fold(0.0f64, f64::max);
        let gram_defect = gram_deviation(&q);
        Ok(SzegoProjector {
            grid,
            q,
            interior_annihilation,
            gram_defect,
            degree: max_degree,
        })
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn basis(&self) -> &[Vec<Complex64>] {
        &self.q
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// `S v = Q (Q† v)`.
    pub fn apply_raw(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; v.len()];
        for col in &self.q {
            let c: Complex64 = col.iter().zip(v).map(|(q, x)| q.conj() * x).sum();
            for (o, qi) in out.iter_mut().zip(col) {
                *o += c * qi;
            }
        }
        out
    }

    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        GridFunction::new(self.grid, self.apply_raw(v.values()))
    }

    /// Kernel column `S(·, w) = Σ_k q_k(·) conj(q_k(w)) / h²`.
    pub fn column(&self, w: usize) -> GridFunction {
        let h2 = self.grid.h() * self.grid.h();
        let mut out = vec![ZERO; self.grid.len()];
        for col in &self.q {
            let c = col[w].conj() / h2;
            for (o, qi) in out.iter_mut().zip(col) {
                *o += c * qi;
            }
        }
        GridFunction::new(self.grid, out)
    }

    /// Diagonal `S(z, z) = Σ_k |q_k(z)|² / h²`.
    pub fn diagonal(&self, node: usize) -> f64 {
        let h2 = self.grid.h() * self.grid.h();
        self.q.iter().map(|col| col[node].norm_sqr()).sum::<f64>() / h2
    }

    /// Self-adjointness defect probed on random vector pairs.
    pub fn adjoint_defect(&self, seed: u64, pairs: usize) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = self.grid.len();
        let mut worst = 0.0f64;
        for _ in 0..pairs {
            let v: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let u: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let sv = self.apply_raw(&v);
            let su = self.apply_raw(&u);
            let a: Complex64 = sv.iter().zip(&u).map(|(x, y)| x.conj() * y).sum();
            let b: Complex64 = v.iter().zip(&su).map(|(x, y)| x.conj() * y).sum();
            let vn: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let un: f64 = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max((a - b).norm() / (vn * un));
        }
        worst
    }

    /// Largest principal angle (radians) between the basis span and its image
    /// under `exp(-s boxt)`; small when the span sits inside the low
    /// eigenspace of `boxt`.
    pub fn heated_span_angle(&self, boxt: &SparseOperator, s: f64) -> Result<f64> {
        let engine = HeatEngine::new(boxt, self.grid, 1e-11);
        let mut heated = Vec::with_capacity(self.q.len());
        for col in &self.q {
            heated.push(normalize(engine.apply_raw(s, col)?));
        }
        let v = pivoted_orthonormalize(heated, 1e-12);
        if v.len() < self.q.len() {
            return Ok(std::f64::consts::FRAC_PI_2);
        }
        // principal angles via the singular values of V†Q
        let k = self.q.len();
        let mut m = nalgebra::DMatrix::from_element(v.len(), k, ZERO);
        for (i, vc) in v.iter().enumerate() {
            for (j, qc) in self.q.iter().enumerate() {
                m[(i, j)] = vc.iter().zip(qc).map(|(a, b)| a.conj() * b).sum();
            }
        }
        let svd = m.svd(false, false);
        let sigma_min = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .clamp(0.0, 1.0);
        Ok(sigma_min.acos())
    }
}

/// Largest monomial degree passing the mass criterion.
pub fn max_admissible_degree(
    p: &SubharmonicPolynomial,
    tau: f64,
    grid: Grid,
    opts: &SzegoOptions,
) -> usize {
    let radius = opts.mass_radius_fraction * grid.half_width();
    let mut k = 0usize;
    loop {
        let mut inside = 0.0;
        let mut total = 0.0;
        for i in 0..grid.len() {
            let z = grid.coord_of(i);
            let v = z.norm().powi(k as i32) * (-tau * p.eval(z)).exp();
            let m = v * v;
            total += m;
            if z.norm() <= radius {
                inside += m;
            }
        }
        if total == 0.0 || inside / total < opts.mass_fraction {
            return k.saturating_sub(1);
        }
        k += 1;
        if k > 4 * grid.n() {
            return k;
        }
    }
}

/// Forces interior rows of `Zbar q` to zero by the minimum-norm correction
/// `q ← q - Zbar†_I (Zbar_I Zbar_I†)^{-1} Zbar_I q`, where `Zbar_I` keeps
/// interior rows only. The inner solve is a banded Cholesky of the
/// interior-masked `Zbar Zbar†` plus a tiny ridge.
pub struct InteriorCorrector {
    zbar: SparseOperator,
    chol: BandedCholesky,
    mask: Vec<bool>,
}

impl InteriorCorrector {
    pub fn new(zbar: &SparseOperator, grid: Grid) -> Result<Self> {
        let n = grid.n();
        let mask: Vec<bool> = (0..grid.len())
            .map(|i| {
                let (a, b) = grid.ab(i);
                a >= 1 && b >= 1 && a + 1 < n && b + 1 < n
            })
            .collect();
        // M = P Zbar Zbar† P + (I - P), banded and Hermitian positive definite
        let adj = zbar.adjoint();
        let prod = zbar.matmul(&adj);
        let mut triplets = Vec::new();
        for (r, c, v) in prod.triplets() {
            if mask[r] && mask[c] {
                triplets.push((r, c, v));
            }
        }
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                triplets.push((i, i, Complex64::new(1.0, 0.0)));
            }
        }
        let mut masked = SparseOperator::from_triplets(grid.len(), &triplets);
        masked.hermitian = true;
        let ridge = 1e-12 * masked.max_norm().max(1.0);
        let chol = BandedCholesky::new(&masked, ridge)?;
        Ok(InteriorCorrector {
            zbar: zbar.clone(),
            chol,
            mask,
        })
    }

    pub fn correct(&self, col: &mut Vec<Complex64>) {
        let mut r = self.zbar.apply_vec(col);
        for (ri, &m) in r.iter_mut().zip(&self.mask) {
            if !m {
                *ri = ZERO;
            }
        }
        let mut x = self.chol.solve(&r);
        for (xi, &m) in x.iter_mut().zip(&self.mask) {
            if !m {
                *xi = ZERO;
            }
        }
        let correction = self.zbar.adjoint().apply_vec(&x);
        for (c, d) in col.iter_mut().zip(&correction) {
            *c -= d;
        }
    }
}

/// Weight-agnostic projector columns through the regularized Green identity
/// `S_ε = I - Zbar† (box + ε)^{-1} Zbar`.
pub struct SmoothedProjector {
    zbar: SparseOperator,
    zbar_adj: SparseOperator,
    chol: BandedCholesky,
    pub eps: f64,
    grid: Grid,
}

impl SmoothedProjector {
    pub fn new(
        p: &SubharmonicPolynomial,
        tau: f64,
        grid: Grid,
        eps: f64,
    ) -> Result<Self> {
        let zbar = assemble_first_order(OperatorKind::ZBar, p, tau, grid)?;
        let zbar_adj = zbar.adjoint();
        let bx = zbar.matmul(&zbar_adj);
        let chol = BandedCholesky::new(&bx, eps)?;
        Ok(SmoothedProjector {
            zbar,
            zbar_adj,
            chol,
            eps,
            grid,
        })
    }

    pub fn apply_raw(&self, v: &[Complex64]) -> Vec<Complex64> {
        let zv = self.zbar.apply_vec(v);
        let solved = self.chol.solve(&zv);
        let back = self.zbar_adj.apply_vec(&solved);
        v.iter().zip(&back).map(|(a, b)| a - b).collect()
    }

    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        GridFunction::new(self.grid, self.apply_raw(v.values()))
    }

    /// `S(·, w)` as a kernel density column.
    pub fn column(&self, w: usize) -> GridFunction {
        let delta = GridFunction::delta(self.grid, w);
        self.apply(&delta)
    }
}

/// Spectral gap of `boxt` above its null space, measured from a probe:
/// the lowest converged Ritz value of the Lanczos process started at
/// `(I - S) δ_w`. Interior probes see the physical gap; wall-localized
/// in-gap states carry no weight there.
pub fn measured_gap(
    boxt: &SparseOperator,
    szego: &SzegoProjector,
    w: usize,
    max_steps: usize,
) -> Result<f64> {
    let grid = szego.grid();
    let delta = GridFunction::delta(grid, w);
    let mut start = delta.into_values();
    let s = szego.apply_raw(&start);
    for (a, b) in start.iter_mut().zip(&s) {
        *a -= b;
    }
    let mut basis = LanczosBasis::new(boxt, &start);
    let scale = boxt.max_norm().max(1.0);
    for _ in 0..max_steps {
        if !basis.step() {
            break;
        }
        if basis.dim() % 10 == 0 {
            if let Some(r) = basis.ritz().first() {
                if r.residual_bound <= 1e-6 * scale {
                    return Ok(r.value);
                }
            }
        }
    }
    let ritz = basis.ritz();
    ritz.first()
        .map(|r| r.value)
        .ok_or_else(|| HeatlabError::EigenNoConvergence("empty Lanczos basis".into(), f64::NAN))
}

fn normalize(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let n: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in &mut v {
            *x /= n;
        }
    }
    v
}

fn interior_row_norm(zbar: &SparseOperator, grid: Grid, col: &[Complex64]) -> f64 {
    let out = zbar.apply_vec(col);
    let n = grid.n();
    let mut acc = 0.0;
    for b in 1..n - 1 {
        for a in 1..n - 1 {
            acc += out[grid.index(a, b)].norm_sqr();
        }
    }
    acc.sqrt()
}

fn gram_deviation(q: &[Vec<Complex64>]) -> f64 {
    let k = q.len();
    if k == 0 {
        return 0.0;
    }
    let mut g = nalgebra::DMatrix::from_element(k, k, ZERO);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = q[i].iter().zip(&q[j]).map(|(a, b)| a.conj() * b).sum();
            if i == j {
                g[(i, j)] -= Complex64::new(1.0, 0.0);
            }
        }
    }
    g.norm()
}

/// Modified Gram-Schmidt with column pivoting and reorthogonalization.
fn pivoted_orthonormalize(mut cols: Vec<Vec<Complex64>>, rank_tol: f64) -> Vec<Vec<Complex64>> {
    let mut q: Vec<Vec<Complex64>> = Vec::new();
    let initial_max = cols
        .iter()
        .map(|c| c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    while !cols.is_empty() {
        // pivot on the largest remaining column
        let (best, norm) = cols
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if norm < rank_tol * initial_max {
            break;
        }
        let mut col = cols.swap_remove(best);
        for _pass in 0..2 {
            for u in &q {
                let c: Complex64 = u.iter().zip(&col).map(|(a, b)| a.conj() * b).sum();
                for (x, ui) in col.iter_mut().zip(u) {
                    *x -= c * ui;
                }
            }
        }
        let n: f64 = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n < rank_tol * initial_max {
            continue;
        }
        for x in &mut col {
            *x /= n;
        }
        // deflate the remaining columns against the new direction
        for c in &mut cols {
            let coeff: Complex64 = col.iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, ui) in c.iter_mut().zip(&col) {
                *x -= coeff * ui;
            }
        }
        q.push(col);
    }
    q
}
