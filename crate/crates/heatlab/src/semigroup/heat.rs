//! Krylov heat semigroup: `exp(-s A) f` with adaptive basis growth, and heat
//! kernel columns from discrete deltas.

use num_complex::Complex64;

use crate::error::{HeatlabError, Result};
use crate::grid::{Grid, GridFunction};
use crate::semigroup::lanczos::LanczosBasis;
use crate::sparse::SparseOperator;

/// Heat-semigroup driver for one Hermitian PSD operator.
pub struct HeatEngine<'a> {
    op: &'a SparseOperator,
    grid: Grid,
    /// Power-iteration estimate of the top of the spectrum (slightly inflated).
    pub lambda_max: f64,
    pub tol: f64,
    /// Krylov dimension cap per substep.
    pub max_dim: usize,
}

impl<'a> HeatEngine<'a> {
    pub fn new(op: &'a SparseOperator, grid: Grid, tol: f64) -> Self {
        assert!(op.hermitian, "heat engine needs a Hermitian operator");
        let lambda_max = 1.05 * op.power_iteration_lambda_max(50, 0x9e3779b9) + 1e-12;
        HeatEngine {
            op,
            grid,
            lambda_max,
            tol,
            max_dim: 240,
        }
    }

    pub fn op(&self) -> &SparseOperator {
        self.op
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// `exp(-s op) f` to the engine tolerance (relative to `|f|`).
    pub fn apply(&self, s: f64, f: &GridFunction) -> Result<GridFunction> {
        let out = self.apply_raw(s, f.values())?;
        Ok(GridFunction::new(self.grid, out))
    }

    pub fn apply_raw(&self, s: f64, f: &[Complex64]) -> Result<Vec<Complex64>> {
        if s < 0.0 {
            return Err(HeatlabError::KrylovNoConvergence("negative time".into()));
        }
        if s == 0.0 {
            return Ok(f.to_vec());
        }
        let fnorm: f64 = f.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if fnorm == 0.0 {
            return Ok(f.to_vec());
        }
        // substep stiff horizons so each Krylov solve stays well-conditioned
        let steps = (1.0 + (s * self.lambda_max / 1500.0)).floor() as usize;
        let ds = s / steps as f64;
        let sub_tol = self.tol / steps as f64;
        let mut cur = f.to_vec();
        for _ in 0..steps {
            cur = self.single_step(ds, &cur, sub_tol * fnorm)?;
        }
        Ok(cur)
    }

    fn single_step(&self, s: f64, f: &[Complex64], abs_tol: f64) -> Result<Vec<Complex64>> {
        let mut basis = LanczosBasis::new(self.op, f);
        let mut last_est = f64::INFINITY;
        loop {
            let stepped = basis.step();
            let m = basis.dim();
            if m >= 4 && (m % 4 == 0 || !stepped || m >= self.max_dim) {
                let (out, est) = basis.expm(s);
                if est <= abs_tol || basis.breakdown {
                    return Ok(out);
                }
                if m >= self.max_dim {
                    // recurse on halved time; errors compound additively
                    if s * self.lambda_max < 1.0 {
                        return Err(HeatlabError::KrylovNoConvergence(format!(
                            "estimate {est:.3e} > {abs_tol:.3e} at dimension cap {m}"
                        )));
                    }
                    let half = self.single_step(s / 2.0, f, abs_tol / 2.0)?;
                    return self.single_step(s / 2.0, &half, abs_tol / 2.0);
                }
                last_est = est;
            }
            if !stepped && basis.dim() == 0 {
                return Err(HeatlabError::KrylovNoConvergence(format!(
                    "breakdown before first step (last estimate {last_est:.3e})"
                )));
            }
        }
    }

    /// `exp(-s op) f` for several times sharing one Krylov basis. Falls back
    /// to individual applies for times the shared basis cannot certify.
    pub fn apply_multi(&self, times: &[f64], f: &GridFunction) -> Result<Vec<GridFunction>> {
        let fnorm = f.norm() * (1.0 / self.grid.h());
        // raw-vector norm for tolerance bookkeeping
        let raw_norm: f64 = f.values().iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if raw_norm == 0.0 || times.is_empty() {
            return Ok(times.iter().map(|_| f.clone()).collect());
        }
        let _ = fnorm;
        let hardest = times.iter().cloned().fold(0.0f64, f64::max);
        if hardest * self.lambda_max > 1500.0 {
            // stiff: just do them individually (substepping kicks in)
            return times.iter().map(|&s| self.apply(s, f)).collect();
        }
        let mut basis = LanczosBasis::new(self.op, f.values());
        loop {
            let stepped = basis.step();
            let m = basis.dim();
            if m >= 4 && (m % 4 == 0 || !stepped || m >= self.max_dim) {
                let worst = times
                    .iter()
                    .map(|&s| basis.expm(s).1)
                    .fold(0.0f64, f64::max);
                if worst <= self.tol * raw_norm || basis.breakdown {
                    return Ok(times
                        .iter()
                        .map(|&s| GridFunction::new(self.grid, basis.expm(s).0))
                        .collect());
                }
                if m >= self.max_dim {
                    return times.iter().map(|&s| self.apply(s, f)).collect();
                }
            }
        }
    }
}

/// Which kernel a slice holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Heat kernel of `box`.
    Heat,
    /// Heat kernel of `boxt`.
    HeatTilde,
    /// Relative heat kernel `exp(-s boxt)(I - S)`.
    GTilde,
    Szego,
    Green,
    /// `R = Z (Green column)`.
    Relative,
    Resolvent,
}

impl KernelKind {
    pub fn label(self) -> &'static str {
        match self {
            KernelKind::Heat => "H",
            KernelKind::HeatTilde => "Htilde",
            KernelKind::GTilde => "Gtilde",
            KernelKind::Szego => "S",
            KernelKind::Green => "G",
            KernelKind::Relative => "R",
            KernelKind::Resolvent => "r_lambda",
        }
    }
}

/// One kernel column: values of `K(·, w)` for a fixed source node.
#[derive(Debug, Clone)]
pub struct KernelSlice {
    pub kind: KernelKind,
    /// `s` for heat-type kernels, `λ` for the resolvent, absent otherwise.
    pub parameter: Option<f64>,
    pub source: usize,
    pub values: GridFunction,
    /// Set when the source sits inside the boundary collar for its scale.
    pub collar_warning: bool,
}

impl KernelSlice {
    pub fn value_at(&self, node: usize) -> Complex64 {
        self.values.values()[node]
    }

    /// Diagonal entry `K(w, w)`.
    pub fn diagonal(&self) -> Complex64 {
        self.value_at(self.source)
    }
}

/// Collar rule: a probe must keep distance `4 max(sqrt(s), mu)` from the wall.
pub fn collar_violation(grid: Grid, w: usize, s: f64, mu: f64) -> bool {
    grid.wall_distance(w) < 4.0 * s.sqrt().max(mu)
}

/// Heat kernel column `H(s, ·, w)`: the semigroup applied to `δ_w / h²`.
pub fn heat_kernel_column(
    engine: &HeatEngine,
    kind: KernelKind,
    s: f64,
    w: usize,
    mu_w: f64,
) -> Result<KernelSlice> {
    if s <= 0.0 {
        return Err(HeatlabError::KrylovNoConvergence(
            "heat kernel column needs s > 0".into(),
        ));
    }
    let grid = engine.grid();
    let delta = GridFunction::delta(grid, w);
    let values = engine.apply(s, &delta)?;
    Ok(KernelSlice {
        kind,
        parameter: Some(s),
        source: w,
        values,
        collar_warning: collar_violation(grid, w, s, mu_w),
    })
}

/// Heat kernel columns at several times from one shared basis.
pub fn heat_kernel_columns(
    engine: &HeatEngine,
    kind: KernelKind,
    times: &[f64],
    w: usize,
    mu_w: f64,
) -> Result<Vec<KernelSlice>> {
    let grid = engine.grid();
    let delta = GridFunction::delta(grid, w);
    let outs = engine.apply_multi(times, &delta)?;
    Ok(times
        .iter()
        .zip(outs)
        .map(|(&s, values)| KernelSlice {
            kind,
            parameter: Some(s),
            source: w,
            values,
            collar_warning: collar_violation(grid, w, s, mu_w),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_box, random_interior_bump};
    use crate::polygeom::SubharmonicPolynomial;
    use crate::semigroup::spectral::{decompose, EigenRequest};

    fn free_engine(grid: Grid) -> (SparseOperator, SubharmonicPolynomial) {
        let p = SubharmonicPolynomial::abs_z_squared();
        let op = assemble_box(&p, 0.0, grid, false).unwrap();
        (op, p)
    }

    #[test]
    fn zero_time_is_identity_and_zero_function_passes_through() {
        let grid = Grid::new(3.0, 20).unwrap();
        let (op, _) = free_engine(grid);
        let engine = HeatEngine::new(&op, grid, 1e-9);
        let f = random_interior_bump(grid, 3, 2);
        let out = engine.apply(0.0, &f).unwrap();
        assert_eq!(out.values(), f.values());
        let z = GridFunction::zeros(grid);
        let out = engine.apply(1.0, &z).unwrap();
        assert_eq!(out.values(), z.values());
    }

    #[test]
    fn eigenvector_decays_at_its_eigenvalue() {
        let grid = Grid::new(3.0, 16).unwrap();
        let p = SubharmonicPolynomial::abs_z_squared();
        let op = assemble_box(&p, 1.0, grid, false).unwrap();
        let dec = decompose(&op, EigenRequest::Lowest(30), 3).unwrap();
        // pick a mid-spectrum eigenpair
        let idx = 25;
        let (lambda, v) = (dec.eigenvalues[idx], &dec.eigenvectors[idx]);
        let engine = HeatEngine::new(&op, grid, 1e-10);
        let f = GridFunction::new(grid, v.clone());
        let s = 0.4;
        let out = engine.apply(s, &f).unwrap();
        let scale = (-s * lambda).exp();
        let err: f64 = out
            .values()
            .iter()
            .zip(v)
            .map(|(o, vi)| (o - Complex64::new(scale, 0.0) * vi).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn semigroup_property_and_contraction() {
        let grid = Grid::new(4.0, 24).unwrap();
        let p = SubharmonicPolynomial::abs_z_squared();
        let op = assemble_box(&p, 1.0, grid, true).unwrap();
        let tol = 1e-9;
        let engine = HeatEngine::new(&op, grid, tol);
        let f = random_interior_bump(grid, 11, 2);
        let (s, t) = (0.3, 0.7);
        let once = engine.apply(s + t, &f).unwrap();
        let twice = engine.apply(s, &engine.apply(t, &f).unwrap()).unwrap();
        let mut diff = once.clone();
        diff.axpy(Complex64::new(-1.0, 0.0), &twice);
        assert!(diff.norm() <= 10.0 * tol * f.norm(), "semigroup diff {}", diff.norm());
        // contraction
        for s in [0.05, 0.3, 1.5, 6.0] {
            let out = engine.apply(s, &f).unwrap();
            assert!(out.norm() <= f.norm() * (1.0 + 1e-10), "s = {s}");
        }
    }

    #[test]
    fn multi_time_matches_individual_applies() {
        let grid = Grid::new(4.0, 20).unwrap();
        let p = SubharmonicPolynomial::abs_z_squared();
        let op = assemble_box(&p, 1.0, grid, true).unwrap();
        let engine = HeatEngine::new(&op, grid, 1e-9);
        let f = random_interior_bump(grid, 17, 2);
        let times = [0.05, 0.2, 0.8, 2.0];
        let multi = engine.apply_multi(&times, &f).unwrap();
        for (s, m) in times.iter().zip(&multi) {
            let single = engine.apply(*s, &f).unwrap();
            let mut d = m.clone();
            d.axpy(Complex64::new(-1.0, 0.0), &single);
            assert!(d.norm() < 1e-8 * f.norm(), "s = {s}: {}", d.norm());
        }
    }

    #[test]
    fn free_heat_column_matches_analytic_gaussian() {
        // τ = 0: H(s, z, w) = (1/(π s)) exp(-|z-w|²/s), uniformly to O(h²/s)
        let grid = Grid::new(6.0, 97).unwrap();
        let (op, _) = free_engine(grid);
        let engine = HeatEngine::new(&op, grid, 1e-8);
        let w = grid.index(48, 48);
        let s = 0.5;
        let slice = heat_kernel_column(&engine, KernelKind::Heat, s, w, 0.0).unwrap();
        assert!(!slice.collar_warning);
        let wz = grid.coord_of(w);
        let mut worst = 0.0f64;
        let peak = 1.0 / (std::f64::consts::PI * s);
        for idx in 0..grid.len() {
            let d = (grid.coord_of(idx) - wz).norm();
            if d <= 3.0 * s.sqrt() {
                let exact = peak * (-d * d / s).exp();
                worst = worst.max((slice.value_at(idx).re - exact).abs());
            }
        }
        assert!(worst / peak < 0.02, "uniform relative error {}", worst / peak);
        // diagonal real and nonnegative
        assert!(slice.diagonal().re >= -1e-8);
        assert!(slice.diagonal().im.abs() < 1e-8 * slice.diagonal().re.abs());
        // substochastic mass under Dirichlet truncation
        let mass: Complex64 = slice.values.values().iter().sum();
        let mass = mass.re * grid.h() * grid.h();
        assert!(mass <= 1.0 + 1e-6 && mass > 0.9, "mass {mass}");
    }

    #[test]
    fn collar_warning_raised_near_wall() {
        let grid = Grid::new(3.0, 20).unwrap();
        let (op, _) = free_engine(grid);
        let engine = HeatEngine::new(&op, grid, 1e-6);
        let w = grid.index(1, 10);
        let slice = heat_kernel_column(&engine, KernelKind::Heat, 0.5, w, 0.0).unwrap();
        assert!(slice.collar_warning);
    }
}
