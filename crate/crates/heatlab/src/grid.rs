//! Uniform square lattice over `[-L, L]^2 ⊂ ℂ` and complex samples on it.
//!
//! Nodes are indexed row-major: node `(a, b)` (column `a` along x1, row `b`
//! along x2) has flat index `a + n*b` and coordinate
//! `z_ab = (-L + a h) + i (-L + b h)` with `h = 2L/(n-1)`. This indexing is
//! frozen: the operator and kernel dump formats depend on it.

use num_complex::Complex64;

use crate::error::{HeatlabError, Result};

/// Truncated uniform grid on the square `[-L, L]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    n: usize,
    h: f64,
}

impl Grid {
    /// Build an `n x n` grid over `[-L, L]^2`. Requires `L > 0` and `n >= 8`.
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(HeatlabError::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n < 8 {
            return Err(HeatlabError::InvalidGrid(format!("need n >= 8, got {n}")));
        }
        let h = 2.0 * half_width / (n as f64 - 1.0);
        Ok(Grid { half_width, n, h })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Points per side.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Lattice spacing `2L/(n-1)`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total node count `n^2`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of node `(a, b)`.
    #[inline]
    pub fn index(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < self.n && b < self.n);
        a + self.n * b
    }

    /// Inverse of [`Grid::index`].
    #[inline]
    pub fn ab(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    /// Coordinate of node `(a, b)`.
    #[inline]
    pub fn coord(&self, a: usize, b: usize) -> Complex64 {
        Complex64::new(
            -self.half_width + a as f64 * self.h,
            -self.half_width + b as f64 * self.h,
        )
    }

    /// Coordinate of the node with flat index `idx`.
    #[inline]
    pub fn coord_of(&self, idx: usize) -> Complex64 {
        let (a, b) = self.ab(idx);
        self.coord(a, b)
    }

    /// Flat index of the grid node nearest to `z` (clamped to the square).
    pub fn nearest_node(&self, z: Complex64) -> usize {
        let clamp = |t: f64| -> usize {
            let a = ((t + self.half_width) / self.h).round();
            a.clamp(0.0, (self.n - 1) as f64) as usize
        };
        self.index(clamp(z.re), clamp(z.im))
    }

    /// True when `(a, b)` is at least `depth` cells away from every wall.
    #[inline]
    pub fn is_interior(&self, a: usize, b: usize, depth: usize) -> bool {
        a >= depth && b >= depth && a + depth < self.n && b + depth < self.n
    }

    /// Euclidean distance from node `idx` to the boundary of the square.
    pub fn wall_distance(&self, idx: usize) -> f64 {
        let z = self.coord_of(idx);
        let dx = self.half_width - z.re.abs();
        let dy = self.half_width - z.im.abs();
        dx.min(dy)
    }

    /// Flat indices of all nodes with `|z - center| < radius`.
    pub fn nodes_within(&self, center: Complex64, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        for b in 0..self.n {
            for a in 0..self.n {
                if (self.coord(a, b) - center).norm() < radius {
                    out.push(self.index(a, b));
                }
            }
        }
        out
    }
}

/// Complex-valued samples on a [`Grid`], with the discrete `L^2(ℂ)` inner
/// product `⟨f, g⟩ = h^2 Σ f conj(g)`.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.len(), "value vector must match grid");
        GridFunction { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Sample a closure at every node.
    pub fn sample(grid: Grid, f: impl Fn(Complex64) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coord_of(i))).collect();
        GridFunction { grid, values }
    }

    /// Discrete delta at node `w`, scaled by `1/h^2` so that
    /// `⟨f, δ_w⟩ ≈ f(w)` and heat columns approximate kernel densities.
    pub fn delta(grid: Grid, w: usize) -> Self {
        let mut g = Self::zeros(grid);
        g.values[w] = Complex64::new(1.0 / (grid.h() * grid.h()), 0.0);
        g
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `h^2 Σ_i f_i conj(g_i)`.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(f, g)| f * g.conj())
            .sum();
        s * self.grid.h() * self.grid.h()
    }

    /// Discrete `L^2` norm.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.h() * self.grid.h()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &GridFunction) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += c * o;
        }
    }
}
