//! Compressed sparse row operators over ℂ and a banded Cholesky solver.
//!
//! Everything here is deterministic: rows are built in index order, column
//! indices are kept sorted, and products accumulate in sorted column order,
//! so assembled matrices are bitwise reproducible. That also makes `A A†`
//! exactly Hermitian in floating point (the (i,j) and (j,i) sums are
//! conjugates term by term).

use num_complex::Complex64;

use crate::error::{HeatlabError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sparse operator in CSR form with Hermitian-structure metadata.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<Complex64>,
    pub hermitian: bool,
    pub positive_semidefinite: bool,
}

impl SparseOperator {
    /// Build from unsorted triplets; duplicate entries are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        SparseOperator {
            dim,
            indptr,
            indices,
            data,
            hermitian: false,
            positive_semidefinite: false,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let triplets: Vec<_> = (0..dim)
            .map(|i| (i, i, Complex64::new(1.0, 0.0)))
            .collect();
        let mut m = Self::from_triplets(dim, &triplets);
        m.hermitian = true;
        m.positive_semidefinite = true;
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[Complex64]) {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        (&self.indices[lo..hi], &self.data[lo..hi])
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.dim];
        self.apply(x, &mut y);
        y
    }

    /// Conjugate transpose. Under the uniform `h^2` inner product this is the
    /// exact matrix adjoint.
    pub fn adjoint(&self) -> SparseOperator {
        self.transposed(true)
    }

    /// Plain transpose (no conjugation); used to move derivative words onto
    /// the source slot of a kernel.
    pub fn transpose(&self) -> SparseOperator {
        self.transposed(false)
    }

    fn transposed(&self, conj: bool) -> SparseOperator {
        let mut counts = vec![0usize; self.dim + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.dim {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![ZERO; self.nnz()];
        let mut next = counts;
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let slot = next[c];
                next[c] += 1;
                indices[slot] = r;
                data[slot] = if conj { self.data[k].conj() } else { self.data[k] };
            }
        }
        SparseOperator {
            dim: self.dim,
            indptr,
            indices,
            data,
            hermitian: self.hermitian,
            positive_semidefinite: self.positive_semidefinite,
        }
    }

    /// Sparse product `self * other`, accumulating columns in sorted order.
    pub fn matmul(&self, other: &SparseOperator) -> SparseOperator {
        assert_eq!(self.dim, other.dim);
        let dim = self.dim;
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut acc: Vec<Complex64> = vec![ZERO; dim];
        let mut marker: Vec<u32> = vec![u32::MAX; dim];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..dim {
            touched.clear();
            for k in self.indptr[r]..self.indptr[r + 1] {
                let mid = self.indices[k];
                let v = self.data[k];
                for k2 in other.indptr[mid]..other.indptr[mid + 1] {
                    let c = other.indices[k2];
                    if marker[c] != r as u32 {
                        marker[c] = r as u32;
                        acc[c] = ZERO;
                        touched.push(c);
                    }
                    acc[c] += v * other.data[k2];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                indices.push(c);
                data.push(acc[c]);
            }
            indptr.push(indices.len());
        }
        SparseOperator {
            dim,
            indptr,
            indices,
            data,
            hermitian: false,
            positive_semidefinite: false,
        }
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &SparseOperator, scale: Complex64) -> SparseOperator {
        assert_eq!(self.dim, other.dim);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                triplets.push((r, self.indices[k], self.data[k]));
            }
            for k in other.indptr[r]..other.indptr[r + 1] {
                triplets.push((r, other.indices[k], scale * other.data[k]));
            }
        }
        SparseOperator::from_triplets(self.dim, &triplets)
    }

    pub fn scaled(&self, c: Complex64) -> SparseOperator {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= c;
        }
        out
    }

    /// Largest entry magnitude (operator max-norm used by the structure flags).
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max-norm of `self - other` (missing entries count as zero).
    pub fn max_diff(&self, other: &SparseOperator) -> f64 {
        let d = self.add_scaled(other, Complex64::new(-1.0, 0.0));
        d.max_norm()
    }

    /// Hermitian deviation `max |A - A†|`.
    pub fn hermitian_deviation(&self) -> f64 {
        self.max_diff(&self.adjoint())
    }

    /// Largest eigenvalue estimate by power iteration (Hermitian case).
    pub fn power_iteration_lambda_max(&self, steps: usize, seed: u64) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<Complex64> = (0..self.dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut w = vec![ZERO; self.dim];
        let mut lambda = 0.0;
        for _ in 0..steps {
            let norm = (v.iter().map(|x| x.norm_sqr()).sum::<f64>()).sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for x in &mut v {
                *x /= norm;
            }
            self.apply(&v, &mut w);
            lambda = v
                .iter()
                .zip(&w)
                .map(|(a, b)| (a.conj() * b).re)
                .sum::<f64>();
            std::mem::swap(&mut v, &mut w);
        }
        lambda
    }

    /// Dense copy (small grids / ground-truth paths only).
    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let mut m = nalgebra::DMatrix::from_element(self.dim, self.dim, ZERO);
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                m[(r, self.indices[k])] = self.data[k];
            }
        }
        m
    }

    /// Half bandwidth `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                bw = bw.max(self.indices[k].abs_diff(r));
            }
        }
        bw
    }

    /// Sorted triplet view `(row, col, value)` for dumps.
    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.push((r, self.indices[k], self.data[k]));
            }
        }
        out
    }
}

/// Banded Cholesky factorization `A = L L†` of a Hermitian positive-definite
/// operator, stored by diagonals. Solves are exact up to rounding, which keeps
/// Green/resolvent columns independent of any iteration tolerance.
pub struct BandedCholesky {
    dim: usize,
    bw: usize,
    /// `band[d][i]` holds `L[i + d, i]` for `d = 0..=bw`.
    band: Vec<Vec<Complex64>>,
}

impl BandedCholesky {
    /// Factor `A + shift I`. Fails on a non-positive pivot.
    pub fn new(a: &SparseOperator, shift: f64) -> Result<Self> {
        let dim = a.dim();
        let bw = a.bandwidth();
        let mut band: Vec<Vec<Complex64>> = (0..=bw).map(|_| vec![ZERO; dim]).collect();
        for r in 0..dim {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= r {
                    band[r - c][c] = v;
                }
            }
        }
        for i in 0..dim {
            band[0][i] += Complex64::new(shift, 0.0);
        }
        // In-place banded Cholesky (lower form).
        for j in 0..dim {
            let mut pivot = band[0][j].re;
            let start = j.saturating_sub(bw);
            for k in start..j {
                let l = band[j - k][k];
                pivot -= l.norm_sqr();
            }
            if pivot <= 0.0 || !pivot.is_finite() {
                return Err(HeatlabError::SolveFailure(format!(
                    "banded Cholesky pivot {pivot:.3e} at column {j}"
                )));
            }
            let ljj = pivot.sqrt();
            band[0][j] = Complex64::new(ljj, 0.0);
            let imax = (j + bw).min(dim - 1);
            for i in (j + 1)..=imax {
                let mut s = band[i - j][j];
                let kstart = i.saturating_sub(bw).max(start);
                for k in kstart..j {
                    // need both i-k and j-k within band
                    if i - k <= bw {
                        s -= band[i - k][k] * band[j - k][k].conj();
                    }
                }
                band[i - j][j] = s / ljj;
            }
        }
        Ok(BandedCholesky { dim, bw, band })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut y = b.to_vec();
        // forward: L y = b
        for i in 0..self.dim {
            let start = i.saturating_sub(self.bw);
            let mut s = y[i];
            for k in start..i {
                s -= self.band[i - k][k] * y[k];
            }
            y[i] = s / self.band[0][i];
        }
        // backward: L† x = y
        for i in (0..self.dim).rev() {
            let imax = (i + self.bw).min(self.dim - 1);
            let mut s = y[i];
            for k in (i + 1)..=imax {
                s -= self.band[k - i][i].conj() * y[k];
            }
            y[i] = s / self.band[0][i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_sparse(dim: usize, seed: u64) -> SparseOperator {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for r in 0..dim {
            for _ in 0..3 {
                let c = rng.gen_range(0..dim);
                trip.push((
                    r,
                    c,
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                ));
            }
        }
        SparseOperator::from_triplets(dim, &trip)
    }

    #[test]
    fn product_with_own_adjoint_is_exactly_hermitian() {
        let a = random_sparse(40, 7);
        let aat = a.matmul(&a.adjoint());
        assert_eq!(aat.hermitian_deviation(), 0.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = random_sparse(25, 1);
        let b = random_sparse(25, 2);
        let ab = a.matmul(&b);
        let dense = a.to_dense() * b.to_dense();
        let diff = (ab.to_dense() - dense).norm();
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn adjoint_matches_dense() {
        let a = random_sparse(25, 3);
        let diff = (a.adjoint().to_dense() - a.to_dense().adjoint()).norm();
        assert!(diff < 1e-14);
    }

    #[test]
    fn banded_cholesky_solves_spd_system() {
        let a = random_sparse(60, 9);
        // A A† + I is Hermitian positive definite
        let spd = a.matmul(&a.adjoint());
        let chol = BandedCholesky::new(&spd, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let b: Vec<Complex64> = (0..60)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let x = chol.solve(&b);
        let mut r = spd.apply_vec(&x);
        for (ri, (xi, bi)) in r.iter_mut().zip(x.iter().zip(&b)) {
            *ri += xi - bi;
        }
        let res: f64 = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(res / bn < 1e-10, "residual {res}");
    }
}
