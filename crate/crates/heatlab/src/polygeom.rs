//! Exact calculus for the subharmonic polynomial weight and the
//! Carnot-Caratheodory size functions Λ and μ.
//!
//! Polynomials are stored in the monomial basis `z^j zbar^k`, where Wirtinger
//! derivatives act diagonally. A conversion from real monomials
//! `x1^a x2^b` is provided since test weights are usually written that way.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{HeatlabError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How a candidate polynomial is validated at construction.
#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    /// Half width of the square on which Δp is sampled.
    pub half_width: f64,
    /// Probe lattice is `points x points`.
    pub points: usize,
    /// Allowed negativity of Δp at probe points.
    pub eps_sub: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            half_width: 8.0,
            points: 64,
            eps_sub: 0.0,
        }
    }
}

/// Real-valued subharmonic, nonharmonic polynomial `p(z) = Σ a_jk z^j zbar^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubharmonicPolynomial {
    coeffs: BTreeMap<(u32, u32), Complex64>,
    degree: u32,
}

impl SubharmonicPolynomial {
    /// Validate and build from monomial coefficients.
    ///
    /// Checks, in order: conjugate symmetry `a_jk = conj(a_kj)` (reality of p),
    /// nonharmonicity (some mixed coefficient with `j, k >= 1` nonzero), and
    /// subharmonicity `Δp >= -eps_sub` sampled on the validation lattice.
    pub fn new(
        coeffs: impl IntoIterator<Item = ((u32, u32), Complex64)>,
        opts: ValidationOptions,
    ) -> Result<Self> {
        let mut map: BTreeMap<(u32, u32), Complex64> = BTreeMap::new();
        for ((j, k), v) in coeffs {
            if v != ZERO {
                *map.entry((j, k)).or_insert(ZERO) += v;
            }
        }
        let max_mag = map.values().map(|v| v.norm()).fold(0.0, f64::max);
        if max_mag == 0.0 {
            return Err(HeatlabError::InvalidPolynomial("zero polynomial".into()));
        }
        map.retain(|_, v| v.norm() > 0.0);
        for (&(j, k), &v) in map.iter() {
            let mirror = map.get(&(k, j)).copied().unwrap_or(ZERO);
            if (v - mirror.conj()).norm() > 1e-12 * max_mag {
                return Err(HeatlabError::InvalidPolynomial(format!(
                    "reality violated: a_{{{j}{k}}} = {v} but conj(a_{{{k}{j}}}) = {}",
                    mirror.conj()
                )));
            }
        }
        let degree = map.keys().map(|&(j, k)| j + k).max().unwrap_or(0);
        let mixed_nonzero = map
            .iter()
            .any(|(&(j, k), v)| j >= 1 && k >= 1 && v.norm() > 1e-14 * max_mag);
        if !mixed_nonzero {
            return Err(HeatlabError::InvalidPolynomial(
                "harmonic polynomial: every mixed coefficient vanishes, so μ is undefined".into(),
            ));
        }
        let p = SubharmonicPolynomial { coeffs: map, degree };
        // Sampled subharmonicity check; a symbolic positivity proof is out of scope.
        let m = opts.points.max(2);
        for bi in 0..m {
            for ai in 0..m {
                let step = 2.0 * opts.half_width / (m as f64 - 1.0);
                let z = Complex64::new(
                    -opts.half_width + ai as f64 * step,
                    -opts.half_width + bi as f64 * step,
                );
                let lap = p.laplacian(z);
                if lap < -opts.eps_sub {
                    return Err(HeatlabError::InvalidPolynomial(format!(
                        "not subharmonic: Δp({z}) = {lap:.6e}"
                    )));
                }
            }
        }
        Ok(p)
    }

    pub fn from_monomials(
        coeffs: impl IntoIterator<Item = ((u32, u32), Complex64)>,
    ) -> Result<Self> {
        Self::new(coeffs, ValidationOptions::default())
    }

    /// Build from real monomials `Σ c_ab x1^a x2^b`.
    ///
    /// The conversion substitutes `x1 = (z + zbar)/2`, `x2 = (z - zbar)/(2i)`
    /// and expands; the factors are dyadic rationals times powers of i, so the
    /// conversion is exact for dyadic inputs.
    pub fn from_real_monomials(terms: &[(u32, u32, f64)]) -> Result<Self> {
        let mut coeffs: BTreeMap<(u32, u32), Complex64> = BTreeMap::new();
        for &(a, b, c) in terms {
            if c == 0.0 {
                continue;
            }
            // x1^a = 2^-a Σ_r C(a,r) z^r zbar^(a-r)
            // x2^b = (2i)^-b Σ_s C(b,s) z^s (-zbar)^(b-s)
            let scale = Complex64::new(c, 0.0)
                * Complex64::new(0.5, 0.0).powu(a)
                * (Complex64::new(0.0, -0.5)).powu(b);
            for r in 0..=a {
                for s in 0..=b {
                    let sign = if (b - s) % 2 == 0 { 1.0 } else { -1.0 };
                    let coef = scale * binomial(a, r) * binomial(b, s) * sign;
                    *coeffs.entry((r + s, a - r + b - s)).or_insert(ZERO) += coef;
                }
            }
        }
        Self::from_monomials(coeffs)
    }

    /// Convenience weights used throughout the tests.
    pub fn abs_z_squared() -> Self {
        Self::from_monomials([((1, 1), Complex64::new(1.0, 0.0))]).unwrap()
    }

    pub fn x_power(two_m: u32) -> Self {
        Self::from_real_monomials(&[(two_m, 0, 1.0)]).unwrap()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coeffs(&self) -> &BTreeMap<(u32, u32), Complex64> {
        &self.coeffs
    }

    /// `p(z)`; imaginary parts cancel by the reality invariant.
    pub fn eval(&self, z: Complex64) -> f64 {
        let zb = z.conj();
        let mut acc = ZERO;
        for (&(j, k), &c) in &self.coeffs {
            acc += c * z.powu(j) * zb.powu(k);
        }
        acc.re
    }

    /// Normalized Wirtinger derivative
    /// `A_jk(z) = (1/(j! k!)) ∂^{j+k} p / ∂z^j ∂zbar^k (z)`.
    pub fn wirtinger(&self, j: u32, k: u32, z: Complex64) -> Complex64 {
        let zb = z.conj();
        let mut acc = ZERO;
        for (&(m, l), &c) in &self.coeffs {
            if m >= j && l >= k {
                acc += c * binomial(m, j) * binomial(l, k) * z.powu(m - j) * zb.powu(l - k);
            }
        }
        acc
    }

    /// `∂p/∂z`.
    pub fn dz(&self, z: Complex64) -> Complex64 {
        self.wirtinger(1, 0, z)
    }

    /// `∂p/∂zbar`.
    pub fn dzbar(&self, z: Complex64) -> Complex64 {
        self.wirtinger(0, 1, z)
    }

    /// `Δp = 4 ∂^2 p/∂z∂zbar` (real).
    pub fn laplacian(&self, z: Complex64) -> f64 {
        4.0 * self.wirtinger(1, 1, z).re
    }

    /// `(∂p/∂x1, ∂p/∂x2)`, both real.
    pub fn gradient(&self, z: Complex64) -> (f64, f64) {
        let pz = self.dz(z);
        (2.0 * pz.re, -2.0 * pz.im)
    }

    /// `|∇p|^2 = 4 |∂p/∂z|^2`.
    pub fn grad_norm_sqr(&self, z: Complex64) -> f64 {
        4.0 * self.dz(z).norm_sqr()
    }

    /// The swapped polynomial `p~(x1, x2) = p(x2, x1)`.
    ///
    /// In the monomial basis the swap sends `z -> i zbar`, so
    /// `a'_jk = i^(k-j) a_kj`.
    pub fn swap_axes(&self) -> Self {
        let mut coeffs = BTreeMap::new();
        for (&(j, k), &c) in &self.coeffs {
            let rot = Complex64::new(0.0, 1.0).powi(j as i32 - k as i32);
            coeffs.insert((k, j), rot * c);
        }
        SubharmonicPolynomial {
            coeffs,
            degree: self.degree,
        }
    }

    /// Full Wirtinger coefficient table at `z`.
    pub fn coeff_table(&self, z: Complex64) -> CoeffTable {
        let mut entries = BTreeMap::new();
        for j in 0..=self.degree {
            for k in 0..=(self.degree - j) {
                let v = self.wirtinger(j, k, z);
                if v != ZERO {
                    entries.insert((j, k), v);
                }
            }
        }
        CoeffTable { center: z, entries }
    }

    /// `Λ(z, δ) = Σ_{j,k >= 1} |A_jk(z)| δ^{j+k}`.
    pub fn size_lambda(&self, z: Complex64, delta: f64) -> f64 {
        assert!(delta > 0.0, "delta must be positive");
        let mut acc = 0.0;
        for j in 1..=self.degree {
            for k in 1..=(self.degree.saturating_sub(j)) {
                let a = self.wirtinger(j, k, z).norm();
                if a > 0.0 {
                    acc += a * delta.powi((j + k) as i32);
                }
            }
        }
        acc
    }

    /// `μ_p(z, δ) = inf_{j,k >= 1, A_jk(z) != 0} |δ / A_jk(z)|^{1/(j+k)}`.
    ///
    /// The infimum runs over coefficients above `1e-14 * max |A_jk(z)|`; the
    /// threshold keeps floating-point phantom terms out of the infimum.
    pub fn size_mu(&self, z: Complex64, delta: f64) -> Result<f64> {
        assert!(delta > 0.0, "delta must be positive");
        let mut mags = Vec::new();
        for j in 1..=self.degree {
            for k in 1..=(self.degree.saturating_sub(j)) {
                let a = self.wirtinger(j, k, z).norm();
                mags.push((j + k, a));
            }
        }
        let max_a = mags.iter().map(|&(_, a)| a).fold(0.0, f64::max);
        if max_a == 0.0 {
            return Err(HeatlabError::InvalidPolynomial(format!(
                "every mixed Wirtinger coefficient vanishes at {z}; μ is undefined"
            )));
        }
        let mut mu = f64::INFINITY;
        for (ord, a) in mags {
            if a > 1e-14 * max_a {
                mu = mu.min((delta / a).powf(1.0 / ord as f64));
            }
        }
        Ok(mu)
    }

    /// Build a probe record with both size functions evaluated.
    pub fn probe(&self, z: Complex64, delta: f64) -> Result<GeometryProbe> {
        Ok(GeometryProbe {
            z,
            delta,
            lambda: self.size_lambda(z, delta),
            mu: self.size_mu(z, delta)?,
        })
    }

    /// Worst approximate-inverse ratio
    /// `max(μ(z,Λ(z,δ))/δ, δ/μ(z,Λ(z,δ)), Λ(z,μ(z,δ))/δ, δ/Λ(z,μ(z,δ)))`
    /// over the probe list.
    pub fn approx_inverse_report(&self, probes: &[(Complex64, f64)]) -> Result<ApproxInverseReport> {
        let mut per_probe = Vec::with_capacity(probes.len());
        let mut kappa: f64 = 0.0;
        for &(z, delta) in probes {
            let mu_of_lambda = self.size_mu(z, self.size_lambda(z, delta))?;
            let lambda_of_mu = self.size_lambda(z, self.size_mu(z, delta)?);
            let r = [
                mu_of_lambda / delta,
                delta / mu_of_lambda,
                lambda_of_mu / delta,
                delta / lambda_of_mu,
            ]
            .into_iter()
            .fold(0.0f64, f64::max);
            if !r.is_finite() {
                return Err(HeatlabError::InvalidPolynomial(format!(
                    "approx-inverse ratio diverged at z = {z}, delta = {delta}"
                )));
            }
            kappa = kappa.max(r);
            per_probe.push((z, delta, r));
        }
        Ok(ApproxInverseReport { kappa, per_probe })
    }

    /// Fit the smallest constant in the μ-comparison
    /// `μ(z)/μ(w) + μ(w)/μ(z) <= C (|z-w|/μ_p(w,1/τ))^deg p`
    /// over pairs with `|z-w| > μ_p(w, 1/τ)`; pairs violating the
    /// precondition are skipped and flagged.
    pub fn mu_ratio_check(&self, tau: f64, pairs: &[(Complex64, Complex64)]) -> Result<MuRatioReport> {
        assert!(tau > 0.0);
        let delta = 1.0 / tau;
        let mut used = Vec::new();
        let mut skipped = Vec::new();
        let mut fitted_c: f64 = 0.0;
        for &(z, w) in pairs {
            let mu_w = self.size_mu(w, delta)?;
            let sep = (z - w).norm();
            if sep <= mu_w {
                skipped.push((z, w));
                continue;
            }
            let mu_z = self.size_mu(z, delta)?;
            let lhs = mu_z / mu_w + mu_w / mu_z;
            let rhs_factor = (sep / mu_w).powi(self.degree as i32);
            fitted_c = fitted_c.max(lhs / rhs_factor);
            used.push((z, w, lhs, rhs_factor));
        }
        if used.is_empty() {
            return Err(HeatlabError::Verify(
                "mu_ratio_check: no pair satisfies |z-w| > μ_p(w, 1/τ)".into(),
            ));
        }
        let margins: Vec<f64> = used
            .iter()
            .map(|&(_, _, lhs, rf)| fitted_c * rf - lhs)
            .collect();
        Ok(MuRatioReport {
            fitted_c,
            margins,
            used: used.len(),
            skipped,
        })
    }
}

/// Wirtinger coefficients `A_jk(z)` of `p` centered at `z`.
#[derive(Debug, Clone)]
pub struct CoeffTable {
    pub center: Complex64,
    pub entries: BTreeMap<(u32, u32), Complex64>,
}

impl CoeffTable {
    pub fn get(&self, j: u32, k: u32) -> Complex64 {
        self.entries.get(&(j, k)).copied().unwrap_or(ZERO)
    }

    /// `Σ A_jk(z) (w-z)^j conj(w-z)^k`; equals `p(w)` by Taylor's identity.
    pub fn taylor_eval(&self, w: Complex64) -> Complex64 {
        let d = w - self.center;
        let db = d.conj();
        let mut acc = ZERO;
        for (&(j, k), &c) in &self.entries {
            acc += c * d.powu(j) * db.powu(k);
        }
        acc
    }

    /// Max conjugate-symmetry defect `|A_jk - conj(A_kj)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (&(j, k), &v) in &self.entries {
            let mirror = self.get(k, j);
            worst = worst.max((v - mirror.conj()).norm());
        }
        worst
    }
}

/// One evaluation of the size functions at `(z, δ)`.
#[derive(Debug, Clone, Copy)]
pub struct GeometryProbe {
    pub z: Complex64,
    pub delta: f64,
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct ApproxInverseReport {
    /// Worst two-sided ratio over the probes.
    pub kappa: f64,
    pub per_probe: Vec<(Complex64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct MuRatioReport {
    pub fitted_c: f64,
    /// `C * rhs - lhs >= 0` per used pair; zero at the fit's argmax.
    pub margins: Vec<f64>,
    pub used: usize,
    pub skipped: Vec<(Complex64, Complex64)>,
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
