//! Derivative words on kernel slices.
//!
//! A word in the z-slot is a composition of assembled sparse operators
//! applied to the slice. A word in the w-slot moves onto the source: for the
//! kernel matrix `K = exp(-s A)/h²`, applying `B` in the second slot is
//! `K Bᵀ`, so the derived column at `w` is the semigroup applied to
//! `Bᵀ δ_w / h²` — exact in the discrete model, no conjugate-symmetry detour.
//! s-derivatives of order n are `(-A)^n` applied to the slice, never finite
//! differences in s.

use num_complex::Complex64;

use crate::discretize::{assemble_box, assemble_first_order, OperatorKind};
use crate::error::{HeatlabError, Result};
use crate::grid::{Grid, GridFunction};
use crate::polygeom::SubharmonicPolynomial;
use crate::semigroup::heat::{collar_violation, HeatEngine, KernelKind, KernelSlice};
use crate::sparse::SparseOperator;

/// All assembled operators for one `(p, τ, grid)` triple.
pub struct OperatorSet {
    pub grid: Grid,
    pub tau: f64,
    pub zbar: SparseOperator,
    pub z: SparseOperator,
    pub wbar: SparseOperator,
    pub w: SparseOperator,
    pub x1: SparseOperator,
    pub x2: SparseOperator,
    pub u1: SparseOperator,
    pub u2: SparseOperator,
    pub box_op: SparseOperator,
    pub boxt_op: SparseOperator,
}

impl OperatorSet {
    pub fn assemble(p: &SubharmonicPolynomial, tau: f64, grid: Grid) -> Result<Self> {
        Ok(OperatorSet {
            grid,
            tau,
            zbar: assemble_first_order(OperatorKind::ZBar, p, tau, grid)?,
            z: assemble_first_order(OperatorKind::Z, p, tau, grid)?,
            wbar: assemble_first_order(OperatorKind::WBar, p, tau, grid)?,
            w: assemble_first_order(OperatorKind::W, p, tau, grid)?,
            x1: assemble_first_order(OperatorKind::X1, p, tau, grid)?,
            x2: assemble_first_order(OperatorKind::X2, p, tau, grid)?,
            u1: assemble_first_order(OperatorKind::U1, p, tau, grid)?,
            u2: assemble_first_order(OperatorKind::U2, p, tau, grid)?,
            box_op: assemble_box(p, tau, grid, false)?,
            boxt_op: assemble_box(p, tau, grid, true)?,
        })
    }

    pub fn get(&self, kind: OperatorKind) -> &SparseOperator {
        match kind {
            OperatorKind::ZBar => &self.zbar,
            OperatorKind::Z => &self.z,
            OperatorKind::WBar => &self.wbar,
            OperatorKind::W => &self.w,
            OperatorKind::X1 => &self.x1,
            OperatorKind::X2 => &self.x2,
            OperatorKind::U1 => &self.u1,
            OperatorKind::U2 => &self.u2,
            OperatorKind::Box => &self.box_op,
            OperatorKind::BoxTilde => &self.boxt_op,
        }
    }
}

/// A derivative word: operators in the z-slot, operators in the w-slot, and
/// an s-derivative order. Words are stored in application order (entry 0
/// acts first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivativeSpec {
    pub z_word: Vec<OperatorKind>,
    pub w_word: Vec<OperatorKind>,
    pub s_order: usize,
}

impl DerivativeSpec {
    pub fn plain() -> Self {
        DerivativeSpec {
            z_word: Vec::new(),
            w_word: Vec::new(),
            s_order: 0,
        }
    }

    pub fn new(z_word: Vec<OperatorKind>, w_word: Vec<OperatorKind>, s_order: usize) -> Result<Self> {
        for k in &z_word {
            if !matches!(
                k,
                OperatorKind::Z | OperatorKind::ZBar | OperatorKind::X1 | OperatorKind::X2
            ) {
                return Err(HeatlabError::Verify(format!(
                    "{k:?} is not a z-slot operator"
                )));
            }
        }
        for k in &w_word {
            if !matches!(
                k,
                OperatorKind::W | OperatorKind::WBar | OperatorKind::U1 | OperatorKind::U2
            ) {
                return Err(HeatlabError::Verify(format!(
                    "{k:?} is not a w-slot operator"
                )));
            }
        }
        Ok(DerivativeSpec {
            z_word,
            w_word,
            s_order,
        })
    }

    /// Total order |α| (s-derivatives not counted).
    pub fn alpha(&self) -> usize {
        self.z_word.len() + self.w_word.len()
    }

    /// Whether the word annihilates the Szego kernel: an s-derivative, a
    /// leading (first-applied) `Zbar` in z, or a leading `W` in w.
    pub fn annihilates_szego(&self) -> bool {
        self.s_order >= 1
            || self.z_word.first() == Some(&OperatorKind::ZBar)
            || self.w_word.first() == Some(&OperatorKind::W)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.s_order > 0 {
            parts.push(format!("ds^{}", self.s_order));
        }
        for k in self.z_word.iter().rev() {
            parts.push(format!("{}_z", k.label()));
        }
        for k in self.w_word.iter().rev() {
            parts.push(format!("{}_w", k.label()));
        }
        if parts.is_empty() {
            "id".into()
        } else {
            parts.join(" ")
        }
    }
}

/// Apply a z-slot word to a slice (entry 0 first).
pub fn apply_z_word(ops: &OperatorSet, word: &[OperatorKind], f: &GridFunction) -> GridFunction {
    let mut v = f.values().to_vec();
    for kind in word {
        v = ops.get(*kind).apply_vec(&v);
    }
    GridFunction::new(ops.grid, v)
}

/// Build the source vector `(w-word)ᵀ δ_w / h²`.
pub fn word_source(ops: &OperatorSet, w_word: &[OperatorKind], w: usize) -> GridFunction {
    let mut v = GridFunction::delta(ops.grid, w).into_values();
    for kind in w_word {
        v = ops.get(*kind).transpose().apply_vec(&v);
    }
    GridFunction::new(ops.grid, v)
}

/// Derived heat-kernel column
/// `(z-word) (-A)^n exp(-s A) (w-word)ᵀ [pre] δ_w / h²`,
/// where `pre` is an optional source-side projection (e.g. `I - S` for the
/// relative kernel).
#[allow(clippy::too_many_arguments)]
pub fn derivative_heat_column(
    engine: &HeatEngine,
    ops: &OperatorSet,
    base: KernelKind,
    spec: &DerivativeSpec,
    s: f64,
    w: usize,
    mu_w: f64,
    pre: Option<&dyn Fn(&[Complex64]) -> Vec<Complex64>>,
) -> Result<KernelSlice> {
    let mut source = word_source(ops, &spec.w_word, w);
    if let Some(projector) = pre {
        source = GridFunction::new(ops.grid, projector(source.values()));
    }
    let heated = engine.apply(s, &source)?;
    let mut v = heated.into_values();
    for _ in 0..spec.s_order {
        v = engine.op().apply_vec(&v);
        for x in &mut v {
            *x = -*x;
        }
    }
    for kind in &spec.z_word {
        v = ops.get(*kind).apply_vec(&v);
    }
    Ok(KernelSlice {
        kind: base,
        parameter: Some(s),
        source: w,
        values: GridFunction::new(ops.grid, v),
        collar_warning: collar_violation(ops.grid, w, s, mu_w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn setup() -> (OperatorSet, SubharmonicPolynomial, Grid) {
        let grid = Grid::new(4.0, 28).unwrap();
        let p = SubharmonicPolynomial::abs_z_squared();
        let ops = OperatorSet::assemble(&p, 1.0, grid).unwrap();
        (ops, p, grid)
    }

    #[test]
    fn spec_validates_slot_membership() {
        assert!(DerivativeSpec::new(vec![OperatorKind::W], vec![], 0).is_err());
        assert!(DerivativeSpec::new(vec![], vec![OperatorKind::Z], 0).is_err());
        let ok = DerivativeSpec::new(
            vec![OperatorKind::ZBar, OperatorKind::Z],
            vec![OperatorKind::W],
            1,
        )
        .unwrap();
        assert_eq!(ok.alpha(), 3);
        assert!(ok.annihilates_szego());
    }

    #[test]
    fn annihilation_rule() {
        let s_only = DerivativeSpec::new(vec![], vec![], 2).unwrap();
        assert!(s_only.annihilates_szego());
        let zbar_first = DerivativeSpec::new(vec![OperatorKind::ZBar], vec![], 0).unwrap();
        assert!(zbar_first.annihilates_szego());
        let w_first = DerivativeSpec::new(vec![], vec![OperatorKind::W], 0).unwrap();
        assert!(w_first.annihilates_szego());
        let plain = DerivativeSpec::plain();
        assert!(!plain.annihilates_szego());
        let z_first = DerivativeSpec::new(vec![OperatorKind::Z], vec![], 0).unwrap();
        assert!(!z_first.annihilates_szego());
    }

    #[test]
    fn s_derivative_equals_minus_box_applied() {
        // ∂/∂s of a heat column equals -A (heat column), by construction
        let (ops, _p, grid) = setup();
        let engine = HeatEngine::new(&ops.boxt_op, grid, 1e-10);
        let w = grid.index(14, 14);
        let spec = DerivativeSpec::new(vec![], vec![], 1).unwrap();
        let derived =
            derivative_heat_column(&engine, &ops, KernelKind::HeatTilde, &spec, 0.5, w, 1.0, None)
                .unwrap();
        let plain = derivative_heat_column(
            &engine,
            &ops,
            KernelKind::HeatTilde,
            &DerivativeSpec::plain(),
            0.5,
            w,
            1.0,
            None,
        )
        .unwrap();
        let mut check = ops.boxt_op.apply_vec(plain.values.values());
        for x in &mut check {
            *x = -*x;
        }
        let err: f64 = derived
            .values
            .values()
            .iter()
            .zip(&check)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn w_word_transpose_matches_dense_kernel_derivative() {
        // compare K Bᵀ columns against applying B to rows of the dense kernel
        let grid = Grid::new(3.0, 12).unwrap();
        let p = SubharmonicPolynomial::abs_z_squared();
        let ops = OperatorSet::assemble(&p, 1.0, grid).unwrap();
        let engine = HeatEngine::new(&ops.boxt_op, grid, 1e-11);
        let s = 0.3;
        let n = grid.len();
        // dense kernel matrix: columns are heat applied to deltas
        let mut kernel = nalgebra::DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for w in 0..n {
            let col = engine
                .apply(s, &GridFunction::delta(grid, w))
                .unwrap()
                .into_values();
            for z in 0..n {
                kernel[(z, w)] = col[z];
            }
        }
        let w_node = grid.index(6, 6);
        let spec = DerivativeSpec::new(vec![], vec![OperatorKind::WBar], 0).unwrap();
        let derived =
            derivative_heat_column(&engine, &ops, KernelKind::HeatTilde, &spec, s, w_node, 1.0, None)
                .unwrap();
        // reference: apply WBar to the function w ↦ K(z, w) for each fixed z
        let wbar_dense = ops.wbar.to_dense();
        let reference = &kernel * wbar_dense.transpose();
        let mut worst = 0.0f64;
        for z in 0..n {
            worst = worst.max((reference[(z, w_node)] - derived.values.values()[z]).norm());
        }
        assert!(worst < 1e-7, "worst {worst}");
    }
}
