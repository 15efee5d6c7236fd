// Scratch probe: dense spectra of box/boxt on small grids to examine the
// near-null structure that the Szego construction rests on.

use heatlab::discretize::{assemble_box, assemble_first_order, OperatorKind};
use heatlab::grid::Grid;
use heatlab::polygeom::SubharmonicPolynomial;
use nalgebra::SymmetricEigen;

fn main() {
    let p = SubharmonicPolynomial::abs_z_squared();
    for (l, n) in [(4.5f64, 32usize), (6.0, 40), (6.0, 48)] {
        let grid = Grid::new(l, n).unwrap();
        let tau = 1.0;
        println!("=== L = {l}, n = {n}, h = {:.4}, tau = {tau}", grid.h());
        let t0 = std::time::Instant::now();
        let boxt = assemble_box(&p, tau, grid, true).unwrap();
        let bx = assemble_box(&p, tau, grid, false).unwrap();
        let eig_t = SymmetricEigen::new(boxt.to_dense());
        let eig_b = SymmetricEigen::new(bx.to_dense());
        println!("dense eigen took {:.1?}", t0.elapsed());
        let mut ev_t: Vec<f64> = eig_t.eigenvalues.iter().cloned().collect();
        let mut ev_b: Vec<f64> = eig_b.eigenvalues.iter().cloned().collect();
        ev_t.sort_by(f64::total_cmp);
        ev_b.sort_by(f64::total_cmp);
        println!("boxt lowest 12: {:?}", &ev_t[..12.min(ev_t.len())]);
        println!("box  lowest 12: {:?}", &ev_b[..12.min(ev_b.len())]);
        // count per window
        let count = |ev: &[f64], lo: f64, hi: f64| ev.iter().filter(|&&x| x >= lo && x < hi).count();
        for (name, ev) in [("boxt", &ev_t), ("box", &ev_b)] {
            println!(
                "{name}: <1e-10:{} <1e-6:{} <1e-3:{} <0.1:{} [0.1,1.9):{} [1.9,2.1):{} [2.1,3.9):{} [3.9,4.1):{}",
                count(ev, -1.0, 1e-10),
                count(ev, -1.0, 1e-6),
                count(ev, -1.0, 1e-3),
                count(ev, -1.0, 0.1),
                count(ev, 0.1, 1.9),
                count(ev, 1.9, 2.1),
                count(ev, 2.1, 3.9),
                count(ev, 3.9, 4.1),
            );
        }
        // nonzero spectra pairwise match
        let nz_t: Vec<f64> = ev_t.iter().cloned().filter(|&x| x > 1e-6).collect();
        let nz_b: Vec<f64> = ev_b.iter().cloned().filter(|&x| x > 1e-6).collect();
        let m = nz_t.len().min(nz_b.len());
        let mut worst = 0.0f64;
        for i in 0..m {
            worst = worst.max((nz_t[i] - nz_b[i]).abs() / nz_b[i]);
        }
        println!(
            "nonzero counts boxt {} box {}; worst pairwise rel dev (sorted) {:.3e}",
            nz_t.len(),
            nz_b.len(),
            worst
        );

        // how well do weighted monomials fit in the null space?
        let zbar = assemble_first_order(OperatorKind::ZBar, &p, tau, grid).unwrap();
        for k in [0usize, 4, 8, 12] {
            let f: Vec<num_complex::Complex64> = (0..grid.len())
                .map(|i| {
                    let z = grid.coord_of(i);
                    z.powu(k as u32) * (-tau * z.norm_sqr()).exp()
                })
                .collect();
            let nrm: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let zf = zbar.apply_vec(&f);
            let rnrm: f64 = zf.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            println!("  sampled monomial k={k}: |Zbar f| / |f| = {:.3e}", rnrm / nrm);
        }
    }
}
