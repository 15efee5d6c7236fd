use heatlab::discretize::{assemble_box, assemble_first_order, OperatorKind};
use heatlab::grid::Grid;
use heatlab::polygeom::SubharmonicPolynomial;

fn main() {
    let p = SubharmonicPolynomial::abs_z_squared();
    let grid = Grid::new(3.0, 12).unwrap();
    let bx = assemble_box(&p, 1.0, grid, false).unwrap();
    let bt = assemble_box(&p, 1.0, grid, true).unwrap();
    println!("max_diff(box, boxt) = {:.6e}", bx.max_diff(&bt));
    let zbar = assemble_first_order(OperatorKind::ZBar, &p, 1.0, grid).unwrap();
    let adj = zbar.adjoint();
    let prod1 = zbar.matmul(&adj);
    let prod2 = adj.matmul(&zbar);
    println!("direct products differ by {:.6e}", prod1.max_diff(&prod2));
    // commutator should look like tau*(Mx1+Mx2): diagonal-free, entries ~0.5 at +-1 cells
    let comm = prod1.add_scaled(&prod2, num_complex::Complex64::new(-1.0, 0.0));
    let trips = comm.triplets();
    println!("commutator nnz = {}, max = {:.3}", trips.len(), comm.max_norm());
    for (r, c, v) in trips.iter().take(8) {
        println!("  ({r},{c}) -> {v}");
    }
}
