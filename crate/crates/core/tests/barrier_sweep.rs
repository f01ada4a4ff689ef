use pseudoplap::barrier::{min_barrier_m, verify_supersolution, BarrierParams};
use pseudoplap::{Grid, Shape};

#[test]
fn minimal_barrier_is_a_discrete_supersolution() {
    for dim in 1..=3 {
        let grid = Grid::build(dim, 129, Shape::Ball).unwrap();
        for p in [2.5, 3.0, 4.0, 5.0, 6.0] {
            let m = min_barrier_m(p, dim, 1.0).unwrap();
            let params = BarrierParams::new(m, 0.0, p, dim).unwrap();
            let report = verify_supersolution(&grid, &params, 1.0, 3.0 * grid.h()).unwrap();
            eprintln!("N={dim} p={p}: {:.3e} (tol {:.3e})", report.max_violation, report.tolerance);
            assert!(report.within_tolerance(), "N={dim} p={p}: {report:?}");
        }
    }
}
