use pseudoplap::solver::{solve_dirichlet, EnergyProblem, SolveConfig};
use pseudoplap::{Grid, ScalarField, Shape};

/// Solves `(|w'| w')' = 2` on (-1, 1) with `w(+-1) = 0`.
fn w(x: f64) -> f64 {
    2.0 * 2f64.sqrt() / 3.0 * (x.abs().powf(1.5) - 1.0)
}

fn separable_error(n: usize) -> f64 {
    let grid = Grid::build(2, n, Shape::Cube).unwrap();
    let f = ScalarField::constant(&grid, 2.0).unwrap();
    let prob = EnergyProblem::new(f, 3.0, |x| w(x[0]) + w(x[1])).unwrap();
    let (u, report) = solve_dirichlet(&prob, &SolveConfig::default()).unwrap();
    assert!(report.converged, "n={n}: {report:?}");
    eprintln!("n={n}: {} iterations, {:.2}s", report.iterations, report.wall_time);
    let exact = ScalarField::from_fn(&grid, |x| w(x[0]) + w(x[1])).unwrap();
    u.max_abs_diff(&exact).unwrap()
}

#[test]
fn one_dimensional_profile_within_five_h() {
    let grid = Grid::build(1, 257, Shape::Ball).unwrap();
    let prob = EnergyProblem::new(ScalarField::constant(&grid, 1.0).unwrap(), 3.0, |_| 0.0)
        .unwrap();
    let (u, report) = solve_dirichlet(&prob, &SolveConfig::default()).unwrap();
    assert!(report.converged);
    let exact = ScalarField::from_fn(&grid, |x| w(x[0])).unwrap();
    assert!(u.max_abs_diff(&exact).unwrap() <= 5.0 * grid.h());
}

#[test]
fn separable_solution_converges_under_refinement() {
    let coarse = separable_error(33);
    let fine = separable_error(65);
    assert!(coarse / fine >= 1.4, "errors {coarse} {fine}");
}
