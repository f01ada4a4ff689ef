//! Radial barrier `h(x) = b + M (1 - 1/(1 + d(x)))`, `d(x) = 1 - |x|`, the
//! resulting sup-norm bound, and a discrete comparison check.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, Shape};
use crate::operator::{self, check_exponent};
use crate::solver::EnergyProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub m: f64,
    pub boundary_sup: f64,
    pub p: f64,
    pub dim: usize,
}

impl BarrierParams {
    pub fn new(m: f64, boundary_sup: f64, p: f64, dim: usize) -> Result<Self> {
        check_exponent(p)?;
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::param(format!("barrier height M must be positive, got {m}")));
        }
        if !(boundary_sup >= 0.0 && boundary_sup.is_finite()) {
            return Err(Error::param(format!("boundary sup must be >= 0, got {boundary_sup}")));
        }
        if dim == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        Ok(Self { m, boundary_sup, p, dim })
    }

    /// `M^{p-1} 2^{-2p} N^{1-p/2}`, the sup of `f` the barrier dominates.
    pub fn dominated_rhs(&self) -> f64 {
        self.m.powf(self.p - 1.0)
            * 2f64.powf(-2.0 * self.p)
            * (self.dim as f64).powf(1.0 - self.p / 2.0)
    }

    /// Value of the barrier at distance `r` from the origin.
    pub fn value_at_radius(&self, r: f64) -> f64 {
        let d = 1.0 - r;
        self.boundary_sup + self.m * (1.0 - 1.0 / (1.0 + d))
    }
}

/// Smallest admissible barrier height, inflated by `1e-6` relative so that
/// `M^{p-1} 2^{-2p} N^{1-p/2} > f_sup` holds strictly.
pub fn min_barrier_m(p: f64, dim: usize, f_sup: f64) -> Result<f64> {
    check_exponent(p)?;
    if dim == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    if !(f_sup >= 0.0 && f_sup.is_finite()) {
        return Err(Error::param(format!("f_sup must be finite and >= 0, got {f_sup}")));
    }
    let n = dim as f64;
    Ok((f_sup * 2f64.powf(2.0 * p) * n.powf(p / 2.0 - 1.0)).powf(1.0 / (p - 1.0)) * (1.0 + 1e-6))
}

fn require_ball(grid: &Grid) -> Result<()> {
    if grid.shape() != Shape::Ball {
        return Err(Error::pre("the barrier is defined on the ball only"));
    }
    Ok(())
}

pub fn barrier_field(grid: &Arc<Grid>, params: &BarrierParams) -> Result<ScalarField> {
    require_ball(grid)?;
    if params.dim != grid.dim() {
        return Err(Error::param(format!(
            "barrier dimension {} differs from grid dimension {}",
            params.dim,
            grid.dim()
        )));
    }
    ScalarField::from_fn(grid, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        params.value_at_radius(r.min(1.0))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupersolutionReport {
    /// `max [nondiv_p h + (p-1) f_sup]` over checked nodes.
    pub max_violation: f64,
    /// `10 h^{1/2} (p-1) M^{p-1} 2^{-2p} N^{1-p/2}`.
    pub tolerance: f64,
    pub worst_coords: Vec<f64>,
    pub checked_nodes: usize,
}

impl SupersolutionReport {
    pub fn within_tolerance(&self) -> bool {
        self.max_violation <= self.tolerance
    }
}

/// Evaluates the non-divergence operator on the barrier at interior nodes
/// with `|x| >= exclusion_radius`.
pub fn verify_supersolution(
    grid: &Arc<Grid>,
    params: &BarrierParams,
    f_sup: f64,
    exclusion_radius: f64,
) -> Result<SupersolutionReport> {
    let h = grid.h();
    if !(exclusion_radius >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::param(format!(
            "exclusion radius {exclusion_radius} must be at least 2h = {}",
            2.0 * h
        )));
    }
    if !(f_sup >= 0.0 && f_sup.is_finite()) {
        return Err(Error::param(format!("f_sup must be finite and >= 0, got {f_sup}")));
    }
    let field = barrier_field(grid, params)?;
    let image = operator::apply_nondivergence(&field, params.p)?;
    let cutoff = exclusion_radius * (1.0 - 1e-12);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_node = None;
    let mut checked = 0;
    for &node in grid.interior_nodes() {
        if grid.norm(node) < cutoff {
            continue;
        }
        checked += 1;
        let v = image.get(node).unwrap() + (params.p - 1.0) * f_sup;
        if v > worst {
            worst = v;
            worst_node = Some(node);
        }
    }
    let node = worst_node.ok_or_else(|| {
        Error::pre(format!("no interior node lies outside radius {exclusion_radius}"))
    })?;
    Ok(SupersolutionReport {
        max_violation: worst,
        tolerance: 10.0 * h.sqrt() * (params.p - 1.0) * params.dominated_rhs(),
        worst_coords: grid.coords(node),
        checked_nodes: checked,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfBound {
    /// `sup |g| + min_barrier_m(p, N, sup |f|) / 2`.
    pub bound: f64,
    pub u_sup: f64,
    pub satisfied: bool,
}

/// Compares `sup |u|` with the barrier bound; `tol` absorbs the solver tolerance.
pub fn linf_bound_check(u: &ScalarField, prob: &EnergyProblem, tol: f64) -> Result<LinfBound> {
    if **u.grid() != **prob.grid() {
        return Err(Error::GridMismatch);
    }
    let bound = prob.boundary_sup() + min_barrier_m(prob.p(), prob.grid().dim(), prob.f_sup())? / 2.0;
    let u_sup = u.sup_norm();
    Ok(LinfBound {
        bound,
        u_sup,
        satisfied: u_sup <= bound + tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonOutcome {
    pub premise_holds: bool,
    pub conclusion_holds: bool,
    /// `max (u - v)` over interior nodes.
    pub max_excess: f64,
    /// Slack allowed in the conclusion: `tol * N (n - 1)`.
    pub conclusion_tol: f64,
}

impl ComparisonOutcome {
    pub fn is_counterexample(&self) -> bool {
        self.premise_holds && !self.conclusion_holds
    }
}

/// Premise: `div_p u >= div_p v - tol` inside and `u <= v + tol` on the boundary.
/// Conclusion: `u <= v + tol * N (n - 1)` inside.
pub fn comparison_check(u: &ScalarField, v: &ScalarField, p: f64, tol: f64) -> Result<ComparisonOutcome> {
    if **u.grid() != **v.grid() {
        return Err(Error::GridMismatch);
    }
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::param(format!("tolerance must be finite and >= 0, got {tol}")));
    }
    let grid = u.grid();
    let lu = operator::apply_divergence(u, p)?;
    let lv = operator::apply_divergence(v, p)?;
    let interior_ordered = grid
        .interior_nodes()
        .iter()
        .all(|&i| lu.get(i).unwrap() >= lv.get(i).unwrap() - tol);
    let mut boundary_ordered = true;
    for node in grid.boundary_nodes() {
        let (a, b) = match (u.get(node), v.get(node)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::pre(format!(
                    "boundary value unset at {:?}",
                    grid.coords(node)
                )))
            }
        };
        boundary_ordered &= a <= b + tol;
    }
    let conclusion_tol = tol * (grid.dim() * (grid.nodes_per_axis() - 1)) as f64;
    let max_excess = grid
        .interior_nodes()
        .iter()
        .map(|&i| u.get(i).unwrap() - v.get(i).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonOutcome {
        premise_holds: interior_ordered && boundary_ordered,
        conclusion_holds: max_excess <= conclusion_tol,
        max_excess,
        conclusion_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_dirichlet, SolveConfig};

    #[test]
    fn minimal_heights() {
        assert_eq!(min_barrier_m(3.0, 2, 0.0).unwrap(), 0.0);
        let m = min_barrier_m(3.0, 2, 1.0).unwrap();
        assert!((m - 9.513657).abs() < 1e-5, "{m}");
        let m = min_barrier_m(4.0, 1, 1.0).unwrap();
        assert!((m - 6.349610).abs() < 1e-5, "{m}");
        for (p, n, f) in [(2.5, 1, 0.3), (3.0, 3, 2.0), (6.0, 2, 1e-3)] {
            let m = min_barrier_m(p, n, f).unwrap();
            let params = BarrierParams::new(m, 0.0, p, n).unwrap();
            assert!(params.dominated_rhs() > f);
        }
        assert!(min_barrier_m(2.0, 1, 1.0).is_err());
        assert!(min_barrier_m(3.0, 1, -1.0).is_err());
    }

    #[test]
    fn barrier_shape() {
        let grid = Grid::build(2, 33, Shape::Ball).unwrap();
        let params = BarrierParams::new(4.0, 0.5, 3.0, 2).unwrap();
        let field = barrier_field(&grid, &params).unwrap();
        let origin = grid.locate(&[0.0, 0.0]).unwrap();
        assert_eq!(field.get(origin), Some(0.5 + 2.0));
        let east = grid.locate(&[1.0, 0.0]).unwrap();
        assert_eq!(field.get(east), Some(0.5));
        let mut prev = f64::INFINITY;
        for i in 16..33 {
            let v = field.get(grid.flatten(&[i, i.min(16)])).unwrap_or(prev);
            assert!(v <= prev);
            prev = v;
        }
        let cube = Grid::build(2, 9, Shape::Cube).unwrap();
        assert!(barrier_field(&cube, &params).is_err());
    }

    #[test]
    fn supersolution_at_minimal_height() {
        let grid = Grid::build(2, 129, Shape::Ball).unwrap();
        let m = min_barrier_m(3.0, 2, 1.0).unwrap();
        let params = BarrierParams::new(m, 0.0, 3.0, 2).unwrap();
        let report = verify_supersolution(&grid, &params, 1.0, 3.0 * grid.h()).unwrap();
        assert!(report.within_tolerance(), "{report:?}");

        // the barrier dominates about 5.7 times the required rhs here, so
        // M / 2 still passes while M / 3 (factor 9 in M^{p-1}) fails
        let halved = BarrierParams { m: m / 2.0, ..params };
        let report = verify_supersolution(&grid, &halved, 1.0, 3.0 * grid.h()).unwrap();
        assert!(report.max_violation < 0.0, "{report:?}");
        let third = BarrierParams { m: m / 3.0, ..params };
        let report = verify_supersolution(&grid, &third, 1.0, 3.0 * grid.h()).unwrap();
        assert!(report.max_violation > 0.0, "{report:?}");

        let unit = BarrierParams::new(1.0, 0.0, 3.0, 2).unwrap();
        let report = verify_supersolution(&grid, &unit, 0.0, 3.0 * grid.h()).unwrap();
        assert!(report.within_tolerance(), "{report:?}");
        assert!(verify_supersolution(&grid, &unit, 0.0, grid.h()).is_err());
    }

    #[test]
    fn halving_breaks_the_one_dimensional_quartic_barrier() {
        let grid = Grid::build(1, 129, Shape::Ball).unwrap();
        let m = min_barrier_m(4.0, 1, 1.0).unwrap();
        let ok = BarrierParams::new(m, 0.0, 4.0, 1).unwrap();
        assert!(verify_supersolution(&grid, &ok, 1.0, 3.0 * grid.h()).unwrap().within_tolerance());
        let halved = BarrierParams { m: m / 2.0, ..ok };
        let report = verify_supersolution(&grid, &halved, 1.0, 3.0 * grid.h()).unwrap();
        assert!(report.max_violation > 0.0, "{report:?}");
    }

    #[test]
    fn linf_bound_on_closed_form() {
        let grid = Grid::build(1, 129, Shape::Ball).unwrap();
        let zero = ScalarField::constant(&grid, 0.0).unwrap();
        let prob = EnergyProblem::new(zero.clone(), 3.0, |_| 0.0).unwrap();
        let check = linf_bound_check(&zero, &prob, 0.0).unwrap();
        assert_eq!(check.bound, 0.0);
        assert!(check.satisfied);

        let prob = EnergyProblem::new(ScalarField::constant(&grid, 1.0).unwrap(), 3.0, |_| 0.0)
            .unwrap();
        let (u, _) = solve_dirichlet(&prob, &SolveConfig::default()).unwrap();
        let check = linf_bound_check(&u, &prob, 1e-6).unwrap();
        assert!((check.bound - 4.0).abs() < 1e-5);
        assert!((check.u_sup - 2.0 * 2f64.sqrt() / 3.0).abs() < 0.05);
        assert!(check.satisfied);

        let lambda: f64 = 3.0;
        let scaled = prob.scaled(lambda);
        let (v, _) = solve_dirichlet(&scaled, &SolveConfig::default()).unwrap();
        let check2 = linf_bound_check(&v, &scaled, 1e-6).unwrap();
        assert!(check2.satisfied);
        assert!((check2.bound / check.bound - lambda).abs() < 1e-6);
    }

    #[test]
    fn comparison_of_two_solves() {
        let grid = Grid::build(2, 33, Shape::Ball).unwrap();
        let cfg = SolveConfig::default();
        let one = EnergyProblem::new(ScalarField::constant(&grid, 1.0).unwrap(), 3.0, |_| 0.0)
            .unwrap();
        let zero = EnergyProblem::new(ScalarField::constant(&grid, 0.0).unwrap(), 3.0, |_| 0.0)
            .unwrap();
        let (u, _) = solve_dirichlet(&one, &cfg).unwrap();
        let (v, _) = solve_dirichlet(&zero, &cfg).unwrap();
        let out = comparison_check(&u, &v, 3.0, 2.0 * cfg.grad_tol).unwrap();
        assert!(out.premise_holds && out.conclusion_holds, "{out:?}");

        let same = comparison_check(&u, &u, 3.0, 0.0).unwrap();
        assert!(same.premise_holds && same.conclusion_holds);

        let lifted = u.map(|x| x + 1.0);
        let out = comparison_check(&lifted, &u, 3.0, 1e-8).unwrap();
        assert!(!out.premise_holds);
        assert!(!out.is_counterexample());
    }
}
