//! Discrete pseudo-p-Laplacian `sum_i d_i(|d_i u|^{p-2} d_i u)`.
//!
//! Two discretizations are provided. The divergence form uses two-point
//! fluxes `phi_p(D+ u) - phi_p(D- u)` and is the exact gradient of the
//! discrete energy in [`crate::solver`]. The non-divergence form evaluates
//! `(p-1) sum_i |Dc_i u|^{p-2} D2_i u` with central differences.

use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Form {
    Divergence,
    NonDivergence,
}

impl std::str::FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "divergence" => Ok(Form::Divergence),
            "nondivergence" | "non-divergence" => Ok(Form::NonDivergence),
            other => Err(Error::param(format!("unknown operator form '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParams {
    p: f64,
    form: Form,
}

impl OperatorParams {
    pub fn new(p: f64, form: Form) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self { p, form })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        apply(u, self.p, self.form)
    }
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 2.0 {
        Ok(())
    } else {
        Err(Error::param(format!("exponent p must satisfy p > 2, got {p}")))
    }
}

/// `a -> a^e` for `a >= 0`, using `powi` when `e` is a small integer.
#[derive(Debug, Clone, Copy)]
pub struct AbsPow {
    exp: f64,
    int: Option<i32>,
}

impl AbsPow {
    pub fn new(exp: f64) -> Self {
        let int = (exp.fract() == 0.0 && exp.abs() <= 16.0).then_some(exp as i32);
        Self { exp, int }
    }

    #[inline]
    pub fn eval(&self, a: f64) -> f64 {
        match self.int {
            Some(0) => 1.0,
            Some(k) => a.powi(k),
            None => a.powf(self.exp),
        }
    }
}

/// `phi_p(t) = |t|^{p-2} t`.
#[inline]
pub fn phi(t: f64, p: f64) -> f64 {
    t.abs().powf(p - 2.0) * t
}

pub fn apply(u: &ScalarField, p: f64, form: Form) -> Result<ScalarField> {
    match form {
        Form::Divergence => apply_divergence(u, p),
        Form::NonDivergence => apply_nondivergence(u, p),
    }
}

/// Calls `term(u_minus, u_centre, u_plus)` for every axis of every interior
/// node and stores the sum of the returned values at the node.
fn apply_stencil(
    u: &ScalarField,
    mut term: impl FnMut(f64, f64, f64) -> f64,
) -> Result<ScalarField> {
    let grid = u.grid();
    let mut out = ScalarField::unset(grid);
    let read = |node: usize, at: usize| {
        u.get(at).ok_or_else(|| Error::UnsetStencil {
            node,
            coords: grid.coords(node),
            neighbor: at,
        })
    };
    for &node in grid.interior_nodes() {
        let centre = read(node, node)?;
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            let s = grid.stride(axis);
            let minus = read(node, node - s)?;
            let plus = read(node, node + s)?;
            acc += term(minus, centre, plus);
        }
        out.set(node, acc)?;
    }
    Ok(out)
}

/// `sum_i [phi_p(D+_i u) - phi_p(D-_i u)] / h` at interior nodes.
pub fn apply_divergence(u: &ScalarField, p: f64) -> Result<ScalarField> {
    check_exponent(p)?;
    let h = u.grid().h();
    let pw = AbsPow::new(p - 2.0);
    apply_stencil(u, |m, c, pl| {
        let fwd = (pl - c) / h;
        let bwd = (c - m) / h;
        (pw.eval(fwd.abs()) * fwd - pw.eval(bwd.abs()) * bwd) / h
    })
}

/// `(p-1) sum_i |Dc_i u|^{p-2} D2_i u` at interior nodes.
pub fn apply_nondivergence(u: &ScalarField, p: f64) -> Result<ScalarField> {
    check_exponent(p)?;
    let h = u.grid().h();
    let pw = AbsPow::new(p - 2.0);
    let out = apply_stencil(u, |m, c, pl| {
        let central = (pl - m) / (2.0 * h);
        if central == 0.0 {
            return 0.0;
        }
        let second = (pl - 2.0 * c + m) / (h * h);
        pw.eval(central.abs()) * second
    })?;
    Ok(out.scaled(p - 1.0))
}

/// `max |apply_form(u) - (p-1) f|` over interior nodes.
pub fn consistency_residual(u: &ScalarField, f: &ScalarField, p: f64, form: Form) -> Result<f64> {
    if *u.grid() != *f.grid() {
        return Err(Error::GridMismatch);
    }
    let lhs = apply(u, p, form)?;
    let mut worst = 0.0f64;
    for &node in u.grid().interior_nodes() {
        let fv = f.get(node).ok_or_else(|| {
            Error::pre(format!("right-hand side unset at interior node {node}"))
        })?;
        let lv = lhs.get(node).expect("operator sets every interior node");
        worst = worst.max((lv - (p - 1.0) * fv).abs());
    }
    Ok(worst)
}

/// `max |apply(lambda u) - lambda^{p-1} apply(u)|` over interior nodes.
pub fn homogeneity_check(u: &ScalarField, p: f64, lambda: f64, form: Form) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("scale must be positive, got {lambda}")));
    }
    let scaled = apply(&u.scaled(lambda), p, form)?;
    let base = apply(u, p, form)?;
    let factor = lambda.powf(p - 1.0);
    Ok(u.grid()
        .interior_nodes()
        .iter()
        .map(|&i| (scaled.get(i).unwrap() - factor * base.get(i).unwrap()).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Shape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Radial profile solving `(|w'|^{p-2} w')' = c` on (-1, 1) with `w(+-1) = 0`.
    fn profile(x: f64, p: f64, c: f64) -> f64 {
        (p - 1.0) / p * c.powf(1.0 / (p - 1.0)) * (x.abs().powf(p / (p - 1.0)) - 1.0)
    }

    #[test]
    fn rejects_small_exponent() {
        let grid = Grid::build(1, 9, Shape::Ball).unwrap();
        let u = ScalarField::constant(&grid, 1.0).unwrap();
        assert!(apply_divergence(&u, 2.0).is_err());
        assert!(apply_nondivergence(&u, 1.5).is_err());
        assert!(OperatorParams::new(f64::NAN, Form::Divergence).is_err());
    }

    #[test]
    fn constants_and_affine_functions_vanish() {
        for dim in 1..=3 {
            let grid = Grid::build(dim, 11, Shape::Ball).unwrap();
            let c = ScalarField::constant(&grid, 3.7).unwrap();
            let lin = ScalarField::from_fn(&grid, |x| {
                x.iter().enumerate().map(|(k, v)| (k as f64 + 0.5) * v).sum::<f64>() - 1.0
            })
            .unwrap();
            for form in [Form::Divergence, Form::NonDivergence] {
                for p in [2.5, 3.0, 4.7] {
                    assert_eq!(apply(&c, p, form).unwrap().sup_norm(), 0.0);
                    assert!(apply(&lin, p, form).unwrap().sup_norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn unset_neighbour_is_reported() {
        let grid = Grid::build(1, 9, Shape::Ball).unwrap();
        let u = ScalarField::constant(&grid, 1.0).unwrap().interior_only();
        let err = apply_divergence(&u, 3.0).unwrap_err();
        assert!(matches!(err, Error::UnsetStencil { node: 1, neighbor: 0, .. }), "{err}");
    }

    #[test]
    fn divergence_form_on_closed_form_profile() {
        // (|u'| u')' = 2 for u = (2 sqrt2 / 3)(|x|^{3/2} - 1)
        let grid = Grid::build(1, 257, Shape::Ball).unwrap();
        let h = grid.h();
        let u = ScalarField::from_fn(&grid, |x| profile(x[0], 3.0, 2.0)).unwrap();
        let lu = apply_divergence(&u, 3.0).unwrap();
        let mut worst = 0.0f64;
        for &i in grid.interior_nodes() {
            if grid.coords(i)[0].abs() >= 3.0 * h {
                worst = worst.max((lu.get(i).unwrap() - 2.0).abs());
            }
        }
        assert!(worst <= 10.0 * h.sqrt(), "worst {worst}");
    }

    #[test]
    fn nondivergence_on_quadratic_is_exact() {
        let grid = Grid::build(2, 33, Shape::Ball).unwrap();
        let u = ScalarField::from_fn(&grid, |x| x[0] * x[0]).unwrap();
        let lu = apply_nondivergence(&u, 4.0).unwrap();
        for &i in grid.interior_nodes() {
            let x = grid.coords(i)[0];
            let expect = 24.0 * x * x;
            assert!((lu.get(i).unwrap() - expect).abs() <= 1e-10 * (1.0 + expect), "x={x}");
        }
    }

    #[test]
    fn nondivergence_separable_profile() {
        for p in [3.0, 4.0] {
            let grid = Grid::build(2, 129, Shape::Cube).unwrap();
            let h = grid.h();
            let u = ScalarField::from_fn(&grid, |x| {
                x.iter().map(|&t| profile(t, p, p - 1.0)).sum()
            })
            .unwrap();
            let lu = apply_nondivergence(&u, p).unwrap();
            let mut worst = 0.0f64;
            for &i in grid.interior_nodes() {
                let x = grid.coords(i);
                if x.iter().all(|t| t.abs() >= 3.0 * h) {
                    worst = worst.max((lu.get(i).unwrap() - 2.0 * (p - 1.0)).abs());
                }
            }
            assert!(worst <= 10.0 * h.sqrt(), "p={p} worst {worst}");
        }
    }

    #[test]
    fn divergence_is_monotone_in_neighbours() {
        let grid = Grid::build(2, 11, Shape::Ball).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = ScalarField::from_fn(&grid, |_| rng.gen_range(-1.0..1.0)).unwrap();
        let base = apply_divergence(&u, 3.5).unwrap();
        for &node in grid.interior_nodes() {
            for axis in 0..2 {
                for fwd in [true, false] {
                    let nb = grid.neighbour(node, axis, fwd).unwrap();
                    let mut bumped = u.clone();
                    bumped.set(nb, u.get(nb).unwrap() + 0.05).unwrap();
                    let after = apply_divergence(&bumped, 3.5).unwrap();
                    assert!(after.get(node).unwrap() >= base.get(node).unwrap());
                }
            }
        }
    }

    #[test]
    fn homogeneity_identity_and_scaling() {
        let grid = Grid::build(2, 17, Shape::Ball).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = ScalarField::from_fn(&grid, |_| rng.gen_range(-1.0..1.0)).unwrap();
        for form in [Form::Divergence, Form::NonDivergence] {
            assert_eq!(homogeneity_check(&u, 3.0, 1.0, form).unwrap(), 0.0);
            for (p, lambda) in [(3.0, 2.0), (5.0, 0.5)] {
                let err = homogeneity_check(&u, p, lambda, form).unwrap();
                let scale = apply(&u, p, form).unwrap().sup_norm() * lambda.powf(p - 1.0);
                assert!(err <= 1e-10 * scale.max(1.0), "{form:?} p={p}: {err}");
            }
        }
        assert!(homogeneity_check(&u, 3.0, 0.0, Form::Divergence).is_err());
    }

    #[test]
    fn residual_shift_by_constant() {
        let grid = Grid::build(1, 65, Shape::Ball).unwrap();
        let u = ScalarField::from_fn(&grid, |x| profile(x[0], 3.0, 2.0)).unwrap();
        let f = ScalarField::constant(&grid, 1.0).unwrap();
        let r0 = consistency_residual(&u, &f, 3.0, Form::Divergence).unwrap();
        let r1 = consistency_residual(&u, &f.map(|v| v + 1.0), 3.0, Form::Divergence).unwrap();
        assert!(r1 >= 2.0 - r0);
    }
}
