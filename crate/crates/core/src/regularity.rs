//! Interior seminorms of grid functions and the scale-free regularity ratio.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::operator::check_exponent;
use crate::report::{num, CsvRow};

/// Coordinates and values of the nodes in the closed ball of radius `r`.
struct BallSample {
    coords: Vec<[f64; 3]>,
    values: Vec<f64>,
}

fn ball_sample(u: &ScalarField, r: f64) -> Result<BallSample> {
    let grid = u.grid();
    let limit = 1.0 - 2.0 * grid.h();
    if !(r < limit) {
        return Err(Error::param(format!("radius {r} must be below 1 - 2h = {limit}")));
    }
    let nodes = grid.interior_ball_nodes(r)?;
    if nodes.len() < 2 {
        return Err(Error::pre(format!("ball of radius {r} holds fewer than two nodes")));
    }
    let mut coords = Vec::with_capacity(nodes.len());
    let mut values = Vec::with_capacity(nodes.len());
    for node in nodes {
        let v = u
            .get(node)
            .ok_or_else(|| Error::pre(format!("node {:?} carries no value", grid.coords(node))))?;
        let mut x = [0.0; 3];
        grid.coords_into(node, &mut x);
        coords.push(x);
        values.push(v);
    }
    Ok(BallSample { coords, values })
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("gamma must lie in (0, 1), got {gamma}")))
    }
}

/// Lipschitz and Hölder seminorms over one ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Seminorms {
    pub lip: f64,
    /// `(gamma, seminorm)` in the order requested.
    pub holder: Vec<(f64, f64)>,
}

/// Exhaustive scan of all node pairs in `B_r`. Pairs are split by first
/// node and reduced by max, so the result does not depend on scheduling.
pub fn seminorms(u: &ScalarField, r: f64, gammas: &[f64]) -> Result<Seminorms> {
    for &g in gammas {
        check_gamma(g)?;
    }
    let ball = ball_sample(u, r)?;
    let k = gammas.len();
    let init = || vec![0.0f64; k + 1];
    let best = (0..ball.values.len())
        .into_par_iter()
        .fold(init, |mut acc, i| {
            for j in i + 1..ball.values.len() {
                let d = dist(&ball.coords[i], &ball.coords[j]);
                let du = (ball.values[i] - ball.values[j]).abs();
                acc[0] = acc[0].max(du / d);
                for (slot, &g) in acc[1..].iter_mut().zip(gammas) {
                    *slot = slot.max(du / d.powf(g));
                }
            }
            acc
        })
        .reduce(init, |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    Ok(Seminorms {
        lip: best[0],
        holder: gammas.iter().copied().zip(best[1..].iter().copied()).collect(),
    })
}

pub fn lipschitz_seminorm(u: &ScalarField, r: f64) -> Result<f64> {
    Ok(seminorms(u, r, &[])?.lip)
}

pub fn holder_seminorm(u: &ScalarField, r: f64, gamma: f64) -> Result<f64> {
    Ok(seminorms(u, r, &[gamma])?.holder[0].1)
}

/// One pair of ball nodes with its difference quotients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairQuotient {
    pub dist: f64,
    pub lip: f64,
    pub holder: f64,
}

/// Every pair quotient in `B_r`; quadratic in memory, meant for small grids.
pub fn pair_quotients(u: &ScalarField, r: f64, gamma: f64) -> Result<Vec<PairQuotient>> {
    check_gamma(gamma)?;
    let ball = ball_sample(u, r)?;
    let n = ball.values.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(&ball.coords[i], &ball.coords[j]);
            let du = (ball.values[i] - ball.values[j]).abs();
            out.push(PairQuotient { dist: d, lip: du / d, holder: du / d.powf(gamma) });
        }
    }
    Ok(out)
}

/// `s = |u|_inf + |f|_inf^{1/(p-1)}`.
pub fn normalization_scale(u: &ScalarField, f: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if **u.grid() != **f.grid() {
        return Err(Error::GridMismatch);
    }
    let s = u.sup_norm() + f.sup_norm().powf(1.0 / (p - 1.0));
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::pre("u and f both vanish; the normalization scale is zero"))
    }
}

/// `(u / s, f / s^{p-1})`, which solves the same equation with both sup norms
/// at most one.
pub fn normalize_solution(u: &ScalarField, f: &ScalarField, p: f64) -> Result<(ScalarField, ScalarField)> {
    let s = normalization_scale(u, f, p)?;
    Ok((u.scaled(1.0 / s), f.scaled(s.powf(1.0 - p))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub p: f64,
    pub dim: usize,
    pub r: f64,
    pub f_desc: String,
    pub boundary_desc: String,
    pub u_sup: f64,
    pub f_sup: f64,
    pub lip: f64,
    pub holder: Vec<(f64, f64)>,
    /// `lip / (u_sup + f_sup^{1/(p-1)})`.
    pub ratio: f64,
}

impl ExperimentRecord {
    pub fn measure(
        u: &ScalarField,
        f: &ScalarField,
        p: f64,
        r: f64,
        gammas: &[f64],
        f_desc: &str,
        boundary_desc: &str,
    ) -> Result<Self> {
        let s = normalization_scale(u, f, p)?;
        let sn = seminorms(u, r, gammas)?;
        let rec = Self {
            p,
            dim: u.grid().dim(),
            r,
            f_desc: f_desc.to_string(),
            boundary_desc: boundary_desc.to_string(),
            u_sup: u.sup_norm(),
            f_sup: f.sup_norm(),
            lip: sn.lip,
            holder: sn.holder,
            ratio: sn.lip / s,
        };
        let finite = [rec.u_sup, rec.f_sup, rec.lip, rec.ratio]
            .iter()
            .chain(rec.holder.iter().map(|(_, v)| v))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite(format!("experiment record for {f_desc}")));
        }
        Ok(rec)
    }
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(num).collect::<Vec<_>>().join(";")
}

impl CsvRow for ExperimentRecord {
    fn header() -> Vec<&'static str> {
        vec![
            "p", "dim", "r", "f", "boundary", "u_sup", "f_sup", "lip", "ratio",
            "holder_gammas", "holder_seminorms",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            num(self.p),
            self.dim.to_string(),
            num(self.r),
            self.f_desc.clone(),
            self.boundary_desc.clone(),
            num(self.u_sup),
            num(self.f_sup),
            num(self.lip),
            num(self.ratio),
            join(self.holder.iter().map(|h| h.0)),
            join(self.holder.iter().map(|h| h.1)),
        ]
    }
}

/// Largest ratio over records that share `(p, N, r)`.
pub fn estimate_constant(records: &[ExperimentRecord]) -> Result<f64> {
    let first = records.first().ok_or_else(|| Error::pre("no experiment records"))?;
    let mut best = 0.0f64;
    for rec in records {
        if (rec.p, rec.dim, rec.r) != (first.p, first.dim, first.r) {
            return Err(Error::param(format!(
                "records mix (p, N, r) = ({}, {}, {}) and ({}, {}, {})",
                first.p, first.dim, first.r, rec.p, rec.dim, rec.r
            )));
        }
        best = best.max(rec.ratio);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Shape};
    use crate::operator::{apply, Form};

    fn field(dim: usize, n: usize, f: impl FnMut(&[f64]) -> f64) -> ScalarField {
        ScalarField::from_fn(&Grid::build(dim, n, Shape::Ball).unwrap(), f).unwrap()
    }

    #[test]
    fn affine_field() {
        let u = field(2, 17, |x| 0.5 * x[0] - 2.0 * x[1] + 3.0);
        let lip = lipschitz_seminorm(&u, 0.5).unwrap();
        let g = (0.25f64 + 4.0).sqrt();
        assert!(lip >= 2.0 - 1e-12 && lip <= g + 1e-12, "{lip}");
        let u = field(1, 17, |x| -1.5 * x[0]);
        assert!((lipschitz_seminorm(&u, 0.5).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn constant_field() {
        let u = field(3, 17, |_| 4.0);
        let sn = seminorms(&u, 0.5, &[0.3, 0.7]).unwrap();
        assert_eq!(sn.lip, 0.0);
        assert!(sn.holder.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn closed_form_profile() {
        let w = |x: f64| 2.0 * 2f64.sqrt() / 3.0 * (x.abs().powf(1.5) - 1.0);
        let u = field(1, 129, |x| w(x[0]));
        let h = u.grid().h();
        let lip = lipschitz_seminorm(&u, 0.5).unwrap();
        assert!((lip - 1.0).abs() <= 5.0 * h, "{lip}");
        let hol = holder_seminorm(&u, 0.5, 0.5).unwrap();
        assert!((hol - 0.481_680_860_519_600_9).abs() < 1e-12, "{hol}");
    }

    #[test]
    fn pair_identity() {
        let u = field(2, 17, |x| (3.0 * x[0]).sin() * x[1].exp());
        let gamma = 0.4;
        for q in pair_quotients(&u, 0.6, gamma).unwrap() {
            let back = q.holder * q.dist.powf(gamma - 1.0);
            assert!((back - q.lip).abs() <= 1e-12 * q.lip.max(1.0));
        }
    }

    #[test]
    fn monotone_in_radius_and_gamma() {
        let u = field(2, 33, |x| (x[0] * x[0] + 0.3 * x[1]).sin());
        let radii = [0.2, 0.4, 0.6, 0.8];
        let lips: Vec<f64> = radii.iter().map(|&r| lipschitz_seminorm(&u, r).unwrap()).collect();
        assert!(lips.windows(2).all(|w| w[0] <= w[1]));
        let sn = seminorms(&u, 0.45, &[0.2, 0.5, 0.8]).unwrap();
        assert!(sn.holder.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn rejects_bad_input() {
        let u = field(1, 9, |x| x[0]);
        assert!(lipschitz_seminorm(&u, 0.6).is_err());
        assert!(lipschitz_seminorm(&u, 0.1).is_err());
        assert!(holder_seminorm(&u, 0.5, 1.0).is_err());
        let zero = field(1, 9, |_| 0.0);
        assert!(normalize_solution(&zero, &zero, 3.0).is_err());
    }

    #[test]
    fn normalization() {
        let p = 3.5;
        let u = field(2, 17, |x| 4.0 * (1.0 - x[0] * x[0]) + x[1].powi(3));
        let f = field(2, 17, |x| -7.0 + x[0]);
        let (v, ft) = normalize_solution(&u, &f, p).unwrap();
        assert!(v.sup_norm() <= 1.0 && ft.sup_norm() <= 1.0);
        let s = normalization_scale(&u, &f, p).unwrap();
        for form in [Form::Divergence, Form::NonDivergence] {
            let ru = apply(&u, p, form).unwrap();
            let rv = apply(&v, p, form).unwrap();
            for &i in u.grid().interior_nodes() {
                let orig = ru.get(i).unwrap() - (p - 1.0) * f.get(i).unwrap();
                let new = rv.get(i).unwrap() - (p - 1.0) * ft.get(i).unwrap();
                assert!((new - orig / s.powf(p - 1.0)).abs() <= 1e-12 * (orig.abs() + 1.0));
            }
        }
    }

    fn record(p: f64, r: f64, ratio: f64) -> ExperimentRecord {
        ExperimentRecord {
            p,
            dim: 2,
            r,
            f_desc: "c".into(),
            boundary_desc: "zero".into(),
            u_sup: 1.0,
            f_sup: 1.0,
            lip: ratio * 2.0,
            holder: vec![],
            ratio,
        }
    }

    #[test]
    fn constant_estimate() {
        assert_eq!(estimate_constant(&[record(3.0, 0.5, 1.25)]).unwrap(), 1.25);
        let recs = [record(3.0, 0.5, 1.0), record(3.0, 0.5, 2.0)];
        assert_eq!(estimate_constant(&recs).unwrap(), 2.0);
        assert!(estimate_constant(&[record(3.0, 0.5, 1.0), record(3.0, 0.25, 1.0)]).is_err());
        assert!(estimate_constant(&[]).is_err());
    }
}
