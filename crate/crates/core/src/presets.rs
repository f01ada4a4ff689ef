//! Named right-hand sides and boundary data, with a text form used by configs
//! and report rows.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::jets::suites::stream;
use crate::solver::EnergyProblem;

/// Profile `w` with `(|w'|^{p-2} w')' = c` on `(-1, 1)` and `w(+-1) = 0`.
pub fn separable_profile(c: f64, p: f64, t: f64) -> f64 {
    let q = p / (p - 1.0);
    c.signum() * c.abs().powf(1.0 / (p - 1.0)) / q * (t.abs().powf(q) - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhsPreset {
    Constant { c: f64 },
    /// `f = N c / (p - 1)`, solved exactly by `sum_i w(x_i)`.
    Separable { c: f64 },
    Gaussian { amp: f64, width: f64, centre: Vec<f64> },
    /// `amp` times the sign of `prod_i sin(freq pi x_i)`, zero on the nodal lines.
    Checkerboard { amp: f64, freq: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryPreset {
    Zero,
    Affine { offset: f64, slope: Vec<f64> },
    /// `sum_i w(x_i)` for the separable profile with constant `c`.
    Separable { c: f64 },
}

fn pad(v: &[f64], i: usize) -> f64 {
    v.get(i).copied().unwrap_or(0.0)
}

impl RhsPreset {
    pub fn eval(&self, x: &[f64], p: f64) -> f64 {
        match self {
            RhsPreset::Constant { c } => *c,
            RhsPreset::Separable { c } => x.len() as f64 * c / (p - 1.0),
            RhsPreset::Gaussian { amp, width, centre } => {
                let r2: f64 = x.iter().enumerate().map(|(i, xi)| (xi - pad(centre, i)).powi(2)).sum();
                amp * (-r2 / (2.0 * width * width)).exp()
            }
            RhsPreset::Checkerboard { amp, freq } => {
                let prod: f64 = x.iter().map(|xi| (freq * std::f64::consts::PI * xi).sin()).product();
                if prod.abs() < 1e-12 {
                    0.0
                } else {
                    amp * prod.signum()
                }
            }
        }
    }

    pub fn field(&self, grid: &Arc<Grid>, p: f64) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |x| self.eval(x, p))
    }
}

impl BoundaryPreset {
    pub fn eval(&self, x: &[f64], p: f64) -> f64 {
        match self {
            BoundaryPreset::Zero => 0.0,
            BoundaryPreset::Affine { offset, slope } => {
                offset + x.iter().enumerate().map(|(i, xi)| pad(slope, i) * xi).sum::<f64>()
            }
            BoundaryPreset::Separable { c } => x.iter().map(|&t| separable_profile(*c, p, t)).sum(),
        }
    }
}

pub type ExactSolution = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A right-hand side paired with boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub f: RhsPreset,
    pub boundary: BoundaryPreset,
}

impl Case {
    pub fn new(f: RhsPreset, boundary: BoundaryPreset) -> Self {
        Self { f, boundary }
    }

    pub fn problem(&self, grid: &Arc<Grid>, p: f64) -> Result<EnergyProblem> {
        let boundary = self.boundary.clone();
        EnergyProblem::new(self.f.field(grid, p)?, p, move |x| boundary.eval(x, p))
    }

    /// Closed-form solution, when one is known on the unit ball and the cube.
    pub fn exact(&self, p: f64, dim: usize) -> Option<ExactSolution> {
        match (&self.f, &self.boundary) {
            (RhsPreset::Separable { c }, BoundaryPreset::Separable { c: cb }) if c == cb => {
                let c = *c;
                Some(Box::new(move |x: &[f64]| x.iter().map(|&t| separable_profile(c, p, t)).sum()))
            }
            (RhsPreset::Separable { c }, BoundaryPreset::Zero) if dim == 1 => {
                let c = *c;
                Some(Box::new(move |x: &[f64]| separable_profile(c, p, x[0])))
            }
            (RhsPreset::Constant { c }, BoundaryPreset::Zero) if dim == 1 => {
                let c = (p - 1.0) * c;
                Some(Box::new(move |x: &[f64]| separable_profile(c, p, x[0])))
            }
            _ => None,
        }
    }

    /// Copy with every continuous parameter perturbed by a relative amount of
    /// at most `jitter` (centres move by at most `jitter` absolutely).
    pub fn jittered(&self, jitter: f64, rng: &mut impl Rng) -> Self {
        let mut scale = |v: f64| v * (1.0 + jitter * rng.gen_range(-1.0..=1.0));
        let f = match &self.f {
            RhsPreset::Constant { c } => RhsPreset::Constant { c: scale(*c) },
            RhsPreset::Separable { c } => RhsPreset::Separable { c: scale(*c) },
            RhsPreset::Gaussian { amp, width, centre } => {
                let (amp, width) = (scale(*amp), scale(*width));
                let centre = centre.iter().map(|v| v + jitter * rng.gen_range(-1.0..=1.0)).collect();
                RhsPreset::Gaussian { amp, width, centre }
            }
            RhsPreset::Checkerboard { amp, freq } => RhsPreset::Checkerboard { amp: scale(*amp), freq: *freq },
        };
        let mut scale = |v: f64| v * (1.0 + jitter * rng.gen_range(-1.0..=1.0));
        let boundary = match &self.boundary {
            BoundaryPreset::Zero => BoundaryPreset::Zero,
            BoundaryPreset::Affine { offset, slope } => BoundaryPreset::Affine {
                offset: scale(*offset),
                slope: slope.iter().map(|&s| scale(s)).collect(),
            },
            BoundaryPreset::Separable { c } => BoundaryPreset::Separable { c: scale(*c) },
        };
        Self { f, boundary }
    }
}

/// The ten cases of the regularity sweep.
pub fn standard_cases() -> Vec<Case> {
    use BoundaryPreset as B;
    use RhsPreset as F;
    let gauss = |amp: f64, width: f64, centre: &[f64]| F::Gaussian { amp, width, centre: centre.to_vec() };
    vec![
        Case::new(F::Constant { c: 1.0 }, B::Zero),
        Case::new(F::Constant { c: -3.0 }, B::Affine { offset: 0.0, slope: vec![0.5, -0.25] }),
        Case::new(F::Separable { c: 1.0 }, B::Separable { c: 1.0 }),
        Case::new(gauss(1.0, 0.3, &[0.0, 0.0]), B::Zero),
        Case::new(gauss(4.0, 0.15, &[0.4, 0.2]), B::Zero),
        Case::new(gauss(-2.0, 0.25, &[-0.3, 0.3]), B::Affine { offset: 0.2, slope: vec![0.0, 1.0] }),
        Case::new(F::Checkerboard { amp: 1.0, freq: 2.0 }, B::Zero),
        Case::new(F::Checkerboard { amp: 2.0, freq: 4.0 }, B::Zero),
        Case::new(F::Checkerboard { amp: 1.0, freq: 3.0 }, B::Affine { offset: -0.5, slope: vec![1.0, 1.0] }),
        Case::new(F::Constant { c: 0.0 }, B::Affine { offset: 0.0, slope: vec![1.0, -2.0] }),
    ]
}

/// `standard_cases` perturbed with per-case streams of `seed`.
pub fn jittered_cases(cases: &[Case], jitter: f64, seed: u64) -> Vec<Case> {
    cases
        .iter()
        .enumerate()
        .map(|(k, c)| c.jittered(jitter, &mut stream(seed, (4 << 32) + k)))
        .collect()
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for RhsPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsPreset::Constant { c } => write!(f, "constant c={c}"),
            RhsPreset::Separable { c } => write!(f, "separable c={c}"),
            RhsPreset::Gaussian { amp, width, centre } => {
                write!(f, "gaussian amp={amp} width={width} centre={}", list(centre))
            }
            RhsPreset::Checkerboard { amp, freq } => write!(f, "checkerboard amp={amp} freq={freq}"),
        }
    }
}

impl fmt::Display for BoundaryPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryPreset::Zero => write!(f, "zero"),
            BoundaryPreset::Affine { offset, slope } => write!(f, "affine offset={offset} slope={}", list(slope)),
            BoundaryPreset::Separable { c } => write!(f, "separable c={c}"),
        }
    }
}

/// `name key=value ...`; returns the name and the pairs in order.
fn split_spec(text: &str) -> Result<(&str, Vec<(&str, &str)>)> {
    let mut words = text.split_whitespace();
    let name = words.next().ok_or_else(|| Error::Config("empty preset".into()))?;
    let pairs = words
        .map(|w| {
            w.split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{w}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name, pairs))
}

struct Args<'a> {
    name: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Args<'a> {
    fn take(&mut self, key: &str) -> Option<&'a str> {
        let pos = self.pairs.iter().position(|(k, _)| *k == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn num(&mut self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.take(key) {
            Some(v) => parse_num(v, key),
            None => default.ok_or_else(|| Error::Config(format!("{} needs `{key}`", self.name))),
        }
    }

    fn nums(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.take(key) {
            Some(v) => parse_list(v, key),
            None => Ok(default),
        }
    }

    fn finish(self) -> Result<()> {
        match self.pairs.first() {
            Some((k, _)) => Err(Error::Config(format!("unknown key `{k}` for {}", self.name))),
            None => Ok(()),
        }
    }
}

fn parse_num(v: &str, key: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Config(format!("`{key}` must be a finite number, got `{v}`"))),
    }
}

fn parse_list(v: &str, key: &str) -> Result<Vec<f64>> {
    let out = v.split(',').map(|s| parse_num(s.trim(), key)).collect::<Result<Vec<_>>>()?;
    if out.len() > 3 {
        return Err(Error::Config(format!("`{key}` has more than three components")));
    }
    Ok(out)
}

impl std::str::FromStr for RhsPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, pairs) = split_spec(s)?;
        let mut a = Args { name, pairs };
        let preset = match name {
            "constant" => RhsPreset::Constant { c: a.num("c", None)? },
            "separable" => RhsPreset::Separable { c: a.num("c", Some(2.0))? },
            "gaussian" => {
                let amp = a.num("amp", Some(1.0))?;
                let width = a.num("width", Some(0.3))?;
                if width <= 0.0 {
                    return Err(Error::Config(format!("gaussian width must be positive, got {width}")));
                }
                RhsPreset::Gaussian { amp, width, centre: a.nums("centre", vec![])? }
            }
            "checkerboard" => {
                let amp = a.num("amp", Some(1.0))?;
                let freq = a.num("freq", Some(2.0))?;
                if freq <= 0.0 {
                    return Err(Error::Config(format!("checkerboard freq must be positive, got {freq}")));
                }
                RhsPreset::Checkerboard { amp, freq }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown f preset `{other}` (expected constant, separable, gaussian or checkerboard)"
                )))
            }
        };
        a.finish()?;
        Ok(preset)
    }
}

impl std::str::FromStr for BoundaryPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, pairs) = split_spec(s)?;
        let mut a = Args { name, pairs };
        let preset = match name {
            "zero" => BoundaryPreset::Zero,
            "affine" => BoundaryPreset::Affine {
                offset: a.num("offset", Some(0.0))?,
                slope: a.nums("slope", vec![])?,
            },
            "separable" => BoundaryPreset::Separable { c: a.num("c", Some(2.0))? },
            other => {
                return Err(Error::Config(format!(
                    "unknown boundary preset `{other}` (expected zero, affine or separable)"
                )))
            }
        };
        a.finish()?;
        Ok(preset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use crate::operator::{apply, Form};

    #[test]
    fn profile_matches_known_case() {
        let w = |x: f64| 2.0 * 2f64.sqrt() / 3.0 * (x.abs().powf(1.5) - 1.0);
        for t in [-1.0, -0.3, 0.0, 0.7] {
            assert!((separable_profile(2.0, 3.0, t) - w(t)).abs() < 1e-15);
        }
        assert_eq!(separable_profile(-2.0, 3.0, 0.5), -separable_profile(2.0, 3.0, 0.5));
    }

    #[test]
    fn separable_case_is_nearly_discrete_solution() {
        let p = 4.0;
        let grid = Grid::build(2, 65, Shape::Cube).unwrap();
        let case = Case::new(RhsPreset::Separable { c: 1.5 }, BoundaryPreset::Separable { c: 1.5 });
        let exact = case.exact(p, 2).unwrap();
        let u = ScalarField::from_fn(&grid, |x| exact(x)).unwrap();
        let f = case.f.field(&grid, p).unwrap();
        let lhs = apply(&u, p, Form::Divergence).unwrap();
        let away = grid
            .interior_nodes()
            .iter()
            .filter(|&&i| grid.coords(i).iter().all(|x| x.abs() > 0.2));
        for &i in away {
            let r = lhs.get(i).unwrap() - (p - 1.0) * f.get(i).unwrap();
            assert!(r.abs() < 0.05, "{r}");
        }
    }

    #[test]
    fn round_trip_text() {
        for case in standard_cases() {
            let f: RhsPreset = case.f.to_string().parse().unwrap();
            let b: BoundaryPreset = case.boundary.to_string().parse().unwrap();
            assert_eq!(Case::new(f, b), case);
        }
    }

    #[test]
    fn parse_errors() {
        assert!("constant".parse::<RhsPreset>().is_err());
        assert!("gaussian width=-1".parse::<RhsPreset>().is_err());
        assert!("gaussian size=2".parse::<RhsPreset>().is_err());
        assert!("wave".parse::<RhsPreset>().is_err());
        assert!("affine slope=1,x".parse::<BoundaryPreset>().is_err());
        assert_eq!(
            "checkerboard freq=3".parse::<RhsPreset>().unwrap(),
            RhsPreset::Checkerboard { amp: 1.0, freq: 3.0 }
        );
    }

    #[test]
    fn checkerboard_alternates() {
        let f = RhsPreset::Checkerboard { amp: 2.0, freq: 2.0 };
        assert_eq!(f.eval(&[0.25, 0.25], 3.0), 2.0);
        assert_eq!(f.eval(&[-0.25, 0.25], 3.0), -2.0);
        assert_eq!(f.eval(&[0.5, 0.25], 3.0), 0.0);
    }

    #[test]
    fn jitter_is_seeded_and_small() {
        let base = standard_cases();
        let a = jittered_cases(&base, 0.01, 1);
        assert_eq!(a, jittered_cases(&base, 0.01, 1));
        assert_ne!(a, jittered_cases(&base, 0.01, 2));
        assert_eq!(jittered_cases(&base, 0.0, 5), base);
        if let (RhsPreset::Gaussian { width: w0, .. }, RhsPreset::Gaussian { width: w1, .. }) = (&base[4].f, &a[4].f) {
            assert!((w1 / w0 - 1.0).abs() <= 0.01);
        }
    }
}
