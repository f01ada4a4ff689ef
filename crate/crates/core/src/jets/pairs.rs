use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

use super::matrices::{check_eq_n_epsilon, eq_n_epsilon_margin, index_set, JetMatrices};

/// Relative tolerance for the eigenvalue tests of the block inequalities.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// A pair `(X, Y)` of symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPair {
    pub x: SymMatrix,
    pub y: SymMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    /// `lambda_min(M [[Ht, -Ht], [-Ht, Ht]] - diag(X', Y'))`.
    pub upper_slack: f64,
    /// `lambda_min(diag(X', Y') + 6 M |H1| I)`.
    pub lower_slack: f64,
    /// `6 M |H1|`, the scale used for the tolerance.
    pub scale: f64,
}

impl Feasibility {
    pub fn feasible(&self) -> bool {
        let tol = -FEASIBILITY_TOL * self.scale;
        self.upper_slack >= tol && self.lower_slack >= tol
    }
}

/// `X' = X - (2M + 1) I`.
pub fn shifted_part(x: &SymMatrix, m: f64) -> SymMatrix {
    x.shifted(-(2.0 * m + 1.0))
}

/// Eigenvalue test of both sides of the block inequality.
pub fn check_feasible(pair: &MatrixPair, jm: &JetMatrices) -> Result<Feasibility> {
    let n = jm.dim();
    if pair.x.order() != n || pair.y.order() != n {
        return Err(Error::param(format!("pair matrices must be {n}x{n}")));
    }
    let m = jm.m;
    let xp = shifted_part(&pair.x, m);
    let yp = shifted_part(&pair.y, m);
    let zero = SymMatrix::zeros(n);
    let diag = SymMatrix::block2(&xp, &zero, &yp);
    let ht = jm.htilde.scaled(m);
    let upper = SymMatrix::block2(&ht, &ht.scaled(-1.0), &ht).sub(&diag);
    let scale = 6.0 * m * jm.h1_norm;
    Ok(Feasibility {
        upper_slack: upper.min_eigenvalue(),
        lower_slack: diag.shifted(scale).min_eigenvalue(),
        scale,
    })
}

/// Random symmetric matrix of spectral norm `r`.
pub fn random_symmetric(n: usize, r: f64, rng: &mut impl Rng) -> SymMatrix {
    let s = SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let norm = s.norm();
    if norm == 0.0 {
        SymMatrix::zeros(n)
    } else {
        s.scaled(r / norm)
    }
}

/// Random negative semidefinite matrix of spectral norm `r`.
pub fn random_nsd(n: usize, r: f64, rng: &mut impl Rng) -> SymMatrix {
    let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g = SymMatrix::from_fn(n, |i, j| -(0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>());
    let norm = g.norm();
    if norm == 0.0 {
        SymMatrix::zeros(n)
    } else {
        g.scaled(r / norm)
    }
}

/// `X = Y = (2M + 1) I - 2M |Ht| I + S`, `|S| <= M |Ht| / 4`, checked by
/// eigenvalues and resampled up to 100 times.
pub fn feasible_pair_sample(jm: &JetMatrices, rng: &mut impl Rng) -> Result<MatrixPair> {
    let n = jm.dim();
    let m = jm.m;
    let ht_norm = jm.htilde.norm();
    let base = SymMatrix::identity(n).scaled(2.0 * m + 1.0 - 2.0 * m * ht_norm);
    for _ in 0..100 {
        let r = rng.gen_range(0.0..=1.0) * m * ht_norm / 4.0;
        let x = base.add(&random_symmetric(n, r, rng));
        let pair = MatrixPair { y: x.clone(), x };
        if check_feasible(&pair, jm)?.feasible() {
            return Ok(pair);
        }
    }
    Err(Error::pre("no feasible pair found in 100 attempts"))
}

/// The unperturbed point `X = Y = (2M + 1 - 2M |Ht|) I`.
pub fn unperturbed_pair(jm: &JetMatrices) -> MatrixPair {
    let n = jm.dim();
    let m = jm.m;
    let x = SymMatrix::identity(n).scaled(2.0 * m + 1.0 - 2.0 * m * jm.htilde.norm());
    MatrixPair { y: x.clone(), x }
}

/// `X' = Y' = 2M beta w'' xhat xhat^T + S` with `S` negative semidefinite of
/// norm `min((2M+1)/16, M|H1|/4)`. The upper block inequality is tight along
/// `(xhat, -xhat)` and the summed norm stays within `4.5 M |H1|`.
pub fn saturating_pair(jm: &JetMatrices, rng: &mut impl Rng) -> MatrixPair {
    let n = jm.dim();
    let m = jm.m;
    let perturbation = ((2.0 * m + 1.0) / 16.0).min(m * jm.h1_norm / 4.0);
    let unit: Vec<f64> = jm.x.iter().map(|v| v / jm.s).collect();
    let core = SymMatrix::outer(&unit).scaled(2.0 * m * jm.beta * jm.d2);
    let sx = random_nsd(n, perturbation, rng);
    let sy = random_nsd(n, perturbation, rng);
    MatrixPair {
        x: core.add(&sx).shifted(2.0 * m + 1.0),
        y: core.add(&sy).shifted(2.0 * m + 1.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conclusion {
    pub value: f64,
    pub bound: f64,
}

impl Conclusion {
    pub fn slack(&self) -> f64 {
        self.bound - self.value
    }

    pub fn holds(&self, rel: f64) -> bool {
        self.slack() >= -rel * self.bound.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop5Report {
    pub feasibility: Feasibility,
    /// Largest eigenvalue of `M^{p-2} Theta (X + Y) Theta` against `2(2M+1) M^{p-2} |Theta|^2`.
    pub all_eigenvalues: Conclusion,
    /// Smallest eigenvalue of `M^{p-2} Theta (X + Y - 2(2M+1) I) Theta`, `p <= 4` bound.
    pub smallest_small_p: Option<Conclusion>,
    /// Same eigenvalue, `p >= 4` bound.
    pub smallest_large_p: Option<Conclusion>,
    /// `|X - (2M+1) I| + |Y - (2M+1) I|` against `6 M |H1|`.
    pub majnorm: Conclusion,
}

impl Prop5Report {
    pub fn conclusions(&self) -> Vec<(&'static str, &Conclusion)> {
        let mut v = vec![("all_eigenvalues", &self.all_eigenvalues)];
        if let Some(c) = &self.smallest_small_p {
            v.push(("smallest_p_leq_4", c));
        }
        if let Some(c) = &self.smallest_large_p {
            v.push(("smallest_p_geq_4", c));
        }
        v.push(("majnorm", &self.majnorm));
        v
    }

    pub fn all_hold(&self, rel: f64) -> bool {
        self.conclusions().iter().all(|(_, c)| c.holds(rel))
    }
}

/// Evaluates the eigenvalue conclusions for a feasible pair. For `p > 4`, and
/// for `p = 4` when `eps` is given, the `eps` condition must hold at `jm.x`.
pub fn prop5_conclusions_check(
    pair: &MatrixPair,
    jm: &JetMatrices,
    eps: Option<f64>,
) -> Result<Prop5Report> {
    let feasibility = check_feasible(pair, jm)?;
    if !feasibility.feasible() {
        return Err(Error::pre(format!(
            "pair is not feasible for the block inequality (upper slack {}, lower slack {})",
            feasibility.upper_slack, feasibility.lower_slack
        )));
    }
    let (m, p) = (jm.m, jm.p);
    let n = jm.dim() as f64;
    let mp2 = m.powf(p - 2.0);
    let sum = pair.x.add(&pair.y);
    let full = sum.congruence_diag(&jm.theta).scaled(mp2);
    let theta_sq = jm.theta_norm().powi(2);
    let all_eigenvalues = Conclusion {
        value: full.max_eigenvalue(),
        bound: 2.0 * (2.0 * m + 1.0) * mp2 * theta_sq,
    };
    let reduced =
        sum.shifted(-2.0 * (2.0 * m + 1.0)).congruence_diag(&jm.theta).scaled(mp2).min_eigenvalue();
    let smallest_small_p = (p <= 4.0).then(|| Conclusion {
        value: reduced,
        bound: 2.0 * m.powf(p - 1.0) * n.powf((2.0 - p) / 2.0) * jm.d1.powf(p - 2.0) * jm.d2,
    });
    let smallest_large_p = if p > 4.0 || (p == 4.0 && eps.is_some()) {
        let eps = eps.ok_or_else(|| Error::param("p > 4 requires eps"))?;
        let count = index_set(&jm.x, eps).len();
        if count == 0 {
            return Err(Error::pre(format!("index set I(x, {eps}) is empty")));
        }
        if !check_eq_n_epsilon(jm, eps) {
            return Err(Error::pre(format!(
                "condition on eps fails at |x| = {} (margin {})",
                jm.s,
                eq_n_epsilon_margin(jm, eps)
            )));
        }
        let t = jm.s.powf(2.0 * eps);
        Some(Conclusion {
            value: reduced,
            bound: m.powf(p - 1.0) * (1.0 - n * t) / count as f64
                * jm.d1.powf(p - 2.0)
                * jm.s.powf((p - 4.0) * eps)
                * jm.d2,
        })
    } else {
        None
    };
    let majnorm = Conclusion {
        value: shifted_part(&pair.x, m).norm() + shifted_part(&pair.y, m).norm(),
        bound: 6.0 * m * jm.h1_norm,
    };
    Ok(Prop5Report { feasibility, all_eigenvalues, smallest_small_p, smallest_large_p, majnorm })
}
