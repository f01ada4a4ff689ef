use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

use super::modulus::Modulus;

/// The matrices attached to `g(x) = omega(|x|)` at a point `x`.
#[derive(Debug, Clone)]
pub struct JetMatrices {
    pub x: Vec<f64>,
    /// `|x|`.
    pub s: f64,
    pub m: f64,
    pub p: f64,
    pub modulus: Modulus,
    /// `omega'(|x|)` and `omega''(|x|)`.
    pub d1: f64,
    pub d2: f64,
    /// Hessian of `g`.
    pub h1: SymMatrix,
    pub h1_norm: f64,
    /// `1 / (4 M |H1|)`.
    pub iota: f64,
    /// `H1 + 2 iota H1^2`.
    pub htilde: SymMatrix,
    pub alpha: f64,
    pub beta: f64,
    /// Diagonal of `Theta`.
    pub theta: Vec<f64>,
    /// `Theta Htilde Theta`.
    pub h: SymMatrix,
}

impl JetMatrices {
    pub fn build(x: &[f64], m: f64, p: f64, modulus: Modulus) -> Result<Self> {
        crate::operator::check_exponent(p)?;
        if x.is_empty() {
            return Err(Error::param("point must have at least one coordinate"));
        }
        if !(m > 1.0 && m.is_finite()) {
            return Err(Error::param(format!("M must exceed 1, got {m}")));
        }
        let s = norm(x);
        if !(s > 0.0) {
            return Err(Error::pre("the point x must be nonzero"));
        }
        if !(s < 1.0 && s < modulus.validity()) {
            return Err(Error::pre(format!(
                "|x| = {s} is outside the validity range (0, {})",
                modulus.validity().min(1.0)
            )));
        }
        let n = x.len();
        let d1 = modulus.d1(s);
        let d2 = modulus.d2(s);
        let unit: Vec<f64> = x.iter().map(|v| v / s).collect();
        let radial = SymMatrix::outer(&unit);
        let tangential = tangential_projector(&unit);
        let h1 = radial.scaled(d2).add(&tangential.scaled(d1 / s));
        let h1_norm = if n == 1 { d2.abs() } else { d2.abs().max(d1 / s) };
        let iota = 1.0 / (4.0 * m * h1_norm);
        // H1^2 from the spectral form: the product of the assembled matrices
        // loses the radial eigenvalue when w'/|x| >> |w''|
        let h1_sq = radial.scaled(d2 * d2).add(&tangential.scaled((d1 / s) * (d1 / s)));
        let htilde = h1.add(&h1_sq.scaled(2.0 * iota));
        let alpha = 1.0 + 2.0 * iota * d1 / s;
        let beta = 1.0 + 2.0 * iota * d2;
        let theta: Vec<f64> = x.iter().map(|xi| (d1 * xi / s).abs().powf((p - 2.0) / 2.0)).collect();
        let h = htilde.congruence_diag(&theta);
        Ok(Self {
            x: x.to_vec(),
            s,
            m,
            p,
            modulus,
            d1,
            d2,
            h1,
            h1_norm,
            iota,
            htilde,
            alpha,
            beta,
            theta,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `(beta w'' - alpha w'/s) x x^T/|x|^2 + alpha (w'/s) I`, evaluated as
    /// `beta w'' P + alpha (w'/s) (I - P)` to avoid cancellation in 1D.
    pub fn htilde_closed_form(&self) -> SymMatrix {
        let n = self.dim();
        let unit: Vec<f64> = self.x.iter().map(|v| v / self.s).collect();
        let radial = SymMatrix::outer(&unit);
        let rest = SymMatrix::identity(n).sub(&radial);
        radial
            .scaled(self.beta * self.d2)
            .add(&rest.scaled(self.alpha * self.d1 / self.s))
    }

    /// Smallest eigenvalue of `H`. With `a = beta w''` and `b = alpha w'/|x|`,
    /// `H = b Theta^2 - (b - a) v v^T` where `v = Theta xhat`, and the negative
    /// eigenvalue is the root of
    /// `(b - a) lambda sum_i xhat_i^2 / (b Theta_ii^2 - lambda) = a`,
    /// which is evaluated without cancellation.
    pub fn h_min_eigenvalue(&self) -> f64 {
        let a = self.beta * self.d2;
        let b = self.alpha * self.d1 / self.s;
        let terms: Vec<(f64, f64)> = self
            .x
            .iter()
            .zip(&self.theta)
            .filter(|(xi, _)| **xi != 0.0)
            .map(|(xi, th)| ((xi / self.s).powi(2), b * th * th))
            .collect();
        let g = |lam: f64| (b - a) * lam * terms.iter().map(|(u2, d)| u2 / (d - lam)).sum::<f64>() - a;
        // H >= a Theta^2 bounds the root from below
        let mut lo = a * self.theta_norm().powi(2);
        let mut hi = 0.0f64;
        if g(lo) >= 0.0 {
            return lo;
        }
        for _ in 0..4000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `|Theta| = max_i Theta_ii`.
    pub fn theta_norm(&self) -> f64 {
        self.theta.iter().fold(0.0, |a, b| a.max(*b))
    }

    /// The doubled matrix `M [[H1, -H1], [-H1, H1]]`.
    pub fn doubled(&self) -> SymMatrix {
        let a = self.h1.scaled(self.m);
        SymMatrix::block2(&a, &a.scaled(-1.0), &a)
    }
}

/// `I - u u^T` for a unit vector `u`, with diagonal `sum_{j != i} u_j^2`.
fn tangential_projector(u: &[f64]) -> SymMatrix {
    SymMatrix::from_fn(u.len(), |i, j| {
        if i == j {
            u.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| v * v).sum()
        } else {
            -u[i] * u[j]
        }
    })
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Axes `i` with `|x_i| >= |x|^{1+eps}` (0-based).
pub fn index_set(x: &[f64], eps: f64) -> Vec<usize> {
    let threshold = norm(x).powf(1.0 + eps);
    (0..x.len()).filter(|&i| x[i].abs() >= threshold).collect()
}

/// `w = sum_i |x_i|^{(2-p)/2} x_i e_i`, over all axes when `p <= 4` and over
/// the index set when `p > 4`. Zero coordinates contribute zero.
pub fn test_vector(x: &[f64], p: f64, eps: Option<f64>) -> Result<Vec<f64>> {
    crate::operator::check_exponent(p)?;
    let axes: Vec<usize> = if p <= 4.0 {
        (0..x.len()).collect()
    } else {
        let eps = eps.ok_or_else(|| Error::param("p > 4 requires eps for the index set"))?;
        let set = index_set(x, eps);
        if set.is_empty() {
            return Err(Error::pre(format!("index set I(x, {eps}) is empty")));
        }
        set
    };
    let mut w = vec![0.0; x.len()];
    for i in axes {
        if x[i] != 0.0 {
            w[i] = x[i].abs().powf((2.0 - p) / 2.0) * x[i];
        }
    }
    Ok(w)
}

/// Upper bound on `|w|^2`: `|x|^{4-p} N^{(p-2)/2}` for `p <= 4`,
/// `#I |x|^{(4-p)(1+eps)}` for `p > 4`.
pub fn test_vector_norm_bound(x: &[f64], p: f64, eps: Option<f64>) -> Result<f64> {
    let s = norm(x);
    if p <= 4.0 {
        Ok(s.powf(4.0 - p) * (x.len() as f64).powf((p - 2.0) / 2.0))
    } else {
        let eps = eps.ok_or_else(|| Error::param("p > 4 requires eps for the index set"))?;
        Ok(index_set(x, eps).len() as f64 * s.powf((4.0 - p) * (1.0 + eps)))
    }
}

/// `beta w''(1 - N|x|^{2eps}) + alpha N |x|^{2eps} w'/|x| <= w''/4`.
pub fn check_eq_n_epsilon(jm: &JetMatrices, eps: f64) -> bool {
    eq_n_epsilon_margin(jm, eps) >= 0.0
}

/// `w''/4 - [beta w''(1 - N|x|^{2eps}) + alpha N |x|^{2eps} w'/|x|]`.
pub fn eq_n_epsilon_margin(jm: &JetMatrices, eps: f64) -> f64 {
    let n = jm.dim() as f64;
    let t = jm.s.powf(2.0 * eps);
    let lhs = jm.beta * jm.d2 * (1.0 - n * t) + jm.alpha * n * t * jm.d1 / jm.s;
    jm.d2 / 4.0 - lhs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Bound `N^{1-p/2} beta w'' (w')^{p-2}`, valid for `p <= 4`.
    SmallP,
    /// Bound `(1 - N|x|^{2eps}) / #I (w')^{p-2} |x|^{(p-4)eps} w''/4`, valid for
    /// `p >= 4` under the `eps` condition.
    LargeP,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::SmallP => "p_leq_4",
            Branch::LargeP => "p_geq_4",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBound {
    pub branch: Branch,
    /// `w^T H w / |w|^2`.
    pub rayleigh: f64,
    pub lambda_min: f64,
    pub bound: f64,
    /// `bound - lambda_min`.
    pub slack: f64,
    /// `bound - rayleigh`.
    pub rayleigh_slack: f64,
}

impl EigenBound {
    /// Slack non-negative up to `rel |bound|`.
    pub fn holds(&self, rel: f64) -> bool {
        self.slack >= -rel * self.bound.abs()
    }
}

/// Upper bound on the smallest eigenvalue of `H` from the chosen branch.
pub fn small_eigen_bound(jm: &JetMatrices, branch: Branch, eps: Option<f64>) -> Result<f64> {
    let n = jm.dim() as f64;
    let p = jm.p;
    match branch {
        Branch::SmallP => {
            if p > 4.0 {
                return Err(Error::pre(format!("the p <= 4 bound needs p <= 4, got {p}")));
            }
            Ok(n.powf(1.0 - p / 2.0) * jm.beta * jm.d2 * jm.d1.powf(p - 2.0))
        }
        Branch::LargeP => {
            if p < 4.0 {
                return Err(Error::pre(format!("the p >= 4 bound needs p >= 4, got {p}")));
            }
            let eps = eps.ok_or_else(|| Error::param("the p >= 4 bound requires eps"))?;
            let count = index_set(&jm.x, eps).len();
            if count == 0 {
                return Err(Error::pre(format!("index set I(x, {eps}) is empty")));
            }
            if !check_eq_n_epsilon(jm, eps) {
                return Err(Error::pre(format!(
                    "condition on eps fails at |x| = {}, eps = {eps} (margin {})",
                    jm.s,
                    eq_n_epsilon_margin(jm, eps)
                )));
            }
            let t = jm.s.powf(2.0 * eps);
            Ok((1.0 - n * t) / count as f64
                * jm.d1.powf(p - 2.0)
                * jm.s.powf((p - 4.0) * eps)
                * jm.d2
                / 4.0)
        }
    }
}

/// Compares `lambda_min(H)` and the Rayleigh quotient of the test vector with the bound.
pub fn prop4_bound_check(jm: &JetMatrices, branch: Branch, eps: Option<f64>) -> Result<EigenBound> {
    let bound = small_eigen_bound(jm, branch, eps)?;
    let w = match branch {
        Branch::SmallP => test_vector(&jm.x, jm.p.min(4.0), None)?,
        Branch::LargeP => restricted_test_vector(&jm.x, jm.p, eps.unwrap_or(0.0))?,
    };
    let len = norm(&w);
    let unit: Vec<f64> = w.iter().map(|v| v / len).collect();
    let rayleigh = jm.h.quad_form(&unit);
    let lambda_min = jm.h_min_eigenvalue();
    Ok(EigenBound {
        branch,
        rayleigh,
        lambda_min,
        bound,
        slack: bound - lambda_min,
        rayleigh_slack: bound - rayleigh,
    })
}

fn restricted_test_vector(x: &[f64], p: f64, eps: f64) -> Result<Vec<f64>> {
    let mut w = vec![0.0; x.len()];
    let set = index_set(x, eps);
    if set.is_empty() {
        return Err(Error::pre(format!("index set I(x, {eps}) is empty")));
    }
    for i in set {
        w[i] = x[i].abs().powf((2.0 - p) / 2.0) * x[i];
    }
    Ok(w)
}
