use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::matrices::{norm, JetMatrices};
use super::pairs::{check_feasible, feasible_pair_sample, saturating_pair, unperturbed_pair, MatrixPair};
use super::regimes::RegimeParams;

/// How the matrix pair `(X, Y)` is produced at `x = xbar - ybar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Witness {
    /// `feasible_pair_sample`.
    Sampled,
    /// `X = Y = (2M + 1 - 2M|Ht|) I`.
    Unperturbed,
    /// Tight along `(xhat, -xhat)` with a small negative semidefinite perturbation.
    Saturating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimsConfig {
    pub m: f64,
    /// Stand-in for the Holder constant bounding `|xbar - x0|^2`.
    pub c_emp: f64,
    pub witness: Witness,
}

impl Default for ClaimsConfig {
    fn default() -> Self {
        Self { m: 100.0, c_emp: 10.0, witness: Witness::Sampled }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimsReport {
    pub s: f64,
    /// `lambda_1 / (M^{p-1} s^{-tau_hat})`.
    pub ratio1: f64,
    /// `max_{i>=2} lambda_i / (M^{p-1} s^{-tau_1})`; absent when `N = 1`.
    pub ratio2: Option<f64>,
    /// Left side of the gradient comparison over `M^{p-1} s^{-tau_2}`.
    pub ratio3: f64,
    pub q_norm: f64,
    pub qx_norm: f64,
    pub qy_norm: f64,
    /// `M/4 <= |q^x|, |q^y| <= 5M/4`.
    pub ineqx: bool,
    pub below_delta_n: bool,
}

/// `sqrt(c_emp s^gamma / M)`.
pub fn localization_radius(rp: &RegimeParams, s: f64, cfg: &ClaimsConfig) -> f64 {
    (cfg.c_emp * s.powf(rp.gamma) / cfg.m).sqrt()
}

pub fn claims_check(
    xbar: &[f64],
    ybar: &[f64],
    x0: &[f64],
    rp: &RegimeParams,
    cfg: &ClaimsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ClaimsReport> {
    let n = rp.dim;
    if xbar.len() != n || ybar.len() != n || x0.len() != n {
        return Err(Error::param(format!("points must have {n} coordinates")));
    }
    let diff: Vec<f64> = xbar.iter().zip(ybar).map(|(a, b)| a - b).collect();
    let s = norm(&diff);
    if !(s > 0.0) {
        return Err(Error::pre("xbar and ybar must differ"));
    }
    if !rp.regime.is_holder() {
        let rho = localization_radius(rp, s, cfg);
        let dx = dist(xbar, x0);
        let dy = dist(ybar, x0);
        if dx > rho * (1.0 + 1e-12) || dy > rho * (1.0 + 1e-12) {
            return Err(Error::pre(format!(
                "|xbar - x0| = {dx}, |ybar - x0| = {dy} exceed the localization radius {rho}"
            )));
        }
    }
    let (m, p) = (cfg.m, rp.p);
    let modulus = rp.modulus();
    let jm = JetMatrices::build(&diff, m, p, modulus)?;
    let pair = match cfg.witness {
        Witness::Sampled => feasible_pair_sample(&jm, rng)?,
        Witness::Unperturbed => unperturbed_pair(&jm),
        Witness::Saturating => saturating_pair(&jm, rng),
    };
    if !check_feasible(&pair, &jm)?.feasible() {
        return Err(Error::pre("witness pair is not feasible"));
    }
    let mp1 = m.powf(p - 1.0);
    let ev = pair.x.add(&pair.y).congruence_diag(&jm.theta).scaled(m.powf(p - 2.0)).eigenvalues();
    let ratio1 = ev[0] / (mp1 * s.powf(-rp.tau_hat));
    let ratio2 = (n > 1).then(|| ev[n - 1] / (mp1 * s.powf(-rp.tau1)));

    let q: Vec<f64> = diff.iter().map(|d| m * jm.d1 * d / s).collect();
    let qx: Vec<f64> = (0..n).map(|i| q[i] + 2.0 * m * (xbar[i] - x0[i])).collect();
    let qy: Vec<f64> = (0..n).map(|i| q[i] - 2.0 * m * (ybar[i] - x0[i])).collect();
    let (q_norm, qx_norm, qy_norm) = (norm(&q), norm(&qx), norm(&qy));
    let lhs3 = gradient_gap(q_norm, qx_norm, p) * pair.x.norm()
        + gradient_gap(q_norm, qy_norm, p) * pair.y.norm();
    let ratio3 = lhs3 / (mp1 * s.powf(-rp.tau2));
    let ineqx = [qx_norm, qy_norm].iter().all(|v| *v >= m / 4.0 && *v <= 1.25 * m);
    Ok(ClaimsReport {
        s,
        ratio1,
        ratio2,
        ratio3,
        q_norm,
        qx_norm,
        qy_norm,
        ineqx,
        below_delta_n: s < rp.delta(),
    })
}

fn gradient_gap(q: f64, other: f64, p: f64) -> f64 {
    (other.powf(p - 2.0) - q.powf(p - 2.0)).abs()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn direction(n: usize) -> Vec<f64> {
    let d = &[1.0, 0.6, 0.3][..n];
    let len = norm(d);
    d.iter().map(|v| v / len).collect()
}

/// Points `x0 = 0`, `xbar, ybar = x0 +- (s/2) d + t e` with `e` orthogonal to
/// `d`, placed inside the localization radius (0.25 for Holder regimes).
pub fn claims_points(rp: &RegimeParams, s: f64, cfg: &ClaimsConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = rp.dim;
    let d = direction(n);
    let rho = if rp.regime.is_holder() { 0.25 } else { localization_radius(rp, s, cfg) };
    let t = 0.9 * (rho * rho - s * s / 4.0).max(0.0).sqrt();
    let mut e = vec![0.0; n];
    if n > 1 {
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        e[0] = -d[1] / len;
        e[1] = d[0] / len;
    }
    let xbar = (0..n).map(|i| 0.5 * s * d[i] + t * e[i]).collect();
    let ybar = (0..n).map(|i| -0.5 * s * d[i] + t * e[i]).collect();
    (xbar, ybar, vec![0.0; n])
}

pub const SWEEP_SCALES: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Largest admissible drift factor across scales.
pub const DRIFT_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimsSweep {
    pub params: RegimeParams,
    pub rows: Vec<ClaimsReport>,
}

impl ClaimsSweep {
    /// `|ratio1|` at the coarsest scale over its smallest value.
    pub fn ratio1_shrink(&self) -> f64 {
        let first = self.rows[0].ratio1.abs();
        let min = self.rows.iter().map(|r| r.ratio1.abs()).fold(f64::INFINITY, f64::min);
        first / min
    }

    /// Largest value relative to the coarsest scale's magnitude.
    fn growth(values: &[f64]) -> f64 {
        let base = values[0].abs().max(1e-300);
        values.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v / base))
    }

    pub fn ratio2_growth(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.rows.iter().map(|r| r.ratio2).collect();
        v.map(|v| Self::growth(&v))
    }

    pub fn ratio3_growth(&self) -> f64 {
        let v: Vec<f64> = self.rows.iter().map(|r| r.ratio3).collect();
        if v.iter().all(|x| *x == 0.0) {
            return 0.0;
        }
        Self::growth(&v)
    }

    pub fn ratio1_negative(&self) -> bool {
        self.rows.iter().all(|r| r.ratio1 < 0.0)
    }

    /// Sign and drift conditions for all three ratios.
    pub fn passes(&self) -> bool {
        self.ratio1_negative()
            && self.ratio1_shrink() < DRIFT_LIMIT
            && self.ratio2_growth().is_none_or(|g| g < DRIFT_LIMIT)
            && self.ratio3_growth() < DRIFT_LIMIT
    }
}

/// Runs `claims_check` at each scale with the same seed.
pub fn claims_sweep(rp: &RegimeParams, scales: &[f64], cfg: &ClaimsConfig, seed: u64) -> Result<ClaimsSweep> {
    if scales.is_empty() {
        return Err(Error::param("at least one scale is required"));
    }
    let rows = scales
        .iter()
        .map(|&s| {
            let (xbar, ybar, x0) = claims_points(rp, s, cfg);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            claims_check(&xbar, &ybar, &x0, rp, cfg, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClaimsSweep { params: rp.clone(), rows })
}

/// Pair used by `claims_check`, exposed for inspection.
pub fn witness_pair(jm: &JetMatrices, cfg: &ClaimsConfig, seed: u64) -> Result<MatrixPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match cfg.witness {
        Witness::Sampled => feasible_pair_sample(jm, &mut rng),
        Witness::Unperturbed => Ok(unperturbed_pair(jm)),
        Witness::Saturating => Ok(saturating_pair(jm, &mut rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::regimes::{regime_params, RegimeKind};

    #[test]
    fn points_respect_radius() {
        let cfg = ClaimsConfig::default();
        for regime in RegimeKind::ALL {
            let p = if regime.is_large_p() { 6.0 } else { 3.0 };
            let rp = regime_params(regime, p, 3).unwrap();
            for s in SWEEP_SCALES {
                let (xb, yb, x0) = claims_points(&rp, s, &cfg);
                assert!((dist(&xb, &yb) - s).abs() < 1e-12 * s);
                let rho = if regime.is_holder() { 0.25 } else { localization_radius(&rp, s, &cfg) };
                assert!(dist(&xb, &x0) <= rho && dist(&yb, &x0) <= rho);
            }
        }
    }

    #[test]
    fn lipschitz_gradient_bounds_with_x0_at_xbar() {
        let cfg = ClaimsConfig::default();
        let rp = regime_params(RegimeKind::LipschitzSmallP, 3.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s: f64 = 1e-3;
        let xbar = [0.3, 0.1];
        let ybar = [0.3 - s * 0.6, 0.1 - s * 0.8];
        let r = claims_check(&xbar, &ybar, &xbar, &rp, &cfg, &mut rng).unwrap();
        assert!(r.ineqx, "{r:?}");
        assert!(r.qx_norm >= cfg.m / 2.0 && r.qx_norm < cfg.m);
        assert!(r.below_delta_n);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let cfg = ClaimsConfig { witness: Witness::Unperturbed, ..Default::default() };
        let rp = regime_params(RegimeKind::HolderSmallP, 3.0, 1).unwrap();
        let (xb, yb, x0) = claims_points(&rp, 1e-2, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = claims_check(&xb, &yb, &x0, &rp, &cfg, &mut rng).unwrap();
        let (m, p, s) = (cfg.m, 3.0, 1e-2);
        let jm = JetMatrices::build(&[s], m, p, rp.modulus()).unwrap();
        let ht = (jm.d2 + 2.0 * jm.iota * jm.d2 * jm.d2).abs();
        let xx = 2.0 * m + 1.0 - 2.0 * m * ht;
        let lambda = m.powf(p - 2.0) * jm.d1.powf(p - 2.0) * 2.0 * xx;
        assert!((r.ratio1 - lambda / (m.powf(p - 1.0) * s.powf(-rp.tau_hat))).abs() < 1e-12 * r.ratio1.abs());
        assert!(r.ratio1 < 0.0);
        assert!(r.ratio2.is_none());
        // x0 is the midpoint, so q^x = q + M s and q^y = q + M s
        let q = m * jm.d1;
        let gap = ((q + m * s).powf(p - 2.0) - q.powf(p - 2.0)).abs();
        let expect = 2.0 * gap * xx.abs() / (m.powf(p - 1.0) * s.powf(-rp.tau2));
        assert!((r.ratio3 - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn lipschitz_radius_violation() {
        let cfg = ClaimsConfig::default();
        let rp = regime_params(RegimeKind::LipschitzLargeP, 6.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = claims_check(&[0.5, 0.0], &[0.49, 0.0], &[0.0, 0.0], &rp, &cfg, &mut rng);
        assert!(r.is_err());
    }

    #[test]
    fn holder_small_ratio1_is_stable() {
        let rp = regime_params(RegimeKind::HolderSmallP, 3.0, 2).unwrap();
        let sweep = claims_sweep(&rp, &[1e-2, 1e-4], &ClaimsConfig::default(), 11).unwrap();
        let (a, b) = (sweep.rows[0].ratio1, sweep.rows[1].ratio1);
        assert!(a < 0.0 && b < 0.0);
        assert!(a.abs().max(b.abs()) / a.abs().min(b.abs()) < 4.0, "{a} {b}");
    }
}
