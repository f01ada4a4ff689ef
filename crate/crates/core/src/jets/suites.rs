//! Randomized sweeps over the matrix inequalities. Sample `k` draws from its
//! own ChaCha stream, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::report::{num, opt, CsvRow};

use super::claims::{claims_sweep, ClaimsConfig, ClaimsSweep};
use super::matrices::{check_eq_n_epsilon, index_set, prop4_bound_check, Branch, JetMatrices};
use super::modulus::Modulus;
use super::pairs::{feasible_pair_sample, prop5_conclusions_check, saturating_pair, Prop5Report};
use super::regimes::{regime_params_with, ExponentRow, RegimeKind, RegimeOverrides, RegimeParams};
use super::zt::zt_check;

/// Relative slack tolerance for the eigenvalue bounds.
pub const EIGEN_REL_TOL: f64 = 1e-9;
/// Relative slack tolerance for the gradient inequality.
pub const ZT_REL_TOL: f64 = 1e-12;

const MAX_ATTEMPTS: usize = 100_000;

/// The saturating pair stores `(2M+1) I` next to `2M beta w'' xhat xhat^T`;
/// beyond this `|w''|` the identity part is lost to rounding.
const SATURATING_CURVATURE_CAP: f64 = 1e6;

pub(crate) fn stream(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

fn random_unit(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-3 && len <= 1.0 {
            return v.iter().map(|x| x / len).collect();
        }
    }
}

fn log_uniform(lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn modulus_params(modulus: &Modulus) -> (&'static str, f64) {
    match *modulus {
        Modulus::Holder { gamma } => ("gamma", gamma),
        Modulus::Lipschitz { tau, .. } => ("tau", tau),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop4Row {
    pub index: usize,
    pub branch: Branch,
    pub dim: usize,
    pub p: f64,
    pub modulus: Modulus,
    pub eps: Option<f64>,
    pub m: f64,
    pub s: f64,
    pub rayleigh: f64,
    pub lambda_min: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

impl CsvRow for Prop4Row {
    fn header() -> Vec<&'static str> {
        vec![
            "index", "branch", "dim", "p", "modulus", "modulus_param", "eps", "m", "norm_x",
            "rayleigh", "lambda_min", "bound", "slack", "pass",
        ]
    }

    fn record(&self) -> Vec<String> {
        let (_, param) = modulus_params(&self.modulus);
        vec![
            self.index.to_string(),
            self.branch.name().to_string(),
            self.dim.to_string(),
            num(self.p),
            self.modulus.name().to_string(),
            num(param),
            opt(self.eps),
            num(self.m),
            num(self.s),
            num(self.rayleigh),
            num(self.lambda_min),
            num(self.bound),
            num(self.slack),
            self.pass.to_string(),
        ]
    }
}

fn random_modulus(rng: &mut impl Rng) -> Modulus {
    if rng.gen_bool(0.5) {
        Modulus::Holder { gamma: rng.gen_range(0.1..0.9) }
    } else {
        let tau = rng.gen_range(0.05..0.5);
        Modulus::Lipschitz { tau, omega0: 1.0 / (2.0 * (1.0 + tau)) }
    }
}

/// Draws an admissible configuration for the branch. One sample in ten sits
/// at `p = 4`, where the row for the other branch is produced as well.
fn prop4_sample(branch: Branch, rng: &mut impl Rng) -> Result<(JetMatrices, Option<f64>)> {
    for _ in 0..MAX_ATTEMPTS {
        let dim = rng.gen_range(1..=3);
        let p = if rng.gen_bool(0.1) {
            4.0
        } else {
            match branch {
                Branch::SmallP => rng.gen_range(2.05..=4.0),
                Branch::LargeP => rng.gen_range(4.0..=8.0),
            }
        };
        let modulus = random_modulus(rng);
        let m = rng.gen_range(2.0..100.0);
        let dir = random_unit(dim, rng);
        let eps = match (branch, modulus) {
            (Branch::SmallP, _) if p < 4.0 => None,
            (_, Modulus::Holder { .. }) => Some(rng.gen_range(0.05..0.5)),
            (_, Modulus::Lipschitz { tau, .. }) => Some(rng.gen_range(0.6 * tau..0.5f64.max(1.2 * tau))),
        };
        let lo = match modulus {
            Modulus::Holder { .. } => 1e-30,
            Modulus::Lipschitz { .. } => 1e-15,
        };
        let s = log_uniform(lo, 0.9, rng);
        let x: Vec<f64> = dir.iter().map(|d| d * s).collect();
        let jm = JetMatrices::build(&x, m, p, modulus)?;
        if let Some(eps) = eps {
            if index_set(&x, eps).is_empty() || !check_eq_n_epsilon(&jm, eps) {
                continue;
            }
        }
        return Ok((jm, eps));
    }
    Err(Error::pre("no admissible sample found"))
}

fn prop4_row(index: usize, jm: &JetMatrices, branch: Branch, eps: Option<f64>) -> Result<Prop4Row> {
    let check = prop4_bound_check(jm, branch, eps)?;
    Ok(Prop4Row {
        index,
        branch,
        dim: jm.dim(),
        p: jm.p,
        modulus: jm.modulus,
        eps,
        m: jm.m,
        s: jm.s,
        rayleigh: check.rayleigh,
        lambda_min: check.lambda_min,
        bound: check.bound,
        slack: check.slack,
        pass: check.holds(EIGEN_REL_TOL),
    })
}

/// `samples` draws for the branch; `p = 4` draws also yield a row for the
/// other branch.
pub fn prop4_suite(branch: Branch, samples: usize, seed: u64) -> Result<Vec<Prop4Row>> {
    let salt = match branch {
        Branch::SmallP => 0,
        Branch::LargeP => 1 << 32,
    };
    let rows: Vec<Vec<Prop4Row>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, salt + k);
            let (jm, eps) = prop4_sample(branch, &mut rng)?;
            let mut out = vec![prop4_row(k, &jm, branch, eps)?];
            if jm.p == 4.0 {
                let other = match branch {
                    Branch::SmallP => Branch::LargeP,
                    Branch::LargeP => Branch::SmallP,
                };
                if other == Branch::SmallP || eps.is_some() {
                    out.push(prop4_row(k, &jm, other, eps)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop5Row {
    pub index: usize,
    pub params: RegimeParams,
    /// Witness tight along `(xhat, -xhat)` instead of the sampled pair.
    pub saturating: bool,
    pub m: f64,
    pub s: f64,
    pub report: Prop5Report,
    pub pass: bool,
}

impl CsvRow for Prop5Row {
    fn header() -> Vec<&'static str> {
        vec![
            "index", "regime", "witness", "dim", "p", "gamma", "tau", "eps", "m", "norm_x",
            "upper_slack", "lower_slack", "all_eig_value", "all_eig_bound",
            "smallest_value", "smallest_bound_p_leq_4", "smallest_bound_p_geq_4",
            "majnorm_value", "majnorm_bound", "pass",
        ]
    }

    fn record(&self) -> Vec<String> {
        let r = &self.report;
        let smallest = r
            .smallest_small_p
            .as_ref()
            .or(r.smallest_large_p.as_ref())
            .map(|c| c.value);
        vec![
            self.index.to_string(),
            self.params.regime.name().to_string(),
            if self.saturating { "saturating" } else { "sampled" }.to_string(),
            self.params.dim.to_string(),
            num(self.params.p),
            num(self.params.gamma),
            opt(self.params.tau),
            opt(self.params.eps),
            num(self.m),
            num(self.s),
            num(r.feasibility.upper_slack),
            num(r.feasibility.lower_slack),
            num(r.all_eigenvalues.value),
            num(r.all_eigenvalues.bound),
            opt(smallest),
            opt(r.smallest_small_p.as_ref().map(|c| c.bound)),
            opt(r.smallest_large_p.as_ref().map(|c| c.bound)),
            num(r.majnorm.value),
            num(r.majnorm.bound),
            self.pass.to_string(),
        ]
    }
}

fn random_regime_params(regime: RegimeKind, rng: &mut impl Rng) -> Result<RegimeParams> {
    let dim = rng.gen_range(1..=3);
    let p = if regime.is_large_p() { rng.gen_range(4.1..=8.0) } else { rng.gen_range(2.05..=4.0) };
    let ov = if regime.is_holder() {
        RegimeOverrides { gamma: Some(rng.gen_range(0.1..0.9)), ..Default::default() }
    } else {
        RegimeOverrides::default()
    };
    regime_params_with(regime, p, dim, ov)
}

/// Feasible pairs at points down to the regime's `delta_n` scale, cycling
/// through the four regimes. Small-p regimes alternate sampled and
/// saturating witnesses.
pub fn prop5_suite(samples: usize, seed: u64) -> Result<Vec<Prop5Row>> {
    (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, (2 << 32) + k);
            let regime = RegimeKind::ALL[k % 4];
            let saturating = !regime.is_large_p() && (k / 4) % 2 == 1;
            for _ in 0..MAX_ATTEMPTS {
                let rp = random_regime_params(regime, &mut rng)?;
                let m = rng.gen_range(2.0..100.0);
                let hi = 0.9f64.min(rp.modulus().validity() * 0.9);
                let lo = (rp.delta_n * 1e-8).max(1e-300).min(hi * 1e-3);
                let s = log_uniform(lo, hi, &mut rng);
                let x: Vec<f64> = random_unit(rp.dim, &mut rng).iter().map(|d| d * s).collect();
                let jm = JetMatrices::build(&x, m, rp.p, rp.modulus())?;
                if saturating && jm.d2.abs() > SATURATING_CURVATURE_CAP {
                    continue;
                }
                if let Some(eps) = rp.eps {
                    if index_set(&x, eps).is_empty() || !check_eq_n_epsilon(&jm, eps) {
                        continue;
                    }
                }
                let pair = if saturating {
                    saturating_pair(&jm, &mut rng)
                } else {
                    feasible_pair_sample(&jm, &mut rng)?
                };
                let report = prop5_conclusions_check(&pair, &jm, rp.eps)?;
                let pass = report.feasibility.feasible() && report.all_hold(EIGEN_REL_TOL);
                return Ok(Prop5Row { index: k, params: rp, saturating, m, s, report, pass });
            }
            Err(Error::pre(format!("no admissible sample found for {regime}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZtRow {
    pub index: usize,
    pub dim: usize,
    pub p: f64,
    pub theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl CsvRow for ZtRow {
    fn header() -> Vec<&'static str> {
        vec!["index", "dim", "p", "theta", "lhs", "rhs", "slack", "pass"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.index.to_string(),
            self.dim.to_string(),
            num(self.p),
            num(self.theta),
            num(self.lhs),
            num(self.rhs),
            num(self.rhs - self.lhs),
            self.pass.to_string(),
        ]
    }
}

/// Random `Z, T` with mixed magnitudes, including near-equal and opposite pairs.
pub fn zt_suite(samples: usize, seed: u64) -> Result<Vec<ZtRow>> {
    (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, (3 << 32) + k);
            let dim = rng.gen_range(1..=3);
            let p = rng.gen_range(2.0..=8.0f64).max(2.01);
            let theta = rng.gen_range(0.0..=1f64.min(p - 2.0)).max(1e-3);
            let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
            let z: Vec<f64> = (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
            let t: Vec<f64> = match k % 4 {
                0 => z.iter().map(|v| v * (1.0 + 1e-6 * rng.gen_range(-1.0..1.0))).collect(),
                1 => z.iter().map(|v| -v).collect(),
                _ => {
                    let other = 10f64.powf(rng.gen_range(-3.0..3.0));
                    (0..dim).map(|_| other * rng.gen_range(-1.0..1.0)).collect()
                }
            };
            let r = zt_check(&z, &t, theta, p)?;
            Ok(ZtRow { index: k, dim, p, theta, lhs: r.lhs, rhs: r.rhs, pass: r.holds(ZT_REL_TOL) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimsRow {
    pub params: RegimeParams,
    pub s: f64,
    pub ratio1: f64,
    pub ratio2: Option<f64>,
    pub ratio3: f64,
    pub ineqx: bool,
    pub below_delta_n: bool,
}

impl CsvRow for ClaimsRow {
    fn header() -> Vec<&'static str> {
        vec![
            "regime", "dim", "p", "gamma", "tau", "eps", "delta_n", "tau_hat", "tau1", "tau2",
            "scale", "ratio1", "ratio2", "ratio3", "ineqx", "below_delta_n",
        ]
    }

    fn record(&self) -> Vec<String> {
        let rp = &self.params;
        vec![
            rp.regime.name().to_string(),
            rp.dim.to_string(),
            num(rp.p),
            num(rp.gamma),
            opt(rp.tau),
            opt(rp.eps),
            num(rp.delta_n),
            num(rp.tau_hat),
            num(rp.tau1),
            num(rp.tau2),
            num(self.s),
            num(self.ratio1),
            opt(self.ratio2),
            num(self.ratio3),
            self.ineqx.to_string(),
            self.below_delta_n.to_string(),
        ]
    }
}

impl CsvRow for ExponentRow {
    fn header() -> Vec<&'static str> {
        vec!["regime", "p", "gamma", "tau_hat", "tau1", "tau2", "ordered"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.regime.name().to_string(),
            num(self.p),
            num(self.gamma),
            num(self.tau_hat),
            num(self.tau1),
            num(self.tau2),
            self.ordered.to_string(),
        ]
    }
}

/// Default `p` for each regime in the claims sweep.
pub fn default_claims_p(regime: RegimeKind) -> f64 {
    match regime {
        RegimeKind::HolderSmallP | RegimeKind::LipschitzSmallP => 3.0,
        RegimeKind::HolderLargeP => 5.0,
        RegimeKind::LipschitzLargeP => 6.0,
    }
}

/// One sweep per regime at its default parameters.
pub fn claims_suite(
    dim: usize,
    scales: &[f64],
    cfg: &ClaimsConfig,
    seed: u64,
) -> Result<Vec<ClaimsSweep>> {
    RegimeKind::ALL
        .iter()
        .map(|&regime| {
            let rp = regime_params_with(regime, default_claims_p(regime), dim, RegimeOverrides::default())?;
            claims_sweep(&rp, scales, cfg, seed)
        })
        .collect()
}

pub fn claims_rows(sweeps: &[ClaimsSweep]) -> Vec<ClaimsRow> {
    sweeps
        .iter()
        .flat_map(|sw| {
            sw.rows.iter().map(move |r| ClaimsRow {
                params: sw.params.clone(),
                s: r.s,
                ratio1: r.ratio1,
                ratio2: r.ratio2,
                ratio3: r.ratio3,
                ineqx: r.ineqx,
                below_delta_n: r.below_delta_n,
            })
        })
        .collect()
}
