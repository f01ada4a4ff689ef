use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::modulus::Modulus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeKind {
    HolderSmallP,
    HolderLargeP,
    LipschitzSmallP,
    LipschitzLargeP,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 4] = [
        RegimeKind::HolderSmallP,
        RegimeKind::HolderLargeP,
        RegimeKind::LipschitzSmallP,
        RegimeKind::LipschitzLargeP,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RegimeKind::HolderSmallP => "holder_small_p",
            RegimeKind::HolderLargeP => "holder_large_p",
            RegimeKind::LipschitzSmallP => "lipschitz_small_p",
            RegimeKind::LipschitzLargeP => "lipschitz_large_p",
        }
    }

    pub fn is_holder(&self) -> bool {
        matches!(self, RegimeKind::HolderSmallP | RegimeKind::HolderLargeP)
    }

    pub fn is_large_p(&self) -> bool {
        matches!(self, RegimeKind::HolderLargeP | RegimeKind::LipschitzLargeP)
    }

    /// Small-p regimes accept `2 < p <= 4`, large-p regimes `p > 4`.
    pub fn admits(&self, p: f64) -> bool {
        if self.is_large_p() {
            p > 4.0 && p.is_finite()
        } else {
            p > 2.0 && p <= 4.0
        }
    }

    /// Default Holder exponent when none is supplied.
    pub fn default_gamma(&self) -> Option<f64> {
        match self {
            RegimeKind::HolderSmallP => Some(0.5),
            RegimeKind::HolderLargeP => Some(0.9),
            _ => None,
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegimeKind::ALL
            .into_iter()
            .find(|r| r.name() == s.trim())
            .ok_or_else(|| Error::param(format!("unknown regime '{s}'")))
    }
}

/// Optional replacements for the default parameter choices.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RegimeOverrides {
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub eps: Option<f64>,
    pub omega0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeParams {
    pub regime: RegimeKind,
    pub p: f64,
    pub dim: usize,
    pub gamma: f64,
    /// Lipschitz regimes only.
    pub tau: Option<f64>,
    pub omega0: Option<f64>,
    /// Large-p regimes only.
    pub eps: Option<f64>,
    pub delta_n: f64,
    pub tau_hat: f64,
    pub tau1: f64,
    pub tau2: f64,
}

/// Safety factor applied to `delta_n` when choosing test scales.
pub const DELTA_SAFETY: f64 = 0.5;

impl RegimeParams {
    pub fn modulus(&self) -> Modulus {
        match (self.tau, self.omega0) {
            (Some(tau), Some(omega0)) => Modulus::Lipschitz { tau, omega0 },
            _ => Modulus::Holder { gamma: self.gamma },
        }
    }

    /// `DELTA_SAFETY * delta_n`.
    pub fn delta(&self) -> f64 {
        DELTA_SAFETY * self.delta_n
    }

    pub fn orderings_hold(&self) -> bool {
        self.tau1 < self.tau_hat && self.tau2 < self.tau_hat && self.tau_hat > 0.0
    }
}

fn small_p_cap(p: f64) -> f64 {
    0.5f64.min((p - 2.0) / 2.0)
}

fn in_open(v: f64, lo: f64, hi: f64) -> bool {
    v > lo && v < hi
}

pub fn regime_params(regime: RegimeKind, p: f64, dim: usize) -> Result<RegimeParams> {
    regime_params_with(regime, p, dim, RegimeOverrides::default())
}

pub fn regime_params_with(
    regime: RegimeKind,
    p: f64,
    dim: usize,
    ov: RegimeOverrides,
) -> Result<RegimeParams> {
    if !regime.admits(p) {
        let range = if regime.is_large_p() { "p > 4" } else { "2 < p <= 4" };
        return Err(Error::param(format!("{regime} requires {range}, got p = {p}")));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::param(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    let n = dim as f64;
    match regime {
        RegimeKind::HolderSmallP | RegimeKind::HolderLargeP => {
            if ov.tau.is_some() || ov.omega0.is_some() || ov.eps.is_some() {
                return Err(Error::param(format!("{regime} only accepts a gamma override")));
            }
            let gamma = ov.gamma.or(regime.default_gamma()).unwrap();
            if !in_open(gamma, 0.0, 1.0) {
                return Err(Error::param(format!("gamma must lie in (0, 1), got {gamma}")));
            }
            let tau1 = (1.0 - gamma) * (p - 2.0);
            if regime == RegimeKind::HolderSmallP {
                Ok(RegimeParams {
                    regime,
                    p,
                    dim,
                    gamma,
                    tau: None,
                    omega0: None,
                    eps: None,
                    delta_n: (gamma / 8.0).powf(1.0 / (1.0 - gamma)),
                    tau_hat: tau1 + 2.0 - gamma,
                    tau1,
                    tau2: (1.0 - gamma) * (p - 3.0).max(0.0) + 2.0 - gamma,
                })
            } else {
                let eps = (1.0 - gamma) / (2.0 * (p - 4.0));
                let delta_n =
                    ((-(2.0 * n * (4.0 - gamma)).ln() + (1.0 - gamma).ln()) / (2.0 * eps)).exp();
                Ok(RegimeParams {
                    regime,
                    p,
                    dim,
                    gamma,
                    tau: None,
                    omega0: None,
                    eps: Some(eps),
                    delta_n,
                    tau_hat: tau1 + 2.0 - gamma - (p - 4.0) * eps,
                    tau1,
                    tau2: (1.0 - gamma) * (p - 3.0) + 2.0 - gamma,
                })
            }
        }
        RegimeKind::LipschitzSmallP => {
            if ov.eps.is_some() {
                return Err(Error::param(format!("{regime} has no eps parameter")));
            }
            let cap = small_p_cap(p);
            let tau = ov.tau.unwrap_or(cap / 2.0);
            if !in_open(tau, 0.0, cap) {
                return Err(Error::param(format!("tau must lie in (0, {cap}), got {tau}")));
            }
            let gamma = ov.gamma.unwrap_or((1.0 + tau / cap) / 2.0);
            if !in_open(gamma, tau / cap, 1.0) {
                return Err(Error::param(format!(
                    "gamma must lie in ({}, 1), got {gamma}",
                    tau / cap
                )));
            }
            let modulus = Modulus::lipschitz(tau, ov.omega0)?;
            let Modulus::Lipschitz { omega0, .. } = modulus else { unreachable!() };
            Ok(RegimeParams {
                regime,
                p,
                dim,
                gamma,
                tau: Some(tau),
                omega0: Some(omega0),
                eps: None,
                delta_n: (1.0 / (2.0 * omega0 * (1.0 + tau))).powf(1.0 / tau),
                tau_hat: 1.0 - tau,
                tau1: 0.0,
                tau2: 1.0 - 1f64.min(p - 2.0) * gamma / 2.0,
            })
        }
        RegimeKind::LipschitzLargeP => {
            let tau = ov.tau.unwrap_or(1.0 / (2.0 * (p - 2.0)));
            if !in_open(tau, 0.0, 1.0 / (p - 2.0)) {
                return Err(Error::param(format!(
                    "tau must lie in (0, {}), got {tau}",
                    1.0 / (p - 2.0)
                )));
            }
            let gamma = ov.gamma.unwrap_or(0.75f64.max((1.0 + tau * (p - 2.0)) / 2.0));
            if !in_open(gamma, tau * (p - 2.0), 1.0) {
                return Err(Error::param(format!(
                    "gamma must lie in ({}, 1), got {gamma}",
                    tau * (p - 2.0)
                )));
            }
            let (lo, hi) = (tau / 2.0, (gamma / 2.0 - tau) / (p - 4.0));
            let eps = ov.eps.unwrap_or((lo + hi) / 2.0);
            if !in_open(eps, lo, hi) {
                return Err(Error::param(format!("eps must lie in ({lo}, {hi}), got {eps}")));
            }
            let modulus = Modulus::lipschitz(tau, ov.omega0)?;
            let Modulus::Lipschitz { omega0, .. } = modulus else { unreachable!() };
            let k = omega0 * tau * (1.0 + tau);
            let first = (((k).ln() - (2.0 * n * (k + 3.0)).ln()) / (2.0 * eps - tau)).exp();
            let second = (-(2.0 * omega0 * (1.0 + tau)).ln() / tau).exp();
            Ok(RegimeParams {
                regime,
                p,
                dim,
                gamma,
                tau: Some(tau),
                omega0: Some(omega0),
                eps: Some(eps),
                delta_n: first.min(second),
                tau_hat: 1.0 - tau - (p - 4.0) * eps,
                tau1: 0.0,
                tau2: 1.0 - gamma / 2.0,
            })
        }
    }
}

/// One row of an exponent sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentRow {
    pub regime: RegimeKind,
    pub p: f64,
    pub gamma: f64,
    pub tau_hat: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub ordered: bool,
}

/// Evaluates the exponents over a grid of admissible `(p, gamma)` pairs.
/// Lipschitz regimes sweep `gamma` over its admissible interval with the
/// remaining parameters at their defaults.
pub fn exponent_sweep(p_steps: usize, gamma_steps: usize) -> Vec<ExponentRow> {
    let mut rows = Vec::new();
    for regime in RegimeKind::ALL {
        let (p_lo, p_hi) = if regime.is_large_p() { (4.0, 8.0) } else { (2.0, 4.0) };
        for i in 1..=p_steps {
            let p = p_lo + (p_hi - p_lo) * i as f64 / p_steps as f64;
            let p = if regime.is_large_p() { p } else { p.min(4.0) };
            let base = match regime_params(regime, p, 2) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let g_lo = match regime {
                RegimeKind::LipschitzSmallP => base.tau.unwrap() / small_p_cap(p),
                RegimeKind::LipschitzLargeP => base.tau.unwrap() * (p - 2.0),
                _ => 0.0,
            };
            for j in 1..gamma_steps {
                let gamma = g_lo + (1.0 - g_lo) * j as f64 / gamma_steps as f64;
                let ov = RegimeOverrides { gamma: Some(gamma), ..Default::default() };
                if let Ok(rp) = regime_params_with(regime, p, 2, ov) {
                    rows.push(ExponentRow {
                        regime,
                        p,
                        gamma,
                        tau_hat: rp.tau_hat,
                        tau1: rp.tau1,
                        tau2: rp.tau2,
                        ordered: rp.orderings_hold(),
                    });
                }
            }
        }
    }
    rows
}
