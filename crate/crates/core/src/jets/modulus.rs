use crate::error::{Error, Result};

/// Modulus of continuity `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulus {
    /// `omega(s) = s^gamma`.
    Holder { gamma: f64 },
    /// `omega(s) = s - omega0 s^{1+tau}`, valid for `s < s0`.
    Lipschitz { tau: f64, omega0: f64 },
}

impl Modulus {
    pub fn holder(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        Ok(Modulus::Holder { gamma })
    }

    /// `omega0` defaults to `1 / (2 (1 + tau))`, which gives `s0 = 2^{1/tau}`.
    pub fn lipschitz(tau: f64, omega0: Option<f64>) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param(format!("tau must be positive, got {tau}")));
        }
        let omega0 = omega0.unwrap_or(1.0 / (2.0 * (1.0 + tau)));
        if !(omega0 > 0.0 && (1.0 + tau) * omega0 < 1.0) {
            return Err(Error::param(format!(
                "omega0 must satisfy 0 < (1 + tau) omega0 < 1, got omega0 = {omega0}"
            )));
        }
        Ok(Modulus::Lipschitz { tau, omega0 })
    }

    /// Upper end of the range where `omega' > 0`.
    pub fn validity(&self) -> f64 {
        match *self {
            Modulus::Holder { .. } => f64::INFINITY,
            Modulus::Lipschitz { tau, omega0 } => (1.0 / ((1.0 + tau) * omega0)).powf(1.0 / tau),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Modulus::Holder { gamma } => s.powf(gamma),
            Modulus::Lipschitz { tau, omega0 } => s - omega0 * s.powf(1.0 + tau),
        }
    }

    pub fn d1(&self, s: f64) -> f64 {
        match *self {
            Modulus::Holder { gamma } => gamma * s.powf(gamma - 1.0),
            Modulus::Lipschitz { tau, omega0 } => 1.0 - omega0 * (1.0 + tau) * s.powf(tau),
        }
    }

    pub fn d2(&self, s: f64) -> f64 {
        match *self {
            Modulus::Holder { gamma } => gamma * (gamma - 1.0) * s.powf(gamma - 2.0),
            Modulus::Lipschitz { tau, omega0 } => -omega0 * (1.0 + tau) * tau * s.powf(tau - 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Modulus::Holder { .. } => "holder",
            Modulus::Lipschitz { .. } => "lipschitz",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holder_values() {
        let m = Modulus::holder(0.5).unwrap();
        assert_eq!(m.value(0.0), 0.0);
        assert!((m.d2(0.5) + 0.25 * 0.5f64.powf(-1.5)).abs() < 1e-15);
        assert!((m.d2(0.5) + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(Modulus::holder(1.0).is_err());
        assert!(Modulus::holder(0.0).is_err());
    }

    #[test]
    fn lipschitz_shape() {
        let m = Modulus::lipschitz(0.25, None).unwrap();
        assert!((m.validity() - 16.0).abs() < 1e-12);
        assert_eq!(m.value(0.0), 0.0);
        for k in 1..100 {
            let s = k as f64 / 100.0;
            assert!(m.value(s) > 0.0 && m.d1(s) > 0.0 && m.d2(s) < 0.0);
            assert!(m.d1(s) >= 0.5 && m.d1(s) < 1.0);
        }
        assert!(Modulus::lipschitz(0.5, Some(0.7)).is_err());
        assert!(Modulus::lipschitz(-0.1, None).is_err());
    }

    #[test]
    fn derivatives_match_differences() {
        for m in [Modulus::holder(0.3).unwrap(), Modulus::lipschitz(0.4, Some(0.5)).unwrap()] {
            for s in [0.05, 0.3, 0.8] {
                let h = 1e-5 * s;
                let d1 = (m.value(s + h) - m.value(s - h)) / (2.0 * h);
                let d2 = (m.d1(s + h) - m.d1(s - h)) / (2.0 * h);
                assert!((d1 - m.d1(s)).abs() < 1e-7 * m.d1(s).abs(), "{}", m.name());
                assert!((d2 - m.d2(s)).abs() < 1e-6 * m.d2(s).abs(), "{}", m.name());
            }
        }
    }
}
