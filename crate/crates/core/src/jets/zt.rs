use crate::error::{Error, Result};

use super::matrices::norm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZtSlack {
    /// `||Z|^{p-2} - |T|^{p-2}|`.
    pub lhs: f64,
    /// `max(1, p-2) |Z-T|^theta (|Z| + |T|)^{p-2-theta}`.
    pub rhs: f64,
}

impl ZtSlack {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self, rel: f64) -> bool {
        self.slack() >= -rel * self.rhs.abs()
    }
}

pub fn zt_check(z: &[f64], t: &[f64], theta: f64, p: f64) -> Result<ZtSlack> {
    crate::operator::check_exponent(p)?;
    if z.len() != t.len() {
        return Err(Error::param("Z and T must have the same length"));
    }
    let cap = 1f64.min(p - 2.0);
    if !(theta > 0.0 && theta <= cap) {
        return Err(Error::param(format!("theta must lie in (0, {cap}], got {theta}")));
    }
    let (nz, nt) = (norm(z), norm(t));
    let diff: Vec<f64> = z.iter().zip(t).map(|(a, b)| a - b).collect();
    let lhs = (nz.powf(p - 2.0) - nt.powf(p - 2.0)).abs();
    let rhs = 1f64.max(p - 2.0) * norm(&diff).powf(theta) * (nz + nt).powf(p - 2.0 - theta);
    Ok(ZtSlack { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities() {
        let r = zt_check(&[0.3, -1.0], &[0.3, -1.0], 0.5, 3.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.slack(), r.rhs);
        let r = zt_check(&[0.3, -1.0], &[-0.3, 1.0], 1.0, 5.0).unwrap();
        assert!(r.lhs.abs() < 1e-15 && r.rhs > 0.0);
    }

    #[test]
    fn scalar_value() {
        // p = 3, theta = 1: ||z| - |t|| <= |z - t|
        let r = zt_check(&[2.0], &[0.5], 1.0, 3.0).unwrap();
        assert_eq!((r.lhs, r.rhs), (1.5, 1.5));
    }

    #[test]
    fn theta_range() {
        assert!(zt_check(&[1.0], &[2.0], 0.0, 3.0).is_err());
        assert!(zt_check(&[1.0], &[2.0], 0.6, 2.5).is_err());
        assert!(zt_check(&[1.0], &[2.0], 0.5, 2.5).is_ok());
        assert!(zt_check(&[1.0], &[2.0], 1.2, 6.0).is_err());
        assert!(zt_check(&[1.0], &[2.0, 1.0], 0.5, 3.0).is_err());
    }
}
