//! The regularized delta `delta_eta` and the family `h_j(tau) = tau^j / j!`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gaussian approximate identity of width `eta`: standard deviation `eta / 2`,
/// so the profile is below 1e-12 (relative to its peak) beyond `5 eta`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Mollifier {
    pub eta: f64,
}

impl Mollifier {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("mollifier width must be positive, got {eta}")));
        }
        Ok(Self { eta })
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        0.5 * self.eta
    }

    /// Radius beyond which the profile is treated as zero.
    pub fn support_radius(&self) -> f64 {
        5.0 * self.eta
    }

    #[inline]
    pub fn delta(&self, tau: f64) -> f64 {
        let s = self.sigma();
        let z = tau / s;
        (-0.5 * z * z).exp() / (s * (2.0 * PI).sqrt())
    }

    #[inline]
    pub fn delta_prime(&self, tau: f64) -> f64 {
        let s = self.sigma();
        -tau / (s * s) * self.delta(tau)
    }

    /// Mollified Heaviside `(delta_eta * h_0)(tau)`.
    #[inline]
    pub fn step(&self, tau: f64) -> f64 {
        normal_cdf(tau / self.sigma())
    }

    /// Mollified ramp `(delta_eta * h_1)(tau)`.
    #[inline]
    pub fn ramp(&self, tau: f64) -> f64 {
        let s = self.sigma();
        let z = tau / s;
        tau * normal_cdf(z) + s * normal_pdf(z)
    }

    /// `(delta_eta * h_j)(tau)` for `j` in {-1, 0, 1}.
    pub fn h(&self, j: i32, tau: f64) -> Result<f64> {
        match j {
            -1 => Ok(self.delta(tau)),
            0 => Ok(self.step(tau)),
            1 => Ok(self.ramp(tau)),
            _ => Err(Error::UnsupportedOrder(j.max(0) as usize)),
        }
    }

    /// Nodes and weights for averaging against the profile, i.e.
    /// `int f(tau) delta_eta(tau) dtau ~ sum_i w_i f(tau_i)`, scaled by `spread`
    /// (use `spread = 1/sqrt 2` for the half-sum of two independent draws).
    pub fn averaging_rule(&self, spread: f64) -> Vec<(f64, f64)> {
        // Trapezoid in the standard normal variable on [-8, 8]; spectrally
        // accurate for smooth integrands.
        let n = 33;
        let dz = 16.0 / (n - 1) as f64;
        let mut rule: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let z = -8.0 + i as f64 * dz;
                (z * self.sigma() * spread, normal_pdf(z) * dz)
            })
            .collect();
        let total: f64 = rule.iter().map(|r| r.1).sum();
        for r in &mut rule {
            r.1 /= total;
        }
        rule
    }
}

#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `h_j(tau) = tau^j / j!` for `tau > 0`, else 0; `j = -1` is the delta and
/// must be evaluated through a [`Mollifier`].
pub fn h(j: i32, tau: f64) -> Result<f64> {
    if j < 0 {
        return Err(Error::InvalidHOrder(j));
    }
    if tau <= 0.0 {
        return Ok(0.0);
    }
    let mut v = 1.0;
    for i in 1..=j {
        v *= tau / i as f64;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_has_unit_mass_and_short_tail() {
        let m = Mollifier::new(0.075).unwrap();
        let n = 200_000;
        let a = 10.0 * m.eta;
        let d = 2.0 * a / n as f64;
        let mass: f64 = (0..=n).map(|i| m.delta(-a + i as f64 * d) * d).sum::<f64>()
            - 0.5 * d * (m.delta(-a) + m.delta(a));
        assert!((mass - 1.0).abs() < 1e-8);
        assert!(m.delta(5.0 * m.eta) < 1e-12 * m.delta(0.0));
        assert!(m.delta(10.0 * m.eta) < 1e-12);
    }

    #[test]
    fn mollified_h_matches_numerical_convolution() {
        let m = Mollifier::new(0.1).unwrap();
        for &tau in &[-0.2, -0.03, 0.0, 0.04, 0.3] {
            let n = 40_000;
            let a = 8.0 * m.eta;
            let d = 2.0 * a / n as f64;
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for i in 0..n {
                let r = -a + (i as f64 + 0.5) * d;
                let w = m.delta(r) * d;
                s0 += w * h(0, tau - r).unwrap();
                s1 += w * h(1, tau - r).unwrap();
            }
            assert!((s0 - m.step(tau)).abs() < 1e-6, "step at {tau}");
            assert!((s1 - m.ramp(tau)).abs() < 1e-7, "ramp at {tau}");
        }
    }

    #[test]
    fn h_values() {
        assert_eq!(h(0, 1.0).unwrap(), 1.0);
        assert_eq!(h(2, 2.0).unwrap(), 2.0);
        for j in 0..5 {
            assert_eq!(h(j, 0.0).unwrap(), 0.0);
            assert_eq!(h(j, -0.3).unwrap(), 0.0);
        }
        assert!(matches!(h(-1, 0.5), Err(Error::InvalidHOrder(-1))));
        assert!(matches!(h(-2, 0.5), Err(Error::InvalidHOrder(-2))));
    }

    #[test]
    fn h_chain_second_order() {
        for j in 2..5 {
            let tau = 0.7;
            let mut errs = Vec::new();
            for &d in &[1e-2, 5e-3] {
                let fd = (h(j, tau + d).unwrap() - h(j, tau - d).unwrap()) / (2.0 * d);
                errs.push((fd - h(j - 1, tau).unwrap()).abs());
            }
            let order = (errs[0] / errs[1]).log2();
            assert!((order - 2.0).abs() < 0.1 || errs[0] < 1e-13, "j={j} order={order}");
        }
    }

    #[test]
    fn averaging_rule_moments() {
        let m = Mollifier::new(0.2).unwrap();
        let rule = m.averaging_rule(1.0);
        let mean: f64 = rule.iter().map(|(x, w)| x * w).sum();
        let var: f64 = rule.iter().map(|(x, w)| x * x * w).sum();
        assert!(mean.abs() < 1e-15);
        assert!((var - m.sigma() * m.sigma()).abs() < 1e-12);
    }
}
