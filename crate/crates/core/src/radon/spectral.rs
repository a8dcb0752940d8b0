//! Spectral differentiation on uniform 1-D grids.
//!
//! Fourier convention: `g^(xi) = int g(sigma) exp(-i sigma xi) d sigma`,
//! discretized as `step * DFT` with frequencies `xi_k = 2 pi k / (N step)` for
//! signed `k` (the Nyquist bin counts as positive).

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Signed continuous frequency of DFT bin `k` out of `n` at spacing `step`.
#[inline]
pub fn frequency(k: usize, n: usize, step: f64) -> f64 {
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * std::f64::consts::PI * signed / (n as f64 * step)
}

/// Raised-cosine taper: 1 below `start * nyquist`, falling to 0 at Nyquist.
#[inline]
pub fn rolloff(xi: f64, nyquist: f64, start: f64) -> f64 {
    let a = xi.abs() / nyquist;
    if a <= start {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (a - start) / (1.0 - start)).cos())
    }
}

/// Applies the multiplier `(i xi)^order * taper(xi)` to real rows.
///
/// Rows are zero-padded to a power of two at least twice their length, so a
/// row that decays at both ends is not wrapped onto itself.
pub struct SpectralDerivative {
    pub order: u32,
    /// Fraction of Nyquist where the taper starts; `None` disables it.
    pub taper_start: Option<f64>,
}

impl SpectralDerivative {
    pub fn new(order: u32, taper_start: Option<f64>) -> Self {
        Self { order, taper_start }
    }

    /// Derivative of one row sampled at spacing `step`.
    pub fn apply(&self, row: &[f64], step: f64) -> Vec<f64> {
        let mut planner = FftPlanner::new();
        self.apply_with(&mut planner, row, step)
    }

    pub fn apply_with(&self, planner: &mut FftPlanner<f64>, row: &[f64], step: f64) -> Vec<f64> {
        let n = row.len();
        if n == 0 {
            return Vec::new();
        }
        let m = (2 * n).next_power_of_two();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(m, Complex64::new(0.0, 0.0));
        fwd.process(&mut buf);
        let nyquist = std::f64::consts::PI / step;
        for (k, c) in buf.iter_mut().enumerate() {
            let mut xi = frequency(k, m, step);
            if m.is_multiple_of(2) && k == m / 2 && self.order % 2 == 1 {
                // The Nyquist mode of a real signal has no odd derivative.
                xi = 0.0;
            }
            let taper = self.taper_start.map_or(1.0, |s| rolloff(xi, nyquist, s));
            *c *= i_pow(self.order) * xi.powi(self.order as i32) * taper / m as f64;
        }
        inv.process(&mut buf);
        buf.truncate(n);
        buf.into_iter().map(|c| c.re).collect()
    }
}

fn i_pow(order: u32) -> Complex64 {
    match order % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_gaussian() {
        let step = 0.05;
        let n = 241;
        let xs: Vec<f64> = (0..n).map(|i| -6.0 + i as f64 * step).collect();
        let g: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
        let d1 = SpectralDerivative::new(1, None).apply(&g, step);
        let d2 = SpectralDerivative::new(2, None).apply(&g, step);
        for (i, &x) in xs.iter().enumerate() {
            let e1 = -2.0 * x * (-x * x).exp();
            let e2 = (4.0 * x * x - 2.0) * (-x * x).exp();
            assert!((d1[i] - e1).abs() < 1e-9, "d1 at {x}");
            assert!((d2[i] - e2).abs() < 1e-8, "d2 at {x}");
        }
    }

    #[test]
    fn taper_shape() {
        assert_eq!(rolloff(0.5, 1.0, 0.8), 1.0);
        assert!((rolloff(0.9, 1.0, 0.8) - 0.5).abs() < 1e-15);
        assert_eq!(rolloff(1.0, 1.0, 0.8), 0.0);
    }
}
