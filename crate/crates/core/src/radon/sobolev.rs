//! Sobolev norms `L2(S^2; H^m(R_sigma))` of sampled (sigma, omega) data.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::spectral::{frequency, SpectralDerivative};
use super::Sinogram;
use crate::reduce::pairwise_sum;

/// `int (1 + xi^2)^m |g^(xi)|^2 d xi / (2 pi)` for one row, by the DFT of the
/// row (no padding: the row is taken to vanish at both ends).
pub fn sobolev_row_norm_sq(planner: &mut FftPlanner<f64>, row: &[f64], step: f64, m: u32) -> f64 {
    let n = row.len();
    if n == 0 {
        return 0.0;
    }
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let terms: Vec<f64> = buf
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let xi = frequency(k, n, step);
            (1.0 + xi * xi).powi(m as i32) * c.norm_sqr()
        })
        .collect();
    pairwise_sum(&terms) * step / n as f64
}

/// `(sum_omega w_omega |g(., omega)|^2_{H^m})^{1/2}`.
pub fn sobolev_data_norm(g: &Sinogram, m: u32) -> f64 {
    warn_if_not_decayed(g);
    let mut planner = FftPlanner::new();
    let step = g.offsets.step;
    let per_dir: Vec<f64> = (0..g.dirs.len())
        .map(|d| g.dirs.weights[d] * sobolev_row_norm_sq(&mut planner, g.row(d), step, m))
        .collect();
    pairwise_sum(&per_dir).sqrt()
}

/// The `H^m` norm restricted to the offsets in `[lo, hi]`:
/// `sum_{j <= m} binom(m, j) |d^j g|^2_{L2(lo, hi)}`, derivatives spectral.
pub fn sobolev_norm_on_window(g: &Sinogram, m: u32, lo: f64, hi: f64) -> f64 {
    let step = g.offsets.step;
    let inside: Vec<bool> = (0..g.offsets.n)
        .map(|i| {
            let p = g.offsets.value(i);
            p >= lo - 1e-12 && p <= hi + 1e-12
        })
        .collect();
    let mut total = Vec::with_capacity(g.dirs.len());
    let derivs: Vec<Sinogram> = (1..=m).map(|j| g.differentiate(&SpectralDerivative::new(j, None))).collect();
    for d in 0..g.dirs.len() {
        let mut acc = 0.0;
        for j in 0..=m {
            let row = if j == 0 { g.row(d) } else { derivs[j as usize - 1].row(d) };
            let sq: Vec<f64> = row.iter().zip(&inside).map(|(v, &keep)| if keep { v * v } else { 0.0 }).collect();
            acc += binomial(m, j) * pairwise_sum(&sq) * step;
        }
        total.push(g.dirs.weights[d] * acc);
    }
    pairwise_sum(&total).sqrt()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn warn_if_not_decayed(g: &Sinogram) {
    let max = crate::reduce::max_abs(&g.values);
    if max == 0.0 {
        return;
    }
    let n = g.offsets.n;
    let edge = (0..g.dirs.len()).map(|d| g.row(d)[0].abs().max(g.row(d)[n - 1].abs())).fold(0.0, f64::max);
    if edge > 1e-6 * max {
        log::warn!("data does not vanish at the offset-grid ends ({:.2e} of max); the periodic Sobolev norm sees a jump", edge / max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DirectionSet, UniformGrid1};

    #[test]
    fn order_zero_is_plain_l2() {
        let dirs = DirectionSet::design(26).unwrap();
        let offsets = UniformGrid1::symmetric(3.0, 0.05).unwrap();
        let g = Sinogram::from_fn(offsets, dirs.clone(), |p, w| (-(p - 0.3 * w[0]).powi(2) * 4.0).exp() * (1.0 + w[2]));
        let direct: f64 = (0..dirs.len())
            .map(|d| dirs.weights[d] * g.row(d).iter().map(|v| v * v).sum::<f64>() * offsets.step)
            .sum();
        let spectral = sobolev_data_norm(&g, 0);
        assert!((spectral - direct.sqrt()).abs() <= 1e-10 * direct.sqrt());
    }

    #[test]
    fn order_one_matches_exact_derivative_quadrature() {
        let dirs = DirectionSet::design(38).unwrap();
        let offsets = UniformGrid1::symmetric(6.0, 0.05).unwrap();
        let g = Sinogram::from_fn(offsets, dirs, |p, _| (-p * p).exp());
        // Independent oracle: dense midpoint quadrature of g^2 + g'^2 times 4 pi.
        let n = 200_000;
        let d = 12.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let s = -6.0 + (i as f64 + 0.5) * d;
            let v = (-s * s).exp();
            let dv = -2.0 * s * v;
            acc += (v * v + dv * dv) * d;
        }
        let oracle = (4.0 * std::f64::consts::PI * acc).sqrt();
        let value = sobolev_data_norm(&g, 1);
        assert!((value - oracle).abs() <= 1e-3 * oracle, "{value} vs {oracle}");
        let windowed = sobolev_norm_on_window(&g, 1, -6.0, 6.0);
        assert!((windowed - oracle).abs() <= 1e-3 * oracle, "{windowed} vs {oracle}");
    }
}
