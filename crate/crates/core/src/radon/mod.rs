//! Radon transforms over planes `x . omega = p` in R^3, filtered
//! backprojection, Sobolev norms of sinograms and the translation
//! representation of free waves.

pub mod sobolev;
pub mod spectral;
pub mod translation;

use rayon::prelude::*;
use rustfft::FftPlanner;

pub use sobolev::{sobolev_data_norm, sobolev_norm_on_window, sobolev_row_norm_sq};
pub use spectral::SpectralDerivative;
pub use translation::{translation_rep, translation_rep_inverse, TranslationRep};

use crate::error::{Error, Result};
use crate::field::Volume;
use crate::geometry::{add, dot, orthonormal_frame, scale, DirectionSet, Grid3, UniformGrid1, Vec3};

/// Fraction of Nyquist where the filtered-backprojection taper starts.
pub const FBP_TAPER_START: f64 = 0.8;

/// Values `g(p, omega)` on an offset grid times a direction set, stored one
/// direction after another.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    pub offsets: UniformGrid1,
    pub dirs: DirectionSet,
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn new(offsets: UniformGrid1, dirs: DirectionSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != offsets.n * dirs.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} offsets x {} directions",
                values.len(),
                offsets.n,
                dirs.len()
            )));
        }
        Ok(Self { offsets, dirs, values })
    }

    pub fn zeros(offsets: UniformGrid1, dirs: DirectionSet) -> Self {
        let n = offsets.n * dirs.len();
        Self { offsets, dirs, values: vec![0.0; n] }
    }

    /// Tabulates `g(p, omega)`.
    pub fn from_fn<F: Fn(f64, Vec3) -> f64>(offsets: UniformGrid1, dirs: DirectionSet, g: F) -> Self {
        let mut values = Vec::with_capacity(offsets.n * dirs.len());
        for &d in &dirs.dirs {
            for i in 0..offsets.n {
                values.push(g(offsets.value(i), d));
            }
        }
        Self { offsets, dirs, values }
    }

    pub fn row(&self, dir: usize) -> &[f64] {
        &self.values[dir * self.offsets.n..(dir + 1) * self.offsets.n]
    }

    pub fn row_mut(&mut self, dir: usize) -> &mut [f64] {
        let n = self.offsets.n;
        &mut self.values[dir * n..(dir + 1) * n]
    }

    pub fn same_layout(&self, other: &Sinogram) -> bool {
        self.offsets == other.offsets && self.dirs == other.dirs
    }

    /// Applies a spectral derivative to every row.
    pub fn differentiate(&self, op: &SpectralDerivative) -> Sinogram {
        let step = self.offsets.step;
        let n = self.offsets.n;
        let rows: Vec<Vec<f64>> = (0..self.dirs.len())
            .into_par_iter()
            .map_init(FftPlanner::new, |planner, d| op.apply_with(planner, self.row(d), step))
            .collect();
        let mut values = Vec::with_capacity(n * self.dirs.len());
        for r in rows {
            values.extend(r);
        }
        Sinogram { offsets: self.offsets, dirs: self.dirs.clone(), values }
    }

    /// Linear interpolation of row `dir` at offset `p`; zero outside the grid.
    #[inline]
    pub fn sample(&self, dir: usize, p: f64) -> f64 {
        self.offsets.interpolate(self.row(dir), p)
    }
}

fn check_offsets(offsets: &UniformGrid1, rho: f64) -> Result<()> {
    if !offsets.covers(-rho, rho) {
        return Err(Error::OffsetCoverage { lo: offsets.start, hi: offsets.end(), need_lo: -rho, need_hi: rho });
    }
    Ok(())
}

/// Radon transform of grid samples supported in `B(0, rho)`.
pub fn radon_forward(f: &Volume, dirs: &DirectionSet, offsets: &UniformGrid1, rho: f64) -> Result<Sinogram> {
    radon_weighted(f, &|_x, _w| 1.0, dirs, offsets, rho)
}

/// `R_mu f(p, omega) = int_{x . omega = p} mu(x, omega) f(x) dS(x)`.
///
/// The plane is sampled with a uniform square lattice at the grid spacing,
/// restricted to the disc `|x| < rho`, and `f` is interpolated trilinearly.
pub fn radon_weighted<W>(f: &Volume, mu: &W, dirs: &DirectionSet, offsets: &UniformGrid1, rho: f64) -> Result<Sinogram>
where
    W: Fn(Vec3, Vec3) -> f64 + Sync,
{
    check_offsets(offsets, rho)?;
    let grid = f.grid;
    let h = grid.h;
    let rows: Vec<Vec<f64>> = dirs
        .dirs
        .par_iter()
        .map(|&omega| {
            let (e1, e2) = orthonormal_frame(omega);
            (0..offsets.n)
                .map(|i| {
                    let p = offsets.value(i);
                    plane_sum(&grid, &f.values, mu, omega, e1, e2, p, rho) * h * h
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(offsets.n * dirs.len());
    for r in rows {
        values.extend(r);
    }
    Sinogram::new(*offsets, dirs.clone(), values)
}

#[allow(clippy::too_many_arguments)]
fn plane_sum<W>(grid: &Grid3, values: &[f64], mu: &W, omega: Vec3, e1: Vec3, e2: Vec3, p: f64, rho: f64) -> f64
where
    W: Fn(Vec3, Vec3) -> f64,
{
    let r2 = rho * rho - p * p;
    if r2 <= 0.0 {
        return 0.0;
    }
    let h = grid.h;
    let m = (r2.sqrt() / h).ceil() as i64;
    let foot = scale(omega, p);
    let mut acc = 0.0;
    for i in -m..=m {
        let a = i as f64 * h;
        let row = add(foot, scale(e1, a));
        for j in -m..=m {
            let b = j as f64 * h;
            if a * a + b * b >= r2 {
                continue;
            }
            let x = add(row, scale(e2, b));
            let v = grid.trilinear(values, x);
            if v != 0.0 {
                acc += mu(x, omega) * v;
            }
        }
    }
    acc
}

/// Backprojection `R' g(x) = sum_omega w_omega g(x . omega, omega)`, the
/// adjoint of [`radon_forward`] for the sphere quadrature.
pub fn backproject(sino: &Sinogram, grid: &Grid3) -> Volume {
    let values = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let x = grid.point_of(idx);
            let mut acc = 0.0;
            for (d, (&omega, &w)) in sino.dirs.dirs.iter().zip(&sino.dirs.weights).enumerate() {
                acc += w * sino.sample(d, dot(x, omega));
            }
            acc
        })
        .collect();
    Volume { grid: *grid, values }
}

/// Filtered backprojection `f(x) = -(8 pi^2)^{-1} int (d_p^2 Rf)(x . omega, omega) d omega`,
/// with a spectral second derivative tapered above 80% of Nyquist.
pub fn radon_inverse(sino: &Sinogram, grid: &Grid3) -> Volume {
    warn_if_coarse(sino);
    let filtered = sino.differentiate(&SpectralDerivative::new(2, Some(FBP_TAPER_START)));
    let mut out = backproject(&filtered, grid);
    let c = -1.0 / (8.0 * std::f64::consts::PI * std::f64::consts::PI);
    out.values.iter_mut().for_each(|v| *v *= c);
    out
}

fn warn_if_coarse(sino: &Sinogram) {
    let max = crate::reduce::max_abs(&sino.values);
    if max == 0.0 {
        return;
    }
    let n = sino.offsets.n;
    let occupied = (0..n)
        .filter(|&i| (0..sino.dirs.len()).any(|d| sino.row(d)[i].abs() > 1e-6 * max))
        .count();
    if occupied < 16 {
        log::warn!("only {occupied} offsets carry the sinogram support; second-derivative filter is under-resolved");
    }
}

/// `(|Rf|_{L2(S2; H1)} / |f|_{L2}, same)`; the pair is aggregated over
/// ensembles to exhibit a two-sided constant.
pub fn radon_stability_ratio(f: &Volume, dirs: &DirectionSet, offsets: &UniformGrid1, rho: f64) -> Result<(f64, f64)> {
    let nf = f.l2_norm();
    if nf < 1e-300 {
        return Err(Error::UndefinedRatio(nf));
    }
    let sino = radon_forward(f, dirs, offsets, rho)?;
    let r = sobolev_data_norm(&sino, 1) / nf;
    Ok((r, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_must_cover_support() {
        let grid = Grid3::centered(1.0, 0.1).unwrap();
        let f = Volume::zeros(grid);
        let dirs = DirectionSet::design(26).unwrap();
        let p = UniformGrid1::linspace(-0.5, 0.5, 11).unwrap();
        assert!(matches!(radon_forward(&f, &dirs, &p, 1.0), Err(Error::OffsetCoverage { .. })));
    }
}
