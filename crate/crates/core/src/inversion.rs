//! Reconstruction of the potential from backscattering data: slice-wise
//! Radon inversion, a Born-type fixed-point refinement and the stability
//! ratio between potential and data differences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{norm, Grid3, UniformGrid1};
use crate::norms::linf_l2_slices;
use crate::potential::{Combination, SampledPotential, SpaceTimePotential};
use crate::radon::radon_inverse;
use crate::reduce::sum_sq;
use crate::scattering::{
    backscatter_cube, pseudolinearization_check, CubeLayout, DataCube, PairingCache, PseudolinGroup,
    PseudolinSample, Synthesis,
};

/// Denominators below this make a ratio undefined.
pub const RATIO_FLOOR: f64 = 1e-14;

/// Time grid of the reconstruction: `t = -sigma'`, ascending.
pub fn slice_times(sigma_prime: &UniformGrid1) -> UniformGrid1 {
    UniformGrid1 { start: -sigma_prime.end(), step: sigma_prime.step, n: sigma_prime.n }
}

/// Inverts each `sigma'` slice of the cube as a sinogram over
/// `(sigma, omega)` and assigns it to the time `t = -sigma'`; nodes outside
/// `B(0, rho)` are zeroed. With `time_support = Some((t0, t1))` the sigma'
/// grid must cover `[-t1, -t0]`.
pub fn linearized_reconstruct(
    cube: &DataCube,
    grid: &Grid3,
    rho: f64,
    time_support: Option<(f64, f64)>,
) -> Result<SampledPotential> {
    let lay = &cube.layout;
    if !lay.sigma.covers(-rho, rho) {
        return Err(Error::OffsetCoverage { lo: lay.sigma.start, hi: lay.sigma.end(), need_lo: -rho, need_hi: rho });
    }
    if let Some((t0, t1)) = time_support {
        if !lay.sigma_prime.covers(-t1, -t0) {
            return Err(Error::OffsetCoverage {
                lo: lay.sigma_prime.start,
                hi: lay.sigma_prime.end(),
                need_lo: -t1,
                need_hi: -t0,
            });
        }
    }
    let times = slice_times(&lay.sigma_prime);
    let n = lay.sigma_prime.n;
    let inside: Vec<bool> = (0..grid.len()).map(|i| norm(grid.point_of(i)) < rho).collect();
    let slices: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            // Slice k of the time grid is sigma' index n - 1 - k.
            let mut v = radon_inverse(&cube.slice(n - 1 - k), grid).values;
            for (x, &keep) in v.iter_mut().zip(&inside) {
                if !keep {
                    *x = 0.0;
                }
            }
            v
        })
        .collect();
    SampledPotential::new(*grid, times, slices.concat(), rho)
}

/// Per-slice `L2` errors of a reconstruction against a known potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceErrors {
    pub times: Vec<f64>,
    /// `|q_rec(t) - q(t)|_{L2}`.
    pub error: Vec<f64>,
    /// `|q(t)|_{L2}`.
    pub truth: Vec<f64>,
}

impl SliceErrors {
    /// `max_t |q_rec - q|_{L2} / max_t |q|_{L2}`.
    pub fn relative(&self) -> Result<f64> {
        let den = self.truth.iter().cloned().fold(0.0, f64::max);
        if den < RATIO_FLOOR {
            return Err(Error::UndefinedRatio(den));
        }
        Ok(self.error.iter().cloned().fold(0.0, f64::max) / den)
    }
}

/// Compares `rec` with `truth` on the reconstruction's own nodes and slices.
pub fn reconstruction_errors(rec: &SampledPotential, truth: &dyn SpaceTimePotential) -> SliceErrors {
    let grid = rec.grid;
    let cell = grid.cell_volume();
    let rows: Vec<(f64, f64, f64)> = (0..rec.times.n)
        .into_par_iter()
        .map(|k| {
            let t = rec.times.value(k);
            let exact = grid.sample(|x| if norm(x) < rec.rho { truth.value(t, x) } else { 0.0 });
            let diff: Vec<f64> = rec.slice(k).iter().zip(&exact).map(|(a, b)| a - b).collect();
            (t, (sum_sq(&diff) * cell).sqrt(), (sum_sq(&exact) * cell).sqrt())
        })
        .collect();
    SliceErrors {
        times: rows.iter().map(|r| r.0).collect(),
        error: rows.iter().map(|r| r.1).collect(),
        truth: rows.iter().map(|r| r.2).collect(),
    }
}

/// Outcome of [`born_iterate`].
#[derive(Clone, Debug)]
pub struct Iteration {
    /// The iterate with the smallest data residual.
    pub best: SampledPotential,
    /// Index of `best` in the residual log (0 is the initial guess).
    pub best_index: usize,
    /// `|data - synthesize(q_k)|` in the cube data norm, one entry per iterate.
    pub residuals: Vec<f64>,
    /// Set when the residual grew two steps running and the loop stopped.
    pub diverged: bool,
}

/// `q_{k+1} = q_k + linearized_reconstruct(data - synthesize(q_k))`.
///
/// The residual of every iterate is logged; the loop stops early when it
/// grows two steps in a row and the best iterate is returned.
pub fn born_iterate(
    data: &DataCube,
    guess: &SampledPotential,
    iters: usize,
    synth: &Synthesis,
    cache: &dyn PairingCache,
) -> Result<Iteration> {
    if iters == 0 {
        return Err(invalid("born_iterate needs at least one iteration"));
    }
    let times = slice_times(&data.layout.sigma_prime);
    if guess.times != times {
        return Err(Error::GridMismatch("initial guess must live on the slice times t = -sigma'".into()));
    }
    let layout: &CubeLayout = &data.layout;
    let synthesize = |q: &SampledPotential| -> Result<DataCube> {
        if q.values.iter().all(|&v| v == 0.0) {
            return Ok(DataCube::zeros(layout.clone(), data.eta, synth.backend.name()));
        }
        backscatter_cube(q, layout, synth, cache)
    };
    let mut current = guess.clone();
    let mut residual_cube = data.combine(1.0, &synthesize(&current)?, -1.0)?;
    let mut residuals = vec![residual_cube.data_norm()];
    let mut best = current.clone();
    let mut best_index = 0;
    let mut growth = 0;
    let mut diverged = false;
    for k in 1..=iters {
        let update = linearized_reconstruct(&residual_cube, &current.grid, current.rho, None)?;
        current.add_scaled(1.0, &update)?;
        residual_cube = data.combine(1.0, &synthesize(&current)?, -1.0)?;
        let r = residual_cube.data_norm();
        growth = if r > residuals[k - 1] { growth + 1 } else { 0 };
        residuals.push(r);
        if r < residuals[best_index] {
            best = current.clone();
            best_index = k;
        }
        if growth >= 2 {
            log::warn!("Born iteration diverged at step {k}; returning iterate {best_index}");
            diverged = true;
            break;
        }
    }
    Ok(Iteration { best, best_index, residuals, diverged })
}

/// `|q1 - q2|_{L-inf L2} / |A1 - A2|` with the potential difference sampled
/// on `grid` at `times` and the data norm `sup_{sigma'} L2(S2; H1(sigma))`.
pub fn lipschitz_ratio(
    q1: &dyn SpaceTimePotential,
    q2: &dyn SpaceTimePotential,
    cube1: &DataCube,
    cube2: &DataCube,
    grid: &Grid3,
    times: &UniformGrid1,
) -> Result<f64> {
    let diff = cube1.combine(1.0, cube2, -1.0)?;
    let den = diff.data_norm();
    if den < RATIO_FLOOR {
        return Err(Error::UndefinedRatio(den));
    }
    let dq = Combination::difference(q1, q2);
    let sampled = SampledPotential::from_potential(&dq, *grid, *times);
    let num = linf_l2_slices(grid, (0..times.n).map(|k| sampled.slice(k)))?;
    Ok(num / den)
}

/// Discrepancy between the two sides of the pseudo-linearization identity.
#[derive(Clone, Debug)]
pub struct PseudolinResidual {
    pub samples: Vec<PseudolinSample>,
    /// `|lhs - rhs|_2 / |lhs|_2`, or the absolute `|lhs - rhs|_2` when the
    /// left side vanishes.
    pub residual: f64,
    pub relative: bool,
}

pub fn pseudolin_residual(
    q1: &dyn SpaceTimePotential,
    q2: &dyn SpaceTimePotential,
    groups: &[PseudolinGroup],
    synth: &Synthesis,
) -> Result<PseudolinResidual> {
    let samples = pseudolinearization_check(q1, q2, groups, synth)?;
    let num = samples.iter().map(|s| (s.lhs - s.rhs).powi(2)).sum::<f64>().sqrt();
    let den = samples.iter().map(|s| s.lhs * s.lhs).sum::<f64>().sqrt();
    let (residual, relative) = if den > RATIO_FLOOR { (num / den, true) } else { (num, false) };
    Ok(PseudolinResidual { samples, residual, relative })
}
