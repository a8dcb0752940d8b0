//! Asymptotic wave profiles `u#(s, omega)` of outgoing solutions: from the
//! source by the closed formula `u# = c_3^- d_s int p(omega . x - s, x) dx`,
//! and from a computed field by sampling `|x| u_t` on spherical shells.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::{dot, norm, scale, DirectionSet, Grid3, UniformGrid1};
use crate::potential::SpaceTimePotential;
use crate::radon::{Sinogram, SpectralDerivative};
use crate::solver::observers::{Observer, StepView};
use crate::solver::{lattice_range, run, Boundary, Init, SolveSpec, SolveWindow, Source};
use crate::C3_MINUS;

/// `u#` from the source `p` (`box u = p`): the inner integral by a grid sum
/// at spacing `h`, with the nodes of each term binned in `omega . x`
/// (width h/8), and the `s`-derivative spectral.
pub fn wave_profile_from_source(
    p: &dyn SpaceTimePotential,
    offsets: &UniformGrid1,
    dirs: &DirectionSet,
    h: f64,
) -> Result<Sinogram> {
    let (t0, t1) = p.time_support();
    let rho = p.rho();
    if p.n_terms() > 0 && !offsets.covers(-rho - t1, rho - t0) {
        return Err(Error::OffsetCoverage { lo: offsets.start, hi: offsets.end(), need_lo: -rho - t1, need_hi: rho - t0 });
    }
    let grid = Grid3::centered(rho, h)?;
    let cell = grid.cell_volume();
    let bin = h / 8.0;
    let nbins = (2.0 * rho / bin).ceil() as usize + 3;
    let lo = -rho - bin;
    // Space factors per term on the nodes of B(0, rho).
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| norm(grid.point_of(i)) < rho).collect();
    let columns: Vec<Vec<f64>> = (0..p.n_terms())
        .map(|k| nodes.par_iter().map(|&i| p.space_factor(k, grid.point_of(i))).collect())
        .collect();
    let rows: Vec<Vec<f64>> = dirs
        .dirs
        .par_iter()
        .map(|&omega| {
            let mut row = vec![0.0; offsets.n];
            for (k, col) in columns.iter().enumerate() {
                let mut bins = vec![0.0; nbins];
                for (&i, &v) in nodes.iter().zip(col) {
                    if v == 0.0 {
                        continue;
                    }
                    let u = (dot(grid.point_of(i), omega) - lo) / bin;
                    let b = u.floor();
                    let f = u - b;
                    bins[b as usize] += (1.0 - f) * v;
                    bins[b as usize + 1] += f * v;
                }
                for (j, r) in row.iter_mut().enumerate() {
                    let s = offsets.value(j);
                    let mut acc = 0.0;
                    for (b, &m) in bins.iter().enumerate() {
                        if m != 0.0 {
                            acc += m * p.time_factor(k, lo + b as f64 * bin - s);
                        }
                    }
                    *r += acc * cell;
                }
            }
            row
        })
        .collect();
    let integral = Sinogram::new(*offsets, dirs.clone(), rows.concat())?;
    let mut out = integral.differentiate(&SpectralDerivative::new(1, None));
    out.values.iter_mut().for_each(|v| *v *= C3_MINUS);
    Ok(out)
}

/// A spherical shell `r_inner <= |x| <= r_inner + thickness`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarFieldShell {
    pub r_inner: f64,
    pub thickness: f64,
}

impl FarFieldShell {
    pub fn r_outer(&self) -> f64 {
        self.r_inner + self.thickness
    }

    /// Mean radius of the samples.
    pub fn r_mid(&self) -> f64 {
        self.r_inner + 0.5 * self.thickness
    }
}

/// Streams `|x| u_t(t, x)` at `x = r omega`, `r = t + s`, for each shell,
/// direction and offset `s`, averaging the samples that fall in the shell.
pub struct ProfileSampler {
    pub offsets: UniformGrid1,
    pub dirs: DirectionSet,
    pub shells: Vec<FarFieldShell>,
    sums: Vec<f64>,
    counts: Vec<u32>,
}

impl ProfileSampler {
    pub fn new(offsets: UniformGrid1, dirs: DirectionSet, shells: Vec<FarFieldShell>) -> Self {
        let n = shells.len() * dirs.len() * offsets.n;
        Self { offsets, dirs, shells, sums: vec![0.0; n], counts: vec![0; n] }
    }

    /// Checks the shells against the source radius and the box.
    pub fn check_geometry(&self, source_radius: f64, grid: &Grid3) -> Result<()> {
        let free = grid.inner_radius() - 2.0 * grid.h;
        for sh in &self.shells {
            if sh.r_inner <= source_radius {
                return Err(Error::Geometry(format!(
                    "shell [{}, {}] reaches the source support |x| <= {source_radius}",
                    sh.r_inner,
                    sh.r_outer()
                )));
            }
            if sh.r_outer() >= free {
                return Err(Error::Geometry(format!(
                    "shell [{}, {}] reaches the box boundary (usable radius {free})",
                    sh.r_inner,
                    sh.r_outer()
                )));
            }
        }
        Ok(())
    }

    /// Time interval a run must cover for every sample to exist.
    pub fn time_span(&self) -> (f64, f64) {
        let r_lo = self.shells.iter().map(|s| s.r_inner).fold(f64::INFINITY, f64::min);
        let r_hi = self.shells.iter().map(|s| s.r_outer()).fold(f64::NEG_INFINITY, f64::max);
        (r_lo - self.offsets.end(), r_hi - self.offsets.start)
    }

    /// The profile estimate of each shell.
    pub fn profiles(&self) -> Vec<Sinogram> {
        let block = self.dirs.len() * self.offsets.n;
        (0..self.shells.len())
            .map(|k| {
                let values = (k * block..(k + 1) * block)
                    .map(|e| if self.counts[e] > 0 { self.sums[e] / self.counts[e] as f64 } else { 0.0 })
                    .collect();
                Sinogram { offsets: self.offsets, dirs: self.dirs.clone(), values }
            })
            .collect()
    }

    /// Two-shell extrapolation removing the `1/r` term:
    /// `(r_b f_b - r_a f_a) / (r_b - r_a)`; a single shell is returned as is.
    pub fn extrapolated(&self) -> Result<Sinogram> {
        let mut p = self.profiles();
        match p.len() {
            1 => Ok(p.remove(0)),
            2 => {
                let (ra, rb) = (self.shells[0].r_mid(), self.shells[1].r_mid());
                let mut out = p[1].clone();
                for (o, a) in out.values.iter_mut().zip(&p[0].values) {
                    *o = (rb * *o - ra * a) / (rb - ra);
                }
                Ok(out)
            }
            n => Err(Error::InvalidParameter(format!("extrapolation needs one or two shells, got {n}"))),
        }
    }
}

impl Observer for ProfileSampler {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        let (Some(prev), Some(next)) = (view.prev, view.next) else {
            return Ok(());
        };
        let grid = view.grid;
        let nd = self.dirs.len();
        let ns = self.offsets.n;
        for (k, sh) in self.shells.iter().enumerate() {
            // Offsets with r = t + s inside the shell.
            let s_lo = sh.r_inner - view.t;
            let s_hi = sh.r_outer() - view.t;
            let j_lo = ((s_lo - self.offsets.start) / self.offsets.step).ceil().max(0.0) as usize;
            let j_hi = ((s_hi - self.offsets.start) / self.offsets.step).floor();
            if j_hi < 0.0 {
                continue;
            }
            let j_hi = (j_hi as usize).min(ns.saturating_sub(1));
            if j_lo > j_hi {
                continue;
            }
            for j in j_lo..=j_hi {
                let r = view.t + self.offsets.value(j);
                for d in 0..nd {
                    let x = scale(self.dirs.dirs[d], r);
                    let ut = (grid.trilinear(next, x) - grid.trilinear(prev, x)) / (2.0 * view.dt);
                    let e = (k * nd + d) * ns + j;
                    self.sums[e] += r * ut;
                    self.counts[e] += 1;
                }
            }
        }
        Ok(())
    }
}

/// `u#` from a recorded outgoing field by shell sampling; two shells are
/// combined by [`ProfileSampler::extrapolated`].
pub fn wave_profile_far_field(
    u: &SpaceTimeField,
    source_radius: f64,
    shells: &[FarFieldShell],
    offsets: &UniformGrid1,
    dirs: &DirectionSet,
) -> Result<Sinogram> {
    let mut sampler = ProfileSampler::new(*offsets, dirs.clone(), shells.to_vec());
    sampler.check_geometry(source_radius, &u.grid)?;
    let (need_lo, need_hi) = sampler.time_span();
    let (have_lo, have_hi) = (u.t_start + u.dt, u.time(u.nt.saturating_sub(2)));
    if have_lo > need_lo || have_hi < need_hi {
        return Err(Error::Geometry(format!(
            "field covers t in [{have_lo}, {have_hi}], shell sampling needs [{need_lo}, {need_hi}]"
        )));
    }
    for n in 1..u.nt.saturating_sub(1) {
        let view = StepView {
            n: n as i64,
            t: u.time(n),
            dt: u.dt,
            grid: u.grid,
            prev: Some(u.slice(n - 1)),
            cur: u.slice(n),
            next: Some(u.slice(n + 1)),
        };
        sampler.observe(&view)?;
    }
    sampler.extrapolated()
}

/// Solves `box u = p` from rest and samples the shells while streaming, on a
/// box just large enough to keep reflections out of the outer shell.
pub fn far_field_profile_streaming(
    p: &dyn SpaceTimePotential,
    shells: &[FarFieldShell],
    offsets: &UniformGrid1,
    dirs: &DirectionSet,
    h: f64,
    cfl: f64,
) -> Result<Sinogram> {
    let mut sampler = ProfileSampler::new(*offsets, dirs.clone(), shells.to_vec());
    let (t0, _) = p.time_support();
    let (_, need_hi) = sampler.time_span();
    let dt = cfl * h / 3f64.sqrt();
    let (n_start, n_end) = lattice_range(t0 - 2.0 * dt, need_hi + 2.0 * dt, dt);
    let r_out = shells.iter().map(|s| s.r_outer()).fold(0.0, f64::max);
    let duration = (n_end - n_start) as f64 * dt;
    let box_radius = (0.5 * (p.rho() + r_out + duration) + 3.0 * h).max(r_out + 4.0 * h);
    let window = SolveWindow { t_start: n_start as f64 * dt, t_end: n_end as f64 * dt, box_radius, cfl };
    window.check_reflection_free(p.rho(), r_out, h)?;
    let grid = Grid3::centered(box_radius, h)?;
    sampler.check_geometry(p.rho(), &grid)?;
    run(
        SolveSpec {
            grid,
            dt,
            cfl,
            n_start,
            n_end,
            q: None,
            source: Source::Potential(p),
            init: Init::Zero,
            boundary: Boundary::Zero,
        },
        &mut [&mut sampler],
    )?;
    sampler.extrapolated()
}
