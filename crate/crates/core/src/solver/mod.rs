//! Leapfrog finite-difference solver for `(d_t^2 - Laplacian + q(t, x)) u = f`.
//!
//! Time levels live on the global lattice `t_n = n dt`, so runs that start at
//! different times (or run backwards through [`TimeReversedObserver`]) share
//! their sample times exactly. Fields are not stored by default: observers
//! see every level as it is produced.

mod coefficient;
pub mod energy;
pub mod observers;
pub mod plane_wave;

use rayon::prelude::*;

pub use coefficient::GridCoefficient;
pub use energy::{energy_series, gronwall_envelope, EnergyMonitor, EnergyParts, EnergySeries};
pub use observers::{ConeMonitor, HalfSpaceMonitor, Observer, Recorder, StepView, TimeReversedObserver};
pub use plane_wave::{
    incident_plane_wave, scattered_minus, scattered_plus, total_minus, IncidentWave, ScatterRun, ScatterSide,
};

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::{Grid3, Vec3};
use crate::mollifier::Mollifier;
use crate::potential::SpaceTimePotential;

/// Default Courant factor: `dt = 0.5 h / sqrt 3`.
pub const DEFAULT_CFL: f64 = 0.5;

/// Time interval, computational box and Courant factor of a solve.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub box_radius: f64,
    pub cfl: f64,
}

impl SolveWindow {
    pub fn dt(&self, h: f64) -> f64 {
        self.cfl * h / 3f64.sqrt()
    }

    /// Box sizing that keeps every boundary reflection out of `B(0, rho)`
    /// during the window: `box_radius >= rho + duration + 5 eta`.
    pub fn check_huygens(&self, rho: f64, eta: f64) -> Result<()> {
        let required = rho + (self.t_end - self.t_start) + 5.0 * eta;
        if self.box_radius < required {
            return Err(Error::BoxTooSmall { radius: self.box_radius, required });
        }
        Ok(())
    }

    /// Tighter sizing for fields that start at zero and are driven by sources
    /// in `B(0, source_radius)`: a reflection needs to travel to the box face
    /// and back, so measurements in `B(0, measure_radius)` stay exact while
    /// `2 box_radius > source_radius + measure_radius + duration`.
    pub fn check_reflection_free(&self, source_radius: f64, measure_radius: f64, h: f64) -> Result<()> {
        let required = 0.5 * (source_radius + measure_radius + (self.t_end - self.t_start)) + 2.0 * h;
        if self.box_radius < required {
            return Err(Error::BoxTooSmall { radius: self.box_radius, required });
        }
        Ok(())
    }
}

/// Right-hand side `f(t, x)`.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    None,
    /// `f = -q(t, x) delta_eta(t + s - x . omega)`: drives the scattered part
    /// of a plane-wave solution.
    PlaneWaveScatter { q: &'a dyn SpaceTimePotential, s: f64, omega: Vec3, mollifier: Mollifier },
    /// `f = p(t, x)` for a separable source.
    Potential(&'a dyn SpaceTimePotential),
}

/// Initial state at the first lattice level.
pub enum Init {
    Zero,
    /// `(u, u_t)`; the second level is filled by a second-order Taylor step.
    Cauchy { u: Vec<f64>, ut: Vec<f64> },
    /// The first two levels given explicitly.
    TwoLevel { u0: Vec<f64>, u1: Vec<f64> },
}

/// Values held on the outermost layer of nodes.
#[derive(Clone, Copy)]
pub enum Boundary<'a> {
    Zero,
    Exact(&'a (dyn Fn(f64, Vec3) -> f64 + Sync)),
}

/// Everything [`run`] needs.
pub struct SolveSpec<'a> {
    pub grid: Grid3,
    pub dt: f64,
    pub cfl: f64,
    /// First and last lattice indices; `t_n = n dt`.
    pub n_start: i64,
    pub n_end: i64,
    pub q: Option<&'a dyn SpaceTimePotential>,
    pub source: Source<'a>,
    pub init: Init,
    pub boundary: Boundary<'a>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub n_start: i64,
    pub n_end: i64,
    pub dt: f64,
    pub steps: usize,
}

struct SourceSampler<'a> {
    source: Source<'a>,
    coeff: Option<GridCoefficient>,
    q_buf: Vec<f64>,
    dots: Vec<f64>,
}

impl<'a> SourceSampler<'a> {
    fn new(source: Source<'a>, grid: &Grid3) -> Result<Self> {
        let coeff = match source {
            Source::None => None,
            Source::PlaneWaveScatter { q, .. } => Some(GridCoefficient::new(q, grid)?),
            Source::Potential(p) => Some(GridCoefficient::new(p, grid)?),
        };
        let n = coeff.as_ref().map_or(0, |c| c.len());
        let dots = match (source, &coeff) {
            (Source::PlaneWaveScatter { omega, .. }, Some(c)) => {
                c.points.iter().map(|x| crate::geometry::dot(*x, omega)).collect()
            }
            _ => Vec::new(),
        };
        Ok(Self { source, coeff, q_buf: vec![0.0; n], dots })
    }

    /// Adds `scale * f(t)` to `target` at the source nodes.
    fn add(&mut self, t: f64, scale: f64, target: &mut [f64]) {
        let Some(coeff) = &self.coeff else { return };
        match self.source {
            Source::None => {}
            Source::PlaneWaveScatter { q, s, mollifier, .. } => {
                coeff.eval(q, t, &mut self.q_buf);
                for (pos, &idx) in coeff.nodes.iter().enumerate() {
                    let qv = self.q_buf[pos];
                    if qv != 0.0 {
                        target[idx] -= scale * qv * mollifier.delta(t + s - self.dots[pos]);
                    }
                }
            }
            Source::Potential(p) => {
                coeff.eval(p, t, &mut self.q_buf);
                for (pos, &idx) in coeff.nodes.iter().enumerate() {
                    target[idx] += scale * self.q_buf[pos];
                }
            }
        }
    }

    /// `h^3 sum f(t)^2`, for energy bookkeeping.
    fn norm_sq(&mut self, t: f64, cell: f64) -> f64 {
        let Some(coeff) = &self.coeff else { return 0.0 };
        let mut acc = 0.0;
        match self.source {
            Source::None => {}
            Source::PlaneWaveScatter { q, s, mollifier, .. } => {
                coeff.eval(q, t, &mut self.q_buf);
                for pos in 0..coeff.len() {
                    let f = self.q_buf[pos] * mollifier.delta(t + s - self.dots[pos]);
                    acc += f * f;
                }
            }
            Source::Potential(p) => {
                coeff.eval(p, t, &mut self.q_buf);
                acc = self.q_buf.iter().map(|v| v * v).sum();
            }
        }
        acc * cell
    }
}

/// Boundary node indices of a grid.
fn boundary_nodes(grid: &Grid3) -> Vec<usize> {
    let [nx, ny, nz] = grid.dims;
    let mut out = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                    out.push(grid.index(i, j, k));
                }
            }
        }
    }
    out
}

/// `next = 2 cur - prev + c2 * Lap7(cur)` on interior nodes; returns false when
/// a non-finite value was produced.
fn leapfrog_interior(grid: &Grid3, c2: f64, prev: &[f64], cur: &[f64], next: &mut [f64]) -> bool {
    let [nx, ny, nz] = grid.dims;
    let plane = ny * nz;
    next.par_chunks_mut(plane)
        .enumerate()
        .filter(|(i, _)| *i >= 1 && *i < nx - 1)
        .map(|(i, out)| {
            let mut acc = 0.0;
            for j in 1..ny - 1 {
                let row = i * plane + j * nz;
                let c = &cur[row..row + nz];
                let up = &cur[row - nz..row];
                let down = &cur[row + nz..row + 2 * nz];
                let back = &cur[row - plane..row - plane + nz];
                let front = &cur[row + plane..row + plane + nz];
                let p = &prev[row..row + nz];
                let o = &mut out[j * nz..(j + 1) * nz];
                for k in 1..nz - 1 {
                    let lap = c[k - 1] + c[k + 1] + up[k] + down[k] + back[k] + front[k] - 6.0 * c[k];
                    let v = 2.0 * c[k] - p[k] + c2 * lap;
                    o[k] = v;
                    acc += v;
                }
            }
            acc.is_finite()
        })
        .reduce(|| true, |a, b| a && b)
}

/// 7-point Laplacian at interior node `idx`.
#[inline]
pub(crate) fn laplacian_at(grid: &Grid3, u: &[f64], idx: usize) -> f64 {
    let nz = grid.dims[2];
    let plane = grid.dims[1] * nz;
    let inv = 1.0 / (grid.h * grid.h);
    (u[idx - 1] + u[idx + 1] + u[idx - nz] + u[idx + nz] + u[idx - plane] + u[idx + plane] - 6.0 * u[idx]) * inv
}

fn is_interior(grid: &Grid3, idx: usize) -> bool {
    let [i, j, k] = grid.ijk(idx);
    i > 0 && j > 0 && k > 0 && i + 1 < grid.dims[0] && j + 1 < grid.dims[1] && k + 1 < grid.dims[2]
}

/// Integrates from level `n_start` to `n_end`, handing every level to the
/// observers in order.
pub fn run(spec: SolveSpec<'_>, observers: &mut [&mut dyn Observer]) -> Result<RunSummary> {
    let grid = spec.grid;
    let dt = spec.dt;
    let bound = spec.cfl.min(1.0) * grid.h / 3f64.sqrt();
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, bound });
    }
    if spec.n_end <= spec.n_start {
        return Err(Error::EmptyTimeAxis);
    }
    let n = grid.len();
    let q_coeff = match spec.q {
        Some(q) => Some((q, GridCoefficient::new(q, &grid)?)),
        None => None,
    };
    let mut source = SourceSampler::new(spec.source, &grid)?;
    let boundary = match spec.boundary {
        Boundary::Zero => None,
        Boundary::Exact(f) => Some((f, boundary_nodes(&grid))),
    };
    let dt2 = dt * dt;
    let time = |m: i64| m as f64 * dt;

    // q averaged over the two half levels around level m.
    let mut q_half_lo = vec![0.0; q_coeff.as_ref().map_or(0, |c| c.1.len())];
    let mut q_half_hi = q_half_lo.clone();
    let mut q_bar = q_half_lo.clone();
    let mut q_level = q_half_lo.clone();

    let mut prev = vec![0.0; n];
    let mut cur;
    let mut next;
    match spec.init {
        Init::Zero | Init::Cauchy { .. } => {
            let (u0, ut) = match spec.init {
                Init::Cauchy { u, ut } => (u, ut),
                _ => (vec![0.0; n], vec![0.0; n]),
            };
            if u0.len() != n || ut.len() != n {
                return Err(Error::GridMismatch("initial data does not match the grid".into()));
            }
            let t0 = time(spec.n_start);
            let mut u1 = vec![0.0; n];
            u1.par_iter_mut().enumerate().for_each(|(idx, v)| {
                *v = if is_interior(&grid, idx) {
                    u0[idx] + dt * ut[idx] + 0.5 * dt2 * laplacian_at(&grid, &u0, idx)
                } else {
                    u0[idx] + dt * ut[idx]
                };
            });
            if let Some((q, c)) = &q_coeff {
                c.eval(*q, t0, &mut q_level);
                for (pos, &idx) in c.nodes.iter().enumerate() {
                    u1[idx] -= 0.5 * dt2 * q_level[pos] * u0[idx];
                }
            }
            source.add(t0, 0.5 * dt2, &mut u1);
            if let Some((f, nodes)) = &boundary {
                for &idx in nodes {
                    u1[idx] = f(time(spec.n_start + 1), grid.point_of(idx));
                }
            }
            cur = u0;
            next = u1;
        }
        Init::TwoLevel { u0, u1 } => {
            if u0.len() != n || u1.len() != n {
                return Err(Error::GridMismatch("initial levels do not match the grid".into()));
            }
            cur = u0;
            next = u1;
        }
    }

    fn view<'v>(m: i64, dt: f64, grid: Grid3, prev: Option<&'v [f64]>, cur: &'v [f64], next: Option<&'v [f64]>) -> StepView<'v> {
        StepView { n: m, t: m as f64 * dt, dt, grid, prev, cur, next }
    }
    for obs in observers.iter_mut() {
        obs.observe(&view(spec.n_start, dt, grid, None, &cur, Some(&next)))?;
    }
    std::mem::swap(&mut prev, &mut cur);
    std::mem::swap(&mut cur, &mut next);
    // prev = u^{n_start}, cur = u^{n_start + 1}, next = scratch.

    let c2 = dt2 / (grid.h * grid.h);
    let mut steps = 1usize;
    for m in spec.n_start + 1..spec.n_end {
        if !leapfrog_interior(&grid, c2, &prev, &cur, &mut next) {
            return Err(Error::NonFiniteStep { step: steps });
        }
        if let Some((q, c)) = &q_coeff {
            c.eval(*q, time(m) - 0.5 * dt, &mut q_half_lo);
            c.eval(*q, time(m) + 0.5 * dt, &mut q_half_hi);
            for pos in 0..c.len() {
                q_bar[pos] = 0.5 * (q_half_lo[pos] + q_half_hi[pos]);
            }
            for (pos, &idx) in c.nodes.iter().enumerate() {
                next[idx] -= dt2 * q_bar[pos] * cur[idx];
            }
        }
        source.add(time(m), dt2, &mut next);
        if let Some((f, nodes)) = &boundary {
            let t1 = time(m + 1);
            for &idx in nodes {
                next[idx] = f(t1, grid.point_of(idx));
            }
        }
        steps += 1;
        for obs in observers.iter_mut() {
            obs.observe(&view(m, dt, grid, Some(&prev), &cur, Some(&next)))?;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    for obs in observers.iter_mut() {
        obs.observe(&view(spec.n_end, dt, grid, Some(&prev), &cur, None))?;
    }
    Ok(RunSummary { n_start: spec.n_start, n_end: spec.n_end, dt, steps })
}

/// Lattice index range covering `[t_start, t_end]` for step `dt`.
pub fn lattice_range(t_start: f64, t_end: f64, dt: f64) -> (i64, i64) {
    ((t_start / dt).floor() as i64, (t_end / dt).ceil() as i64)
}

/// Solves on the box of `window` at spacing `h` and records every level.
pub fn solve_forward(
    q: Option<&dyn SpaceTimePotential>,
    source: Source<'_>,
    init: Init,
    window: &SolveWindow,
    h: f64,
) -> Result<SpaceTimeField> {
    let grid = Grid3::centered(window.box_radius, h)?;
    let dt = window.dt(h);
    let (n_start, n_end) = lattice_range(window.t_start, window.t_end, dt);
    let mut rec = Recorder::new(1);
    run(
        SolveSpec { grid, dt, cfl: window.cfl, n_start, n_end, q, source, init, boundary: Boundary::Zero },
        &mut [&mut rec],
    )?;
    rec.into_field()
}

/// `h^3 sum f(t)^2` for a source on a grid; used by the energy envelope.
pub fn source_norm_sq(source: Source<'_>, grid: &Grid3, t: f64) -> Result<f64> {
    let mut s = SourceSampler::new(source, grid)?;
    Ok(s.norm_sq(t, grid.cell_volume()))
}
