//! Energy `E = |u_t|^2 + |grad u|^2 + |u|^2` of sampled fields and the
//! Grönwall envelope it must respect.

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::Grid3;
use crate::potential::SpaceTimePotential;
use crate::reduce::par_pairwise_sum_by;

use super::observers::{Observer, StepView};
use super::{laplacian_at, GridCoefficient};

/// Energy components at the half level between two consecutive time levels.
///
/// The gradient term is `<-Lap_h u^{n+1}, u^n>`, which makes
/// `kinetic + gradient` exactly conserved by the free leapfrog scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub gradient: f64,
    pub mass: f64,
}

impl EnergyParts {
    /// Between levels `cur = u^n` and `next = u^{n+1}`.
    pub fn between(grid: &Grid3, dt: f64, cur: &[f64], next: &[f64]) -> Self {
        let cell = grid.cell_volume();
        let n = grid.len();
        let [nx, ny, nz] = grid.dims;
        let kinetic = par_pairwise_sum_by(n, &|i| {
            let d = (next[i] - cur[i]) / dt;
            d * d
        });
        let mass = par_pairwise_sum_by(n, &|i| {
            let m = 0.5 * (next[i] + cur[i]);
            m * m
        });
        let gradient = par_pairwise_sum_by(n, &|idx| {
            let k = idx % nz;
            let j = (idx / nz) % ny;
            let i = idx / (ny * nz);
            if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                0.0
            } else {
                -cur[idx] * laplacian_at(grid, next, idx)
            }
        });
        Self { kinetic: kinetic * cell, gradient: gradient * cell, mass: mass * cell }
    }

    /// `|u_t|^2 + |grad u|^2`, conserved by free evolution.
    pub fn wave(&self) -> f64 {
        self.kinetic + self.gradient
    }

    pub fn total(&self) -> f64 {
        self.kinetic + self.gradient + self.mass
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergySeries {
    /// Half-level times.
    pub times: Vec<f64>,
    pub parts: Vec<EnergyParts>,
    /// `2 + sup |q|` over the sampled levels.
    pub c_q: f64,
}

impl EnergySeries {
    pub fn totals(&self) -> Vec<f64> {
        self.parts.iter().map(EnergyParts::total).collect()
    }

    pub fn wave(&self) -> Vec<f64> {
        self.parts.iter().map(EnergyParts::wave).collect()
    }

    /// `max_n |E_n - E_0| / E_0` of the conserved wave energy.
    pub fn max_relative_drift(&self) -> f64 {
        let w = self.wave();
        let Some(&e0) = w.first() else { return 0.0 };
        if e0 == 0.0 {
            return 0.0;
        }
        w.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max)
    }
}

/// Energy per half level of a stored field with unit time stride, and the
/// Grönwall constant `2 + sup |q|` sampled on the same nodes.
pub fn energy_series(u: &SpaceTimeField, q: Option<&dyn SpaceTimePotential>) -> Result<EnergySeries> {
    if u.nt < 2 {
        return Err(Error::EmptyTimeAxis);
    }
    let mut sup_q = 0.0f64;
    if let Some(q) = q {
        let coeff = GridCoefficient::new(q, &u.grid).map_err(|e| match e {
            Error::BoxTooSmall { .. } => Error::GridMismatch(format!("potential support does not fit the field grid ({e})")),
            other => other,
        })?;
        let mut buf = vec![0.0; coeff.len()];
        for n in 0..u.nt {
            coeff.eval(q, u.time(n), &mut buf);
            sup_q = buf.iter().fold(sup_q, |m, v| m.max(v.abs()));
        }
    }
    let mut series = EnergySeries { c_q: 2.0 + sup_q, ..Default::default() };
    for n in 0..u.nt - 1 {
        series.times.push(u.time(n) + 0.5 * u.dt);
        series.parts.push(EnergyParts::between(&u.grid, u.dt, u.slice(n), u.slice(n + 1)));
    }
    Ok(series)
}

/// `E(t) <= exp(C (t - t_ref)) * (E(t_ref) + int_{t_ref}^t |f|^2)` evaluated at
/// every sample time from index `reference` on (earlier entries are `inf`).
/// `forcing_sq` holds `|f(t)|^2` at the same times, when there is a source.
pub fn gronwall_envelope(times: &[f64], energies: &[f64], c: f64, reference: usize, forcing_sq: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; times.len()];
    if reference >= times.len() {
        return out;
    }
    let t_ref = times[reference];
    let mut forcing = 0.0;
    for i in reference..times.len() {
        if i > reference {
            if let Some(f) = forcing_sq {
                forcing += 0.5 * (f[i] + f[i - 1]) * (times[i] - times[i - 1]);
            }
        }
        out[i] = (c * (times[i] - t_ref)).exp() * (energies[reference] + forcing);
    }
    out
}

/// Streaming energy accumulation.
#[derive(Default)]
pub struct EnergyMonitor {
    pub series: EnergySeries,
}

impl Observer for EnergyMonitor {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        if let Some(next) = view.next {
            self.series.times.push(view.t + 0.5 * view.dt);
            self.series.parts.push(EnergyParts::between(&view.grid, view.dt, view.cur, next));
        }
        Ok(())
    }
}
