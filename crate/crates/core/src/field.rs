//! Sampled fields: volumes on a [`Grid3`] and space-time stacks of volumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid3, Vec3};

/// Incident plane-wave parameters attached to a scattering field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentMeta {
    pub s: f64,
    pub omega: Vec3,
    pub eta: f64,
}

/// Samples of `f(x)` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub grid: Grid3,
    pub values: Vec<f64>,
}

impl Volume {
    pub fn new(grid: Grid3, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn<F: Fn(Vec3) -> f64 + Sync>(grid: Grid3, f: F) -> Self {
        Self { values: grid.sample(f), grid }
    }

    pub fn l2_norm(&self) -> f64 {
        (crate::reduce::sum_sq(&self.values) * self.grid.cell_volume()).sqrt()
    }

    /// Relative L2 distance `|self - reference| / |reference|`, optionally
    /// restricted to nodes with `|x| < radius`.
    pub fn relative_error(&self, reference: &Volume, radius: Option<f64>) -> Result<f64> {
        if self.grid != reference.grid {
            return Err(Error::GridMismatch("volumes on different grids".into()));
        }
        let mask = |i: usize| match radius {
            Some(r) => crate::geometry::norm(self.grid.point_of(i)) < r,
            None => true,
        };
        let num = crate::reduce::par_pairwise_sum_by(self.values.len(), &|i| {
            if mask(i) {
                let d = self.values[i] - reference.values[i];
                d * d
            } else {
                0.0
            }
        });
        let den = crate::reduce::par_pairwise_sum_by(self.values.len(), &|i| {
            if mask(i) {
                reference.values[i] * reference.values[i]
            } else {
                0.0
            }
        });
        if den == 0.0 {
            return Err(Error::UndefinedRatio(den));
        }
        Ok((num / den).sqrt())
    }
}

/// `u(t_n, x)` for `t_n = t_start + n dt`, `n < nt`, stored slice after slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub grid: Grid3,
    pub t_start: f64,
    pub dt: f64,
    pub nt: usize,
    pub values: Vec<f64>,
    pub meta: Option<IncidentMeta>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid3, t_start: f64, dt: f64, nt: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * nt {
            return Err(Error::GridMismatch(format!(
                "{} values for {nt} slices of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { grid, t_start, dt, nt, values, meta: None })
    }

    pub fn zeros(grid: Grid3, t_start: f64, dt: f64, nt: usize) -> Self {
        Self { grid, t_start, dt, nt, values: vec![0.0; grid.len() * nt], meta: None }
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.dt
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        let m = self.grid.len();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        let m = self.grid.len();
        &mut self.values[n * m..(n + 1) * m]
    }

    /// The field `v(t, x) = u(-t, x)`: slices in reverse order.
    pub fn time_reversed(&self) -> SpaceTimeField {
        let mut values = Vec::with_capacity(self.values.len());
        for n in (0..self.nt).rev() {
            values.extend_from_slice(self.slice(n));
        }
        SpaceTimeField {
            grid: self.grid,
            t_start: -self.time(self.nt.saturating_sub(1)),
            dt: self.dt,
            nt: self.nt,
            values,
            meta: self.meta,
        }
    }

    pub fn max_abs(&self) -> f64 {
        crate::reduce::max_abs(&self.values)
    }

    /// Nearest stored slice index for time `t`, if within half a step.
    pub fn slice_index(&self, t: f64) -> Option<usize> {
        let u = (t - self.t_start) / self.dt;
        let n = u.round();
        if n < 0.0 || n >= self.nt as f64 || (u - n).abs() > 1e-6 {
            None
        } else {
            Some(n as usize)
        }
    }
}
