//! Streaming consumers of solver time levels.

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::{norm, Grid3};

/// One time level `u^n` with its neighbours, when they exist.
#[derive(Clone, Copy)]
pub struct StepView<'a> {
    pub n: i64,
    pub t: f64,
    pub dt: f64,
    pub grid: Grid3,
    pub prev: Option<&'a [f64]>,
    pub cur: &'a [f64],
    pub next: Option<&'a [f64]>,
}

impl StepView<'_> {
    /// Centred time derivative at node `idx`, one-sided at the run ends.
    #[inline]
    pub fn ut(&self, idx: usize) -> f64 {
        match (self.prev, self.next) {
            (Some(p), Some(n)) => (n[idx] - p[idx]) / (2.0 * self.dt),
            (None, Some(n)) => (n[idx] - self.cur[idx]) / self.dt,
            (Some(p), None) => (self.cur[idx] - p[idx]) / self.dt,
            (None, None) => 0.0,
        }
    }
}

pub trait Observer {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()>;
}

/// Stores every `stride`-th level as a [`SpaceTimeField`].
pub struct Recorder {
    stride: usize,
    grid: Option<Grid3>,
    first_n: i64,
    dt: f64,
    count: usize,
    values: Vec<f64>,
}

impl Recorder {
    pub fn new(stride: usize) -> Self {
        Self { stride: stride.max(1), grid: None, first_n: 0, dt: 0.0, count: 0, values: Vec::new() }
    }

    pub fn into_field(self) -> Result<SpaceTimeField> {
        let grid = self.grid.ok_or(Error::EmptyTimeAxis)?;
        SpaceTimeField::new(
            grid,
            self.first_n as f64 * self.dt,
            self.dt * self.stride as f64,
            self.count,
            self.values,
        )
    }
}

impl Observer for Recorder {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        if self.grid.is_none() {
            self.grid = Some(view.grid);
            self.first_n = view.n;
            self.dt = view.dt;
        }
        if ((view.n - self.first_n) as usize).is_multiple_of(self.stride) {
            self.values.extend_from_slice(view.cur);
            self.count += 1;
        }
        Ok(())
    }
}

/// Presents a run of the time-reversed problem as the forward-time field:
/// level `n` at time `t` becomes level `-n` at time `-t` with neighbours
/// swapped. Levels then arrive in decreasing time order.
pub struct TimeReversedObserver<'o>(pub &'o mut dyn Observer);

impl Observer for TimeReversedObserver<'_> {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        let mirrored = StepView {
            n: -view.n,
            t: -view.t,
            dt: view.dt,
            grid: view.grid,
            prev: view.next,
            cur: view.cur,
            next: view.prev,
        };
        self.0.observe(&mirrored)
    }
}

/// Tracks the largest value outside the light cone `|x| > r0 + (t - t0) + margin`
/// relative to the running field maximum.
pub struct ConeMonitor {
    pub r0: f64,
    pub t0: f64,
    pub margin: f64,
    pub worst_ratio: f64,
    pub field_max: f64,
    pub outside_max: f64,
}

impl ConeMonitor {
    pub fn new(r0: f64, t0: f64, margin: f64) -> Self {
        Self { r0, t0, margin, worst_ratio: 0.0, field_max: 0.0, outside_max: 0.0 }
    }
}

impl Observer for ConeMonitor {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        let radius = self.r0 + (view.t - self.t0) + self.margin;
        let mut inside = 0.0f64;
        let mut outside = 0.0f64;
        for (idx, &v) in view.cur.iter().enumerate() {
            if norm(view.grid.point_of(idx)) > radius {
                outside = outside.max(v.abs());
            } else {
                inside = inside.max(v.abs());
            }
        }
        self.field_max = self.field_max.max(inside.max(outside));
        self.outside_max = self.outside_max.max(outside);
        if self.field_max > 0.0 {
            self.worst_ratio = self.worst_ratio.max(outside / self.field_max);
        }
        Ok(())
    }
}

/// Tracks, inside `|x| <= radius`, the largest value where the phase
/// `sign * (t + s - x . omega)` is below `-slack`, relative to the largest
/// value overall.
pub struct HalfSpaceMonitor {
    pub s: f64,
    pub omega: crate::geometry::Vec3,
    pub sign: f64,
    pub slack: f64,
    pub radius: f64,
    pub field_max: f64,
    pub outside_max: f64,
}

impl HalfSpaceMonitor {
    pub fn new(s: f64, omega: crate::geometry::Vec3, sign: f64, slack: f64, radius: f64) -> Self {
        Self { s, omega, sign, slack, radius, field_max: 0.0, outside_max: 0.0 }
    }

    pub fn ratio(&self) -> f64 {
        if self.field_max > 0.0 {
            self.outside_max / self.field_max
        } else {
            0.0
        }
    }
}

impl Observer for HalfSpaceMonitor {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        for (idx, &v) in view.cur.iter().enumerate() {
            let x = view.grid.point_of(idx);
            if norm(x) > self.radius {
                continue;
            }
            let a = v.abs();
            self.field_max = self.field_max.max(a);
            if self.sign * (view.t + self.s - crate::geometry::dot(x, self.omega)) < -self.slack {
                self.outside_max = self.outside_max.max(a);
            }
        }
        Ok(())
    }
}
