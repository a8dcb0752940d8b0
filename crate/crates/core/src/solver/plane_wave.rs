//! Plane-wave scattering solutions `u^-` (incoming) and `u^+` (outgoing).
//!
//! The scattered part `u_sc = u - delta_eta(t + s - x . omega)` solves
//! `(box + q) u_sc = -q delta_eta(t + s - x . omega)` with zero data before the
//! front reaches the potential, so only the support of q radiates and the box
//! can be sized by reflection travel time. `u^+` is obtained from `u^-` of the
//! time-reversed potential: `u^+(t, x; s, omega) = u~^-(-t, x; -s, -omega)`.

use crate::error::{Error, Result};
use crate::field::{IncidentMeta, SpaceTimeField};
use crate::geometry::{dot, neg, Grid3, Vec3};
use crate::mollifier::Mollifier;
use crate::potential::{SpaceTimePotential, TimeReversed};

use super::observers::{Observer, Recorder, TimeReversedObserver};
use super::{lattice_range, run, Boundary, Init, RunSummary, SolveSpec, SolveWindow, Source};

/// The mollified incident wave `delta_eta(t + s - x . omega)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncidentWave {
    pub s: f64,
    pub omega: Vec3,
    pub mollifier: Mollifier,
}

impl IncidentWave {
    #[inline]
    pub fn eval(&self, t: f64, x: Vec3) -> f64 {
        self.mollifier.delta(t + self.s - dot(x, self.omega))
    }

    #[inline]
    pub fn time_derivative(&self, t: f64, x: Vec3) -> f64 {
        self.mollifier.delta_prime(t + self.s - dot(x, self.omega))
    }

    /// `(u, u_t)` at time `t` on `grid`.
    pub fn cauchy(&self, grid: &Grid3, t: f64) -> (Vec<f64>, Vec<f64>) {
        (grid.sample(|x| self.eval(t, x)), grid.sample(|x| self.time_derivative(t, x)))
    }

    pub fn meta(&self) -> IncidentMeta {
        IncidentMeta { s: self.s, omega: self.omega, eta: self.mollifier.eta }
    }
}

/// Validates that the mollified front has not reached `B(0, rho)` at
/// `window.t_start` and returns the incident wave.
pub fn incident_plane_wave(s: f64, omega: Vec3, eta: f64, window: &SolveWindow, rho: f64) -> Result<IncidentWave> {
    let mollifier = Mollifier::new(eta)?;
    let bound = -s - rho - mollifier.support_radius();
    if !(window.t_start < bound) {
        return Err(Error::WindowTooLate { t_start: window.t_start, bound });
    }
    Ok(IncidentWave { s, omega, mollifier })
}

/// Which scattering solution a run produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScatterSide {
    /// `u^-`: incoming, computed forward in time up to `t_limit`.
    Minus,
    /// `u^+`: outgoing, computed backward in time down to `t_limit`.
    Plus,
}

/// A streaming solve of the scattered part of `u^-` or `u^+`.
pub struct ScatterRun<'a> {
    pub q: &'a dyn SpaceTimePotential,
    pub s: f64,
    pub omega: Vec3,
    pub mollifier: Mollifier,
    pub h: f64,
    pub cfl: f64,
    pub box_radius: f64,
    /// Last time needed (`Minus`) or first time needed (`Plus`).
    pub t_limit: f64,
    pub side: ScatterSide,
    /// Radius of the region where the field must be reflection free.
    pub measure_radius: f64,
}

impl ScatterRun<'_> {
    pub fn dt(&self) -> f64 {
        self.cfl * self.h / 3f64.sqrt()
    }

    /// First time at which the driving term can be nonzero, for the `Minus`
    /// problem with delay `s` and direction `omega`.
    fn source_onset(q: &dyn SpaceTimePotential, s: f64, mollifier: &Mollifier) -> f64 {
        let (t0, _) = q.time_support();
        t0.max(-s - q.rho() - mollifier.support_radius())
    }

    /// Runs the solve; observers always see forward-time levels of the
    /// requested solution (in decreasing time order for `Plus`).
    pub fn run(&self, observers: &mut [&mut dyn Observer]) -> Result<Option<RunSummary>> {
        match self.side {
            ScatterSide::Minus => self.run_minus(self.q, self.s, self.omega, self.t_limit, observers),
            ScatterSide::Plus => {
                let reversed = TimeReversed(self.q);
                let mut wrapped: Vec<TimeReversedObserver<'_>> =
                    observers.iter_mut().map(|o| TimeReversedObserver(&mut **o)).collect();
                let mut refs: Vec<&mut dyn Observer> = wrapped.iter_mut().map(|w| w as &mut dyn Observer).collect();
                self.run_minus(&reversed, -self.s, neg(self.omega), -self.t_limit, &mut refs)
            }
        }
    }

    fn run_minus(
        &self,
        q: &dyn SpaceTimePotential,
        s: f64,
        omega: Vec3,
        t_end: f64,
        observers: &mut [&mut dyn Observer],
    ) -> Result<Option<RunSummary>> {
        let dt = self.dt();
        let onset = Self::source_onset(q, s, &self.mollifier);
        let (n_onset, n_end) = lattice_range(onset, t_end, dt);
        let n_start = n_onset - 2;
        if n_end <= n_start + 1 {
            return Ok(None);
        }
        let window = SolveWindow {
            t_start: n_start as f64 * dt,
            t_end: n_end as f64 * dt,
            box_radius: self.box_radius,
            cfl: self.cfl,
        };
        window.check_reflection_free(q.rho(), self.measure_radius, self.h)?;
        let grid = Grid3::centered(self.box_radius, self.h)?;
        let spec = SolveSpec {
            grid,
            dt,
            cfl: self.cfl,
            n_start,
            n_end,
            q: Some(q),
            source: Source::PlaneWaveScatter { q, s, omega, mollifier: self.mollifier },
            init: Init::Zero,
            boundary: Boundary::Zero,
        };
        run(spec, observers).map(Some)
    }
}

fn check_start(q: &dyn SpaceTimePotential, s: f64, mollifier: &Mollifier, t_start: f64) -> Result<()> {
    let onset = ScatterRun::source_onset(q, s, mollifier);
    if t_start > onset {
        return Err(Error::WindowTooLate { t_start, bound: -s - q.rho() - mollifier.support_radius() });
    }
    Ok(())
}

/// `u_sc^-` on the full box of `window`, recorded at every level in
/// `[window.t_start, window.t_end]`.
pub fn scattered_minus(
    q: &dyn SpaceTimePotential,
    s: f64,
    omega: Vec3,
    eta: f64,
    window: &SolveWindow,
    h: f64,
) -> Result<SpaceTimeField> {
    let mollifier = Mollifier::new(eta)?;
    check_start(q, s, &mollifier, window.t_start)?;
    let grid = Grid3::centered(window.box_radius, h)?;
    let dt = window.dt(h);
    let (n_start, n_end) = lattice_range(window.t_start, window.t_end, dt);
    let mut rec = Recorder::new(1);
    run(
        SolveSpec {
            grid,
            dt,
            cfl: window.cfl,
            n_start,
            n_end,
            q: Some(q),
            source: Source::PlaneWaveScatter { q, s, omega, mollifier },
            init: Init::Zero,
            boundary: Boundary::Zero,
        },
        &mut [&mut rec],
    )?;
    let mut field = rec.into_field()?;
    field.meta = Some(IncidentMeta { s, omega, eta });
    Ok(field)
}

/// `u_sc^+` on the full box of `window`, computed as the time reversal of
/// `u~_sc^-(.; -s, -omega)` for `q~(t, x) = q(-t, x)`.
pub fn scattered_plus(
    q: &dyn SpaceTimePotential,
    s: f64,
    omega: Vec3,
    eta: f64,
    window: &SolveWindow,
    h: f64,
) -> Result<SpaceTimeField> {
    let reversed = TimeReversed(q);
    let mirror = SolveWindow { t_start: -window.t_end, t_end: -window.t_start, ..*window };
    let backward = scattered_minus(&reversed, -s, neg(omega), eta, &mirror, h)?;
    let mut field = backward.time_reversed();
    field.meta = Some(IncidentMeta { s, omega, eta });
    Ok(field)
}

/// The full `u^-` by the total-field formulation: exact incident levels as
/// initial data and exact incident values on the boundary. Only valid while
/// the scattered part has not reached the boundary.
pub fn total_minus(
    q: Option<&dyn SpaceTimePotential>,
    s: f64,
    omega: Vec3,
    eta: f64,
    window: &SolveWindow,
    h: f64,
    rho: f64,
) -> Result<SpaceTimeField> {
    let wave = incident_plane_wave(s, omega, eta, window, rho)?;
    let grid = Grid3::centered(window.box_radius, h)?;
    let dt = window.dt(h);
    let (n_start, n_end) = lattice_range(window.t_start, window.t_end, dt);
    let t0 = n_start as f64 * dt;
    let u0 = grid.sample(|x| wave.eval(t0, x));
    let u1 = grid.sample(|x| wave.eval(t0 + dt, x));
    let exact = move |t: f64, x: Vec3| wave.eval(t, x);
    let mut rec = Recorder::new(1);
    run(
        SolveSpec {
            grid,
            dt,
            cfl: window.cfl,
            n_start,
            n_end,
            q,
            source: Source::None,
            init: Init::TwoLevel { u0, u1 },
            boundary: Boundary::Exact(&exact),
        },
        &mut [&mut rec],
    )?;
    let mut field = rec.into_field()?;
    field.meta = Some(wave.meta());
    Ok(field)
}
