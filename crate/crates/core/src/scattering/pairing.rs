//! Streaming observers that pair a solver run with a weight `w(t, x)`
//! supported in a small part of the box, and the FDTD drivers built on them.

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{dot, norm, sub, Grid3, Vec3};
use crate::mollifier::Mollifier;
use crate::potential::SpaceTimePotential;
use crate::solver::observers::{Observer, StepView};
use crate::solver::plane_wave::{IncidentWave, ScatterRun, ScatterSide};

use super::Synthesis;

/// Grid nodes inside the spatial support of a weight, with the weight's
/// space factors cached per term while the term is active.
pub struct SupportNodes {
    pub idx: Vec<usize>,
    pub x: Vec<Vec3>,
    columns: Vec<Option<Vec<f64>>>,
}

impl SupportNodes {
    pub fn new(weight: &dyn SpaceTimePotential, grid: &Grid3) -> Self {
        let rho = weight.rho();
        let balls: Vec<(Vec3, f64)> = (0..weight.n_terms())
            .map(|k| {
                let s = weight.term_support(k);
                (s.center, s.radius)
            })
            .collect();
        let idx: Vec<usize> = (0..grid.len())
            .into_par_iter()
            .filter(|&i| {
                let x = grid.point_of(i);
                norm(x) < rho && balls.iter().any(|&(c, r)| norm(sub(x, c)) < r)
            })
            .collect();
        let x = idx.iter().map(|&i| grid.point_of(i)).collect();
        Self { idx, x, columns: vec![None; weight.n_terms()] }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    /// Writes `w(t, x_i)` into `out`; returns false when the weight vanishes
    /// identically at `t`. Columns of terms inactive at `t` are released.
    pub fn weights_at(&mut self, weight: &dyn SpaceTimePotential, t: f64, out: &mut Vec<f64>) -> bool {
        out.clear();
        out.resize(self.idx.len(), 0.0);
        let mut any = false;
        for k in 0..weight.n_terms() {
            let g = weight.time_factor(k, t);
            if g == 0.0 {
                self.columns[k] = None;
                continue;
            }
            let xs = &self.x;
            let col = self.columns[k].get_or_insert_with(|| xs.par_iter().map(|&x| weight.space_factor(k, x)).collect());
            for (o, c) in out.iter_mut().zip(col.iter()) {
                *o += g * c;
            }
            any = true;
        }
        any
    }
}

/// Accumulates `int w(t, x) u(t, x) delta_eta(t + s_k - x . omega') dt dx` for
/// a list of delays `s_k`. Products are deposited into bins of `x . omega'`
/// (width h/8, linear sharing), so each level costs one pass over the
/// support plus one short sum per delay.
pub struct PlanePairing<'a> {
    weight: &'a dyn SpaceTimePotential,
    omega_prime: Vec3,
    mollifier: Mollifier,
    delays: Vec<f64>,
    nodes: Option<SupportNodes>,
    bins: Vec<(usize, f64)>,
    bin_lo: f64,
    bin_width: f64,
    work: Vec<f64>,
    w_buf: Vec<f64>,
    pub values: Vec<f64>,
}

impl<'a> PlanePairing<'a> {
    pub fn new(weight: &'a dyn SpaceTimePotential, omega_prime: Vec3, mollifier: Mollifier, delays: Vec<f64>) -> Self {
        let n = delays.len();
        Self {
            weight,
            omega_prime,
            mollifier,
            delays,
            nodes: None,
            bins: Vec::new(),
            bin_lo: 0.0,
            bin_width: 1.0,
            work: Vec::new(),
            w_buf: Vec::new(),
            values: vec![0.0; n],
        }
    }

    fn init(&mut self, grid: &Grid3) {
        let nodes = SupportNodes::new(self.weight, grid);
        let rho = self.weight.rho();
        self.bin_width = grid.h / 8.0;
        self.bin_lo = -rho - 2.0 * self.bin_width;
        let nbins = ((2.0 * rho + 4.0 * self.bin_width) / self.bin_width).ceil() as usize + 2;
        self.bins = nodes
            .x
            .iter()
            .map(|&x| {
                let u = (dot(x, self.omega_prime) - self.bin_lo) / self.bin_width;
                let b = u.floor();
                (b as usize, u - b)
            })
            .collect();
        self.work = vec![0.0; nbins];
        self.nodes = Some(nodes);
    }
}

impl Observer for PlanePairing<'_> {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        if self.nodes.is_none() {
            self.init(&view.grid);
        }
        let nodes = self.nodes.as_mut().unwrap();
        if nodes.is_empty() || !nodes.weights_at(self.weight, view.t, &mut self.w_buf) {
            return Ok(());
        }
        self.work.iter_mut().for_each(|v| *v = 0.0);
        for ((&i, &w), &(b, f)) in nodes.idx.iter().zip(&self.w_buf).zip(&self.bins) {
            let v = w * view.cur[i];
            if v != 0.0 {
                self.work[b] += (1.0 - f) * v;
                self.work[b + 1] += f * v;
            }
        }
        let cell = view.grid.cell_volume() * view.dt;
        let reach = self.mollifier.support_radius();
        let last = self.work.len() - 1;
        for (k, &s) in self.delays.iter().enumerate() {
            let centre = view.t + s;
            let lo = ((centre - reach - self.bin_lo) / self.bin_width).floor().max(0.0) as usize;
            let hi = (((centre + reach - self.bin_lo) / self.bin_width).ceil().max(0.0) as usize).min(last);
            if lo > hi {
                continue;
            }
            let mut acc = 0.0;
            for b in lo..=hi {
                let v = self.work[b];
                if v != 0.0 {
                    acc += v * self.mollifier.delta(centre - (self.bin_lo + b as f64 * self.bin_width));
                }
            }
            self.values[k] += acc * cell;
        }
        Ok(())
    }
}

/// Keeps the levels of a run restricted to the support nodes of a weight,
/// for the levels at which the weight is active.
pub struct RestrictedRecorder<'a> {
    weight: &'a dyn SpaceTimePotential,
    nodes: Option<SupportNodes>,
    t_range: (f64, f64),
    levels: std::collections::BTreeMap<i64, Vec<f64>>,
}

impl<'a> RestrictedRecorder<'a> {
    pub fn new(weight: &'a dyn SpaceTimePotential) -> Self {
        let (lo, hi) = weight.time_support();
        Self { weight, nodes: None, t_range: (lo, hi), levels: Default::default() }
    }

    /// Values at lattice level `n`, if the run produced them.
    pub fn level(&self, n: i64) -> Option<&[f64]> {
        self.levels.get(&n).map(|v| v.as_slice())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.as_ref().map_or(0, |n| n.len())
    }
}

impl Observer for RestrictedRecorder<'_> {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        if self.nodes.is_none() {
            self.nodes = Some(SupportNodes::new(self.weight, &view.grid));
        }
        let slack = 2.0 * view.dt;
        if view.t < self.t_range.0 - slack || view.t > self.t_range.1 + slack {
            return Ok(());
        }
        let nodes = self.nodes.as_ref().unwrap();
        self.levels.insert(view.n, nodes.idx.iter().map(|&i| view.cur[i]).collect());
        Ok(())
    }
}

/// Accumulates `int w (incident + v_k) u dt dx` for each recorded run `v_k`,
/// where `u` is the observed run. `incident`, when present, is a plane wave
/// per recorded run added to the recorded values.
pub struct ProductPairing<'a, 'r> {
    weight: &'a dyn SpaceTimePotential,
    recorded: Vec<&'r RestrictedRecorder<'a>>,
    incident: Vec<Option<IncidentWave>>,
    nodes: Option<SupportNodes>,
    w_buf: Vec<f64>,
    pub values: Vec<f64>,
}

impl<'a, 'r> ProductPairing<'a, 'r> {
    pub fn new(
        weight: &'a dyn SpaceTimePotential,
        recorded: Vec<&'r RestrictedRecorder<'a>>,
        incident: Vec<Option<IncidentWave>>,
    ) -> Self {
        let n = recorded.len();
        assert_eq!(incident.len(), n, "one incident entry per recorded run");
        Self { weight, recorded, incident, nodes: None, w_buf: Vec::new(), values: vec![0.0; n] }
    }
}

impl Observer for ProductPairing<'_, '_> {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        if self.nodes.is_none() {
            self.nodes = Some(SupportNodes::new(self.weight, &view.grid));
        }
        let nodes = self.nodes.as_mut().unwrap();
        if nodes.is_empty() || !nodes.weights_at(self.weight, view.t, &mut self.w_buf) {
            return Ok(());
        }
        let cell = view.grid.cell_volume() * view.dt;
        for (k, rec) in self.recorded.iter().enumerate() {
            let stored = rec.level(view.n);
            let wave = self.incident[k];
            if stored.is_none() && wave.is_none() {
                continue;
            }
            let mut acc = 0.0;
            for (j, (&i, &w)) in nodes.idx.iter().zip(&self.w_buf).enumerate() {
                if w == 0.0 {
                    continue;
                }
                let mut left = stored.map_or(0.0, |s| s[j]);
                if let Some(wave) = &wave {
                    left += wave.eval(view.t, nodes.x[j]);
                }
                acc += w * left * view.cur[i];
            }
            self.values[k] += acc * cell;
        }
        Ok(())
    }
}

/// Lattice time step of a synthesis.
pub fn synthesis_dt(synth: &Synthesis) -> f64 {
    synth.cfl * synth.h / 3f64.sqrt()
}

/// Box radius for a scattered run of `field_q` with delay `s` that must stay
/// reflection free in `B(0, measure_radius)` until `t_limit`; `None` when the
/// run would be empty.
pub fn scatter_box(
    field_q: &dyn SpaceTimePotential,
    s: f64,
    side: ScatterSide,
    t_limit: f64,
    measure_radius: f64,
    synth: &Synthesis,
) -> Option<f64> {
    let dt = synthesis_dt(synth);
    let reach = 5.0 * synth.eta;
    let (t0, t1) = field_q.time_support();
    let duration = match side {
        ScatterSide::Minus => t_limit - t0.max(-s - field_q.rho() - reach),
        ScatterSide::Plus => t1.min(-s + field_q.rho() + reach) - t_limit,
    };
    if field_q.n_terms() == 0 || duration <= 0.0 {
        return None;
    }
    Some(0.5 * (field_q.rho() + measure_radius + duration + 6.0 * dt) + 3.0 * synth.h)
}

/// Time up to which (`Minus`) or down to which (`Plus`) a pairing of weight
/// `w` against `delta_eta(t + s_k - x . omega')` needs the field.
pub fn pairing_limit(weight: &dyn SpaceTimePotential, delays: &[f64], side: ScatterSide, synth: &Synthesis) -> f64 {
    let (lo, hi) = weight.time_support();
    let reach = 5.0 * synth.eta;
    let rho = weight.rho();
    let dt = synthesis_dt(synth);
    match side {
        ScatterSide::Minus => {
            let s_min = delays.iter().cloned().fold(f64::INFINITY, f64::min);
            hi.min(rho - s_min + reach) + 2.0 * dt
        }
        ScatterSide::Plus => {
            let s_max = delays.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            lo.max(-rho - s_max - reach) - 2.0 * dt
        }
    }
}

/// `int w u_sc(t, x; s, omega) delta_eta(t + s_k - x . omega') dt dx` for each
/// `s_k`, with `u_sc` the scattered part of `u^-` (or `u^+`) for `field_q`,
/// from one streaming FDTD solve.
#[allow(clippy::too_many_arguments)]
pub fn fdtd_plane_pairing_side(
    field_q: &dyn SpaceTimePotential,
    weight: &dyn SpaceTimePotential,
    s: f64,
    omega: Vec3,
    side: ScatterSide,
    omega_prime: Vec3,
    delays: &[f64],
    synth: &Synthesis,
) -> Result<Vec<f64>> {
    synth.validate()?;
    if delays.is_empty() || weight.n_terms() == 0 {
        return Ok(vec![0.0; delays.len()]);
    }
    let mollifier = synth.mollifier()?;
    let t_limit = pairing_limit(weight, delays, side, synth);
    let Some(box_radius) = scatter_box(field_q, s, side, t_limit, weight.rho(), synth) else {
        return Ok(vec![0.0; delays.len()]);
    };
    let mut pairing = PlanePairing::new(weight, omega_prime, mollifier, delays.to_vec());
    let run = ScatterRun {
        q: field_q,
        s,
        omega,
        mollifier,
        h: synth.h,
        cfl: synth.cfl,
        box_radius,
        t_limit,
        side,
        measure_radius: weight.rho(),
    };
    run.run(&mut [&mut pairing])?;
    Ok(pairing.values)
}

/// [`fdtd_plane_pairing_side`] for the incoming solution `u^-`.
pub fn fdtd_plane_pairing(
    field_q: &dyn SpaceTimePotential,
    weight: &dyn SpaceTimePotential,
    s: f64,
    omega: Vec3,
    omega_prime: Vec3,
    delays: &[f64],
    synth: &Synthesis,
) -> Result<Vec<f64>> {
    fdtd_plane_pairing_side(field_q, weight, s, omega, ScatterSide::Minus, omega_prime, delays, synth)
}
