//! The four parts of `M dq = int dq u_1^- u_2^+` on the backscattering
//! cube, and the two-sided check of the pseudo-linearization identity.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{neg, UniformGrid1, Vec3};
use crate::potential::{SpaceTimePotential, TimeReversed};
use crate::solver::lattice_range;
use crate::solver::observers::Observer;
use crate::solver::plane_wave::{IncidentWave, ScatterRun, ScatterSide};

use super::cube::{principal_cube, scattered_pairing_cube, CubeLayout, DataCube, PairingCache};
use super::pairing::{fdtd_plane_pairing, scatter_box, synthesis_dt, ProductPairing, RestrictedRecorder, SupportNodes};
use super::{principal_term, Backend, Synthesis};

/// Which part of `M` to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MComponent {
    /// `int dq delta_eta(t + s - x . omega) delta_eta(t + s' + x . omega)`.
    M00,
    /// `int dq u_1sc^-(s, omega) delta_eta(t + s' + x . omega)`.
    M10,
    /// `int dq delta_eta(t + s - x . omega) u_2sc^+(s', -omega)`.
    M01,
    /// `int dq u_1sc^-(s, omega) u_2sc^+(s', -omega)`.
    M11,
    Total,
}

impl MComponent {
    pub fn name(&self) -> &'static str {
        match self {
            MComponent::M00 => "m00",
            MComponent::M10 => "m10",
            MComponent::M01 => "m01",
            MComponent::M11 => "m11",
            MComponent::Total => "total",
        }
    }
}

/// Evaluates one part of `M dq` on `layout`. The scattered fields of
/// `M10`/`M01` come from `synth.backend`; `M11` always uses FDTD runs.
pub fn m_component(
    q1: &dyn SpaceTimePotential,
    q2: &dyn SpaceTimePotential,
    dq: &dyn SpaceTimePotential,
    which: MComponent,
    layout: &CubeLayout,
    synth: &Synthesis,
    cache: &dyn PairingCache,
) -> Result<DataCube> {
    synth.validate()?;
    let mut cube = match which {
        MComponent::M00 => principal_cube(dq, layout, &synth.mollifier()?)?,
        MComponent::M10 => scattered_pairing_cube(q1, Some(dq), layout, synth, cache)?,
        MComponent::M01 => m01_by_reversal(q2, dq, layout, synth, cache)?,
        MComponent::M11 => m11_fdtd(q1, q2, dq, layout, synth)?,
        MComponent::Total => {
            let mut total = m_component(q1, q2, dq, MComponent::M00, layout, synth, cache)?;
            for part in [MComponent::M10, MComponent::M01, MComponent::M11] {
                let c = m_component(q1, q2, dq, part, layout, synth, cache)?;
                total = total.combine(1.0, &c, 1.0)?;
            }
            total
        }
    };
    cube.label = which.name().to_string();
    Ok(cube)
}

/// `u_2sc^+(t, x; s', -omega) = u~_2sc^-(-t, x; -s', omega)` for the
/// time-reversed potential, so after `t -> -t` the `M01` entry at
/// `(sigma', sigma)` is the `M10`-type pairing of `q~_2` with weight `dq~`
/// at `(-sigma', sigma)`.
fn m01_by_reversal(
    q2: &dyn SpaceTimePotential,
    dq: &dyn SpaceTimePotential,
    layout: &CubeLayout,
    synth: &Synthesis,
    cache: &dyn PairingCache,
) -> Result<DataCube> {
    let sp = layout.sigma_prime;
    let mirrored = CubeLayout {
        sigma_prime: UniformGrid1::new(-sp.end(), sp.step, sp.n)?,
        sigma: layout.sigma,
        dirs: layout.dirs.clone(),
    };
    let q2r = TimeReversed(q2);
    let dqr = TimeReversed(dq);
    let reversed = scattered_pairing_cube(&q2r, Some(&dqr), &mirrored, synth, cache)?;
    let mut out = DataCube::zeros(layout.clone(), synth.eta, "m01");
    for i in 0..sp.n {
        for d in 0..layout.dirs.len() {
            for j in 0..layout.sigma.n {
                out.values[layout.index(i, d, j)] = reversed.get(sp.n - 1 - i, d, j);
            }
        }
    }
    Ok(out)
}

fn delay_key(s: f64) -> i64 {
    (s * 1e9).round() as i64
}

/// A box shared by a set of runs, so that their node indices agree.
fn common_box(
    runs: &[(&dyn SpaceTimePotential, f64, ScatterSide, f64)],
    measure_radius: f64,
    synth: &Synthesis,
) -> Option<f64> {
    runs.iter()
        .filter_map(|&(q, s, side, limit)| scatter_box(q, s, side, limit, measure_radius, synth))
        .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))))
}

#[allow(clippy::too_many_arguments)]
fn scatter_run<'a>(
    q: &'a dyn SpaceTimePotential,
    s: f64,
    omega: Vec3,
    side: ScatterSide,
    t_limit: f64,
    box_radius: f64,
    measure_radius: f64,
    synth: &Synthesis,
) -> Result<ScatterRun<'a>> {
    Ok(ScatterRun {
        q,
        s,
        omega,
        mollifier: synth.mollifier()?,
        h: synth.h,
        cfl: synth.cfl,
        box_radius,
        t_limit,
        side,
        measure_radius,
    })
}

fn m11_fdtd(
    q1: &dyn SpaceTimePotential,
    q2: &dyn SpaceTimePotential,
    dq: &dyn SpaceTimePotential,
    layout: &CubeLayout,
    synth: &Synthesis,
) -> Result<DataCube> {
    if synth.backend != Backend::Fdtd {
        log::info!("M11 is evaluated from FDTD runs regardless of the configured backend");
    }
    let mut out = DataCube::zeros(layout.clone(), synth.eta, "m11");
    if dq.n_terms() == 0 || q1.n_terms() == 0 || q2.n_terms() == 0 {
        return Ok(out);
    }
    let dt = synthesis_dt(synth);
    let (w_lo, w_hi) = dq.time_support();
    let rec_limit = w_hi + 2.0 * dt;
    let pair_limit = w_lo - 2.0 * dt;
    let rho_w = dq.rho();
    for d in 0..layout.dirs.len() {
        let omega = layout.dirs.dirs[d];
        let mut incident: BTreeMap<i64, f64> = BTreeMap::new();
        let mut measured: BTreeMap<i64, (f64, Vec<(usize, i64)>)> = BTreeMap::new();
        for i in 0..layout.sigma_prime.n {
            for j in 0..layout.sigma.n {
                let (s, sp) = layout.delays(i, j);
                incident.insert(delay_key(s), s);
                measured.entry(delay_key(sp)).or_insert((sp, Vec::new())).1.push((layout.index(i, d, j), delay_key(s)));
            }
        }
        let mut runs: Vec<(&dyn SpaceTimePotential, f64, ScatterSide, f64)> = Vec::new();
        runs.extend(incident.values().map(|&s| (q1, s, ScatterSide::Minus, rec_limit)));
        runs.extend(measured.values().map(|(sp, _)| (q2, *sp, ScatterSide::Plus, pair_limit)));
        let Some(box_radius) = common_box(&runs, rho_w, synth) else {
            continue;
        };
        let recorders: Vec<(i64, RestrictedRecorder<'_>)> = incident
            .par_iter()
            .map(|(&key, &s)| -> Result<(i64, RestrictedRecorder<'_>)> {
                let mut rec = RestrictedRecorder::new(dq);
                if scatter_box(q1, s, ScatterSide::Minus, rec_limit, rho_w, synth).is_some() {
                    let run = scatter_run(q1, s, omega, ScatterSide::Minus, rec_limit, box_radius, rho_w, synth)?;
                    run.run(&mut [&mut rec as &mut dyn Observer])?;
                }
                Ok((key, rec))
            })
            .collect::<Result<_>>()?;
        let by_key: BTreeMap<i64, &RestrictedRecorder<'_>> = recorders.iter().map(|(k, r)| (*k, r)).collect();
        let results: Vec<Vec<(usize, f64)>> = measured
            .par_iter()
            .map(|(_, (sp, entries))| -> Result<Vec<(usize, f64)>> {
                if scatter_box(q2, *sp, ScatterSide::Plus, pair_limit, rho_w, synth).is_none() {
                    return Ok(Vec::new());
                }
                let recs: Vec<&RestrictedRecorder<'_>> = entries.iter().map(|(_, k)| by_key[k]).collect();
                let mut pairing = ProductPairing::new(dq, recs, vec![None; entries.len()]);
                let run = scatter_run(q2, *sp, neg(omega), ScatterSide::Plus, pair_limit, box_radius, rho_w, synth)?;
                run.run(&mut [&mut pairing as &mut dyn Observer])?;
                Ok(entries.iter().map(|e| e.0).zip(pairing.values).collect())
            })
            .collect::<Result<_>>()?;
        for (idx, v) in results.into_iter().flatten() {
            out.values[idx] = v;
        }
    }
    Ok(out)
}

/// Both sides of `A_1(s', omega'; s, omega) - A_2(s', omega'; s, omega) =
/// int (q_1 - q_2) u_1^-(s, omega) u_2^+(s', omega')` at one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudolinSample {
    pub s: f64,
    pub omega: Vec3,
    pub s_prime: f64,
    pub omega_prime: Vec3,
    /// Difference of two data syntheses.
    pub lhs: f64,
    /// Direct space-time quadrature of the product of the two solutions.
    pub rhs: f64,
}

/// One incident configuration `(s, omega)` with its measurements `(s', omega')`.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudolinGroup {
    pub s: f64,
    pub omega: Vec3,
    pub measurements: Vec<(f64, Vec3)>,
}

/// Evaluates both sides of the identity by independent routes. The left
/// side synthesizes `A_1` and `A_2` (closed-form principal part plus an FDTD
/// plane pairing); the right side records `u_1sc^-` on the support of
/// `q_1 - q_2`, runs `u_2sc^+` and sums
/// `dq (delta_1 + u_1sc)(delta_2 + u_2sc)` over the lattice. The
/// delta-delta product is counted twice, matching the pair weight used by
/// the synthesis.
pub fn pseudolinearization_check(
    q1: &dyn SpaceTimePotential,
    q2: &dyn SpaceTimePotential,
    groups: &[PseudolinGroup],
    synth: &Synthesis,
) -> Result<Vec<PseudolinSample>> {
    synth.validate()?;
    if synth.backend != Backend::Fdtd {
        return Err(invalid("the pseudo-linearization check needs the FDTD backend"));
    }
    let dq = crate::potential::Combination::difference(q1, q2);
    let mollifier = synth.mollifier()?;
    let dt = synthesis_dt(synth);
    let (w_lo, w_hi) = dq.time_support();
    let rho_w = dq.rho();
    let mut out = Vec::new();
    for g in groups {
        // Left side: one run per potential and measurement direction.
        let mut lhs = vec![0.0; g.measurements.len()];
        let mut done = vec![false; g.measurements.len()];
        for k in 0..g.measurements.len() {
            if done[k] {
                continue;
            }
            let omega_p = g.measurements[k].1;
            let members: Vec<usize> = (k..g.measurements.len()).filter(|&j| g.measurements[j].1 == omega_p).collect();
            let delays: Vec<f64> = members.iter().map(|&j| g.measurements[j].0).collect();
            let p1 = fdtd_plane_pairing(q1, q1, g.s, g.omega, omega_p, &delays, synth)?;
            let p2 = fdtd_plane_pairing(q2, q2, g.s, g.omega, omega_p, &delays, synth)?;
            for (m, &j) in members.iter().enumerate() {
                let sp = delays[m];
                let a1 = principal_term(q1, g.s, g.omega, sp, omega_p, Some(&mollifier))? + p1[m];
                let a2 = principal_term(q2, g.s, g.omega, sp, omega_p, Some(&mollifier))? + p2[m];
                lhs[j] = a1 - a2;
                done[j] = true;
            }
        }
        // Right side.
        let rec_limit = w_hi + 2.0 * dt;
        let pair_limit = w_lo - 2.0 * dt;
        let mut runs: Vec<(&dyn SpaceTimePotential, f64, ScatterSide, f64)> =
            vec![(q1, g.s, ScatterSide::Minus, rec_limit)];
        runs.extend(g.measurements.iter().map(|&(sp, _)| (q2, sp, ScatterSide::Plus, pair_limit)));
        let box_radius = common_box(&runs, rho_w, synth)
            .unwrap_or(rho_w + 4.0 * synth.h)
            .max(rho_w + 4.0 * synth.h);
        let mut rec = RestrictedRecorder::new(&dq);
        if scatter_box(q1, g.s, ScatterSide::Minus, rec_limit, rho_w, synth).is_some() {
            let run = scatter_run(q1, g.s, g.omega, ScatterSide::Minus, rec_limit, box_radius, rho_w, synth)?;
            run.run(&mut [&mut rec as &mut dyn Observer])?;
        }
        let incident1 = IncidentWave { s: g.s, omega: g.omega, mollifier };
        let grid = crate::geometry::Grid3::centered(box_radius, synth.h)?;
        let mut nodes = SupportNodes::new(&dq, &grid);
        let (n_lo, n_hi) = lattice_range(w_lo - 2.0 * dt, w_hi + 2.0 * dt, dt);
        let rhs: Vec<f64> = g
            .measurements
            .par_iter()
            .map(|&(sp, omega_p)| -> Result<f64> {
                let mut total = 0.0;
                if scatter_box(q2, sp, ScatterSide::Plus, pair_limit, rho_w, synth).is_some() {
                    let mut pairing = ProductPairing::new(&dq, vec![&rec], vec![Some(incident1)]);
                    let run = scatter_run(q2, sp, omega_p, ScatterSide::Plus, pair_limit, box_radius, rho_w, synth)?;
                    run.run(&mut [&mut pairing as &mut dyn Observer])?;
                    total += pairing.values[0];
                }
                Ok(total)
            })
            .collect::<Result<_>>()?;
        // Terms without u_2sc: dq (2 delta_1 + u_1sc) delta_2 on every level.
        let cell = grid.cell_volume() * dt;
        let mut w_buf = Vec::new();
        let mut direct = vec![0.0; g.measurements.len()];
        for n in n_lo..=n_hi {
            let t = n as f64 * dt;
            if !nodes.weights_at(&dq, t, &mut w_buf) {
                continue;
            }
            let stored = rec.level(n);
            for (k, &(sp, omega_p)) in g.measurements.iter().enumerate() {
                let incident2 = IncidentWave { s: sp, omega: omega_p, mollifier };
                let mut acc = 0.0;
                for (j, &w) in w_buf.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let x = nodes.x[j];
                    let d2 = incident2.eval(t, x);
                    if d2 == 0.0 {
                        continue;
                    }
                    let left = 2.0 * incident1.eval(t, x) + stored.map_or(0.0, |s| s[j]);
                    acc += w * left * d2;
                }
                direct[k] += acc * cell;
            }
        }
        for (k, &(sp, omega_p)) in g.measurements.iter().enumerate() {
            out.push(PseudolinSample {
                s: g.s,
                omega: g.omega,
                s_prime: sp,
                omega_prime: omega_p,
                lhs: lhs[k],
                rhs: rhs[k] + direct[k],
            });
        }
    }
    Ok(out)
}
