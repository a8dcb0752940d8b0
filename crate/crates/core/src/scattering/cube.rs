//! Backscattering data cubes `A~(sigma', sigma, omega) = A(s', -omega; s, omega)`
//! with `s = sigma' + sigma`, `s' = sigma' - sigma`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::born::BornExpansion;
use crate::error::{Error, Result};
use crate::geometry::{neg, DirectionSet, UniformGrid1};
use crate::mollifier::Mollifier;
use crate::potential::SpaceTimePotential;
use crate::radon::{sobolev_data_norm, sobolev_norm_on_window, Sinogram};
use crate::reduce::max_abs;
use crate::solver::plane_wave::ScatterSide;

use super::pairing::fdtd_plane_pairing_side;
use super::{Backend, Synthesis, SUPPORT_SLACK};

/// The three axes of a cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeLayout {
    pub sigma_prime: UniformGrid1,
    pub sigma: UniformGrid1,
    pub dirs: DirectionSet,
}

impl CubeLayout {
    pub fn len(&self) -> usize {
        self.sigma_prime.n * self.dirs.len() * self.sigma.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Storage index of entry `(sigma'_i, omega_d, sigma_j)`.
    #[inline]
    pub fn index(&self, i: usize, d: usize, j: usize) -> usize {
        (i * self.dirs.len() + d) * self.sigma.n + j
    }

    /// `(s, s')` of the entry at `(sigma'_i, sigma_j)`.
    #[inline]
    pub fn delays(&self, i: usize, j: usize) -> (f64, f64) {
        let (a, b) = (self.sigma_prime.value(i), self.sigma.value(j));
        (a + b, a - b)
    }

    /// The sigma grid must reach `rho + 10 eta` on both sides.
    pub fn check_sigma_coverage(&self, rho: f64, eta: f64) -> Result<()> {
        let need = rho + SUPPORT_SLACK * eta;
        if !self.sigma.covers(-need, need) {
            return Err(Error::OffsetCoverage {
                lo: self.sigma.start,
                hi: self.sigma.end(),
                need_lo: -need,
                need_hi: need,
            });
        }
        Ok(())
    }
}

/// Cube values laid out `[sigma'][direction][sigma]`, so each `sigma'`
/// slice is a sinogram over `(sigma, omega)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataCube {
    pub layout: CubeLayout,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub eta: f64,
    /// What produced the values, e.g. the backend name.
    pub label: String,
}

impl DataCube {
    pub fn zeros(layout: CubeLayout, eta: f64, label: impl Into<String>) -> Self {
        let n = layout.len();
        Self { layout, values: vec![0.0; n], eta, label: label.into() }
    }

    pub fn new(layout: CubeLayout, values: Vec<f64>, eta: f64, label: impl Into<String>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::GridMismatch(format!("{} values for a cube of {} entries", values.len(), layout.len())));
        }
        Ok(Self { layout, values, eta, label: label.into() })
    }

    pub fn slice_values(&self, i: usize) -> &[f64] {
        let block = self.layout.dirs.len() * self.layout.sigma.n;
        &self.values[i * block..(i + 1) * block]
    }

    /// The `sigma'_i` slice as a sinogram in `(sigma, omega)`.
    pub fn slice(&self, i: usize) -> Sinogram {
        Sinogram {
            offsets: self.layout.sigma,
            dirs: self.layout.dirs.clone(),
            values: self.slice_values(i).to_vec(),
        }
    }

    pub fn get(&self, i: usize, d: usize, j: usize) -> f64 {
        self.values[self.layout.index(i, d, j)]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn same_layout(&self, other: &DataCube) -> bool {
        self.layout == other.layout
    }

    /// `a * self + b * other` on identical layouts.
    pub fn combine(&self, a: f64, other: &DataCube, b: f64) -> Result<DataCube> {
        if !self.same_layout(other) {
            return Err(Error::GridMismatch("cubes on different layouts".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(DataCube { layout: self.layout.clone(), values, eta: self.eta, label: self.label.clone() })
    }

    /// `sup_{sigma'} |A~(sigma', ., .)|_{L2(S2; H1(R))}`.
    pub fn data_norm(&self) -> f64 {
        (0..self.layout.sigma_prime.n).map(|i| sobolev_data_norm(&self.slice(i), 1)).fold(0.0, f64::max)
    }

    /// `sup_{sigma'} |A~(sigma', ., .)|_{L2(S2; H1(lo, hi))}`.
    pub fn window_norm(&self, lo: f64, hi: f64) -> f64 {
        (0..self.layout.sigma_prime.n).map(|i| sobolev_norm_on_window(&self.slice(i), 1, lo, hi)).fold(0.0, f64::max)
    }

    /// Largest `|value|` over entries with `sigma < lo` (first) and
    /// `sigma > hi` (second).
    pub fn tails(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut below: f64 = 0.0;
        let mut above: f64 = 0.0;
        for i in 0..self.layout.sigma_prime.n {
            for d in 0..self.layout.dirs.len() {
                for j in 0..self.layout.sigma.n {
                    let sg = self.layout.sigma.value(j);
                    let v = self.get(i, d, j).abs();
                    if sg < lo {
                        below = below.max(v);
                    } else if sg > hi {
                        above = above.max(v);
                    }
                }
            }
        }
        (below, above)
    }
}

/// Memoization of FDTD pairing results between cube syntheses.
pub trait PairingCache: Sync {
    fn load(&self, key: &str) -> Option<Vec<f64>>;
    fn store(&self, key: &str, values: &[f64]);
}

/// Never stores anything.
pub struct NoCache;

impl PairingCache for NoCache {
    fn load(&self, _key: &str) -> Option<Vec<f64>> {
        None
    }
    fn store(&self, _key: &str, _values: &[f64]) {}
}

/// In-process cache.
#[derive(Default)]
pub struct MemoryCache {
    entries: Mutex<HashMap<String, Vec<f64>>>,
}

impl MemoryCache {
    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl PairingCache for MemoryCache {
    fn load(&self, key: &str) -> Option<Vec<f64>> {
        self.entries.lock().unwrap().get(key).cloned()
    }
    fn store(&self, key: &str, values: &[f64]) {
        self.entries.lock().unwrap().insert(key.to_string(), values.to_vec());
    }
}

/// Separable Gaussian smoothing on a uniform axis: the axis is refined until
/// the step is at most one standard deviation and padded by six.
struct SmoothingAxis {
    fine: UniformGrid1,
    ratio: usize,
    kernel: Vec<f64>,
}

impl SmoothingAxis {
    fn new(coarse: &UniformGrid1, std: f64) -> Result<Self> {
        let ratio = (coarse.step / std).ceil().max(1.0) as usize;
        let step = coarse.step / ratio as f64;
        let half = (6.0 * std / step).ceil() as usize;
        let fine = UniformGrid1::new(coarse.start - half as f64 * step, step, (coarse.n - 1) * ratio + 1 + 2 * half)?;
        let mut kernel: Vec<f64> = (0..=2 * half)
            .map(|k| {
                let z = (k as f64 - half as f64) * step / std;
                (-0.5 * z * z).exp()
            })
            .collect();
        let total: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|v| *v /= total);
        Ok(Self { fine, ratio, kernel })
    }

    /// Smoothed value at coarse node `i` from fine samples `at(k)`.
    #[inline]
    fn apply<F: Fn(usize) -> f64>(&self, i: usize, at: F) -> f64 {
        let base = i * self.ratio;
        self.kernel.iter().enumerate().map(|(k, w)| w * at(base + k)).sum()
    }
}

/// The delta-delta part of the backscattering cube,
/// `[R q(-sigma', .)](sigma, omega)` smoothed by the two mollifiers: they act
/// as independent Gaussians of standard deviation `eta / (2 sqrt 2)` in
/// `sigma'` and in `sigma`.
pub fn principal_cube(q: &dyn SpaceTimePotential, layout: &CubeLayout, mollifier: &Mollifier) -> Result<DataCube> {
    let std = mollifier.sigma() / std::f64::consts::SQRT_2;
    let ax_t = SmoothingAxis::new(&layout.sigma_prime, std)?;
    let ax_p = SmoothingAxis::new(&layout.sigma, std)?;
    let nd = layout.dirs.len();
    let times: Vec<f64> = (0..ax_t.fine.n).map(|i| -ax_t.fine.value(i)).collect();
    let table = q.plane_integral_table(&times, &layout.dirs, &ax_p.fine);
    let nf = ax_p.fine.n;
    let ns = layout.sigma.n;
    // Smooth along sigma: [fine sigma'][dir][coarse sigma].
    let mut partial = vec![0.0; ax_t.fine.n * nd * ns];
    partial.par_chunks_mut(ns).enumerate().for_each(|(r, out)| {
        let row = &table[r * nf..(r + 1) * nf];
        for (j, v) in out.iter_mut().enumerate() {
            *v = ax_p.apply(j, |k| row[k]);
        }
    });
    let block = nd * ns;
    let mut values = vec![0.0; layout.len()];
    values.par_chunks_mut(block).enumerate().for_each(|(i, out)| {
        for (e, v) in out.iter_mut().enumerate() {
            *v = ax_t.apply(i, |k| partial[k * block + e]);
        }
    });
    DataCube::new(layout.clone(), values, mollifier.eta, "principal")
}

/// Key grouping equal incident delays that differ by rounding.
fn delay_key(s: f64) -> i64 {
    (s * 1e9).round() as i64
}

/// One solver run: direction index, driving delay, and the `(cube index, other delay)` entries it fills.
type DelayGroup = (usize, f64, Vec<(usize, f64)>);

/// Entries grouped by `(direction, delay)`: the delay `s` drives the run
/// (`group_by_incident`) or `s'` does.
fn group_entries(layout: &CubeLayout, group_by_incident: bool) -> Vec<DelayGroup> {
    let mut jobs = Vec::new();
    for d in 0..layout.dirs.len() {
        let mut groups: BTreeMap<i64, (f64, Vec<(usize, f64)>)> = BTreeMap::new();
        for i in 0..layout.sigma_prime.n {
            for j in 0..layout.sigma.n {
                let (s, sp) = layout.delays(i, j);
                let (drive, other) = if group_by_incident { (s, sp) } else { (sp, s) };
                groups.entry(delay_key(drive)).or_insert((drive, Vec::new())).1.push((layout.index(i, d, j), other));
            }
        }
        jobs.extend(groups.into_values().map(|(drive, list)| (d, drive, list)));
    }
    jobs
}

fn cache_key(tag: &str, parts: &[Option<String>], drive: f64, dir: usize, layout: &CubeLayout, others: &[f64], synth: &Synthesis) -> Option<String> {
    let mut key = format!("{tag}|{drive:.15e}|{:?}|{others:?}|{}", layout.dirs.dirs[dir], serde_json::to_string(synth).ok()?);
    for p in parts {
        key.push('|');
        key.push_str(p.as_ref()?);
    }
    Some(key)
}

/// The scattered part `int w u_sc^-(t, x; s, omega) delta_eta(t + s' + x . omega)`
/// on a cube layout, with `u_sc^-` generated by `field_q` and the weight
/// `w` (`field_q` itself when `None`).
pub fn scattered_pairing_cube(
    field_q: &dyn SpaceTimePotential,
    weight: Option<&dyn SpaceTimePotential>,
    layout: &CubeLayout,
    synth: &Synthesis,
    cache: &dyn PairingCache,
) -> Result<DataCube> {
    synth.validate()?;
    let mollifier = synth.mollifier()?;
    let w = weight.unwrap_or(field_q);
    let mut cube = DataCube::zeros(layout.clone(), synth.eta, synth.backend.name());
    if field_q.n_terms() == 0 || w.n_terms() == 0 {
        return Ok(cube);
    }
    match synth.backend {
        Backend::Born => {
            for d in 0..layout.dirs.len() {
                let omega = layout.dirs.dirs[d];
                let expansion = BornExpansion::new(field_q, omega, 1, synth.born_step)?;
                let sampled;
                let samples = match weight {
                    None => &expansion.q_samples,
                    Some(w) => {
                        sampled = expansion.grid().sample(w);
                        &sampled
                    }
                };
                let moments = expansion.weighted_moments(samples);
                let entries: Vec<(usize, usize)> =
                    (0..layout.sigma_prime.n).flat_map(|i| (0..layout.sigma.n).map(move |j| (i, j))).collect();
                let vals: Vec<f64> = entries
                    .par_iter()
                    .map(|&(i, j)| {
                        let (s, sp) = layout.delays(i, j);
                        born_backscatter_entry(&expansion, &moments, s, sp, &mollifier)
                    })
                    .collect();
                for (&(i, j), v) in entries.iter().zip(vals) {
                    cube.values[layout.index(i, d, j)] = v;
                }
            }
        }
        Backend::Fdtd => {
            let jobs = group_entries(layout, true);
            let parts = [field_q.fingerprint(), weight.map_or(Some("self".to_string()), |w| w.fingerprint())];
            let results: Vec<Result<Vec<f64>>> = jobs
                .par_iter()
                .map(|(d, s, list)| {
                    let omega = layout.dirs.dirs[*d];
                    let delays: Vec<f64> = list.iter().map(|e| e.1).collect();
                    let key = cache_key("minus", &parts, *s, *d, layout, &delays, synth);
                    if let Some(hit) = key.as_ref().and_then(|k| cache.load(k)) {
                        if hit.len() == delays.len() {
                            return Ok(hit);
                        }
                    }
                    let vals =
                        fdtd_plane_pairing_side(field_q, w, *s, omega, ScatterSide::Minus, neg(omega), &delays, synth)?;
                    if let Some(k) = &key {
                        cache.store(k, &vals);
                    }
                    Ok(vals)
                })
                .collect();
            for ((_, _, list), vals) in jobs.iter().zip(results) {
                for (&(idx, _), v) in list.iter().zip(vals?) {
                    cube.values[idx] = v;
                }
            }
        }
    }
    Ok(cube)
}

/// `sum_j sum_xi (delta_eta * h_j)(xi + s) sum_p G_j(xi, p) delta_eta(xi + 2p + s')`:
/// on the aligned grid the measurement plane `t + s' + x . omega = 0` reads
/// `xi + 2p + s' = 0`.
fn born_backscatter_entry(
    expansion: &BornExpansion,
    moments: &[Vec<f64>],
    s: f64,
    s_prime: f64,
    mollifier: &Mollifier,
) -> f64 {
    let g = expansion.grid();
    let reach = mollifier.support_radius();
    let d = g.step();
    let np = g.p.n;
    let mut acc = 0.0;
    for ixi in 0..g.xi.n {
        let xi = g.xi.value(ixi);
        if xi + s < -reach {
            continue;
        }
        let p_lo = (-s_prime - xi - reach) / 2.0;
        let p_hi = (-s_prime - xi + reach) / 2.0;
        let lo = ((p_lo - g.p.start) / d).floor().max(0.0) as usize;
        let hi = ((p_hi - g.p.start) / d).ceil();
        if hi < 0.0 || lo >= np {
            continue;
        }
        let hi = (hi as usize).min(np - 1);
        for (c, m) in expansion.terms.iter().zip(moments) {
            let profile = mollifier.h(c.order as i32, xi + s).unwrap();
            if profile == 0.0 {
                continue;
            }
            let row = &m[ixi * np..(ixi + 1) * np];
            let mut inner = 0.0;
            for (ip, &gv) in row.iter().enumerate().take(hi + 1).skip(lo) {
                if gv != 0.0 {
                    inner += gv * mollifier.delta(xi + 2.0 * g.p.value(ip) + s_prime);
                }
            }
            acc += profile * inner;
        }
    }
    acc * d * d
}

/// The backscattering cube of `q`: principal part plus the scattered part
/// from the configured backend.
pub fn backscatter_cube(
    q: &dyn SpaceTimePotential,
    layout: &CubeLayout,
    synth: &Synthesis,
    cache: &dyn PairingCache,
) -> Result<DataCube> {
    synth.validate()?;
    layout.check_sigma_coverage(q.rho(), synth.eta)?;
    let principal = principal_cube(q, layout, &synth.mollifier()?)?;
    let scattered = scattered_pairing_cube(q, None, layout, synth, cache)?;
    let mut cube = principal.combine(1.0, &scattered, 1.0)?;
    cube.label = synth.backend.name().to_string();
    Ok(cube)
}
