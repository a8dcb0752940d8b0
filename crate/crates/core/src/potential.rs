//! Compactly supported, smooth, time-dependent potentials q(t, x).
//!
//! Every potential is a finite sum of separable terms `g_k(t) * phi_k(x)`;
//! the solvers and the expansion code only rely on the
//! [`SpaceTimePotential`] trait, so analytic bump sums and sampled
//! reconstructions can be used interchangeably.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Volume;
use crate::geometry::{add, dot, norm, orthonormal_frame, scale, DirectionSet, Grid3, UniformGrid1, Vec3};
use crate::radon::radon_forward;

/// `exp(1 - 1/(1 - r^2))` for `|r| < 1`, else 0. Smooth, peak 1 at r = 0.
#[inline]
pub fn cutoff(r: f64) -> f64 {
    let r2 = r * r;
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

/// Smooth monotone step: 0 for x <= 0, 1 for x >= 1.
pub fn smooth_step(x: f64) -> f64 {
    fn f(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-1.0 / x).exp()
        }
    }
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = f(x);
        a / (a + f(1.0 - x))
    }
}

const PLANE_TABLE_CELLS: usize = 1 << 14;

/// Values of `2 pi * int_u^1 cutoff(r) r dr` on a uniform grid over [0, 1].
fn plane_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = PLANE_TABLE_CELLS;
        let du = 1.0 / n as f64;
        let mut table = vec![0.0; n + 1];
        // 5-point Gauss-Legendre on every cell, accumulated from r = 1 down.
        let nodes = [
            (0.0, 128.0 / 225.0),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        for i in (0..n).rev() {
            let mid = (i as f64 + 0.5) * du;
            let mut cell = 0.0;
            for (x, w) in nodes {
                let r = mid + 0.5 * du * x;
                cell += w * cutoff(r) * r;
            }
            table[i] = table[i + 1] + 2.0 * PI * 0.5 * du * cell;
        }
        table
    })
}

/// Integral of `cutoff(|x|)` over the plane at distance `d` from the origin.
///
/// Evaluated from a precomputed table with cubic Hermite interpolation using
/// the exact derivative `-2 pi u cutoff(u)`.
pub fn unit_bump_plane_integral(d: f64) -> f64 {
    let u = d.abs();
    if u >= 1.0 {
        return 0.0;
    }
    let table = plane_table();
    let n = PLANE_TABLE_CELLS;
    let du = 1.0 / n as f64;
    let x = u * n as f64;
    let i = (x.floor() as usize).min(n - 1);
    let f = x - i as f64;
    let (u0, u1) = (i as f64 * du, (i + 1) as f64 * du);
    let (p0, p1) = (table[i], table[i + 1]);
    let (m0, m1) = (-2.0 * PI * u0 * cutoff(u0) * du, -2.0 * PI * u1 * cutoff(u1) * du);
    let f2 = f * f;
    let f3 = f2 * f;
    (2.0 * f3 - 3.0 * f2 + 1.0) * p0 + (f3 - 2.0 * f2 + f) * m0 + (-2.0 * f3 + 3.0 * f2) * p1 + (f3 - f2) * m1
}

/// Integral of `cutoff(|x|)` over R^3.
pub fn unit_bump_volume_integral() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| {
        // int_{-1}^{1} (plane integral at distance d) dd, Simpson on the table grid.
        let n = 4096;
        let h = 1.0 / n as f64;
        let mut acc = unit_bump_plane_integral(0.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * unit_bump_plane_integral(i as f64 * h);
        }
        2.0 * acc * h / 3.0
    })
}

/// Compactly supported time envelope of a potential term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    /// `cutoff((t - center) / half_width)`.
    Bump { center: f64, half_width: f64 },
    /// 1 on `[start + ramp, end - ramp]`, smooth ramps to 0 at `start` and `end`.
    Plateau { start: f64, end: f64, ramp: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Bump { center, half_width } => cutoff((t - center) / half_width),
            TimeProfile::Plateau { start, end, ramp } => {
                smooth_step((t - start) / ramp) * smooth_step((end - t) / ramp)
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            TimeProfile::Bump { center, half_width } => (center - half_width, center + half_width),
            TimeProfile::Plateau { start, end, .. } => (start, end),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TimeProfile::Bump { center, half_width } if center.is_finite() && half_width > 0.0 => Ok(()),
            TimeProfile::Plateau { start, end, ramp } if ramp > 0.0 && end - start >= 2.0 * ramp => Ok(()),
            p => Err(invalid(format!("invalid time profile {p:?}"))),
        }
    }

    /// The profile mirrored in time, `t -> -t`.
    pub fn reversed(&self) -> TimeProfile {
        match *self {
            TimeProfile::Bump { center, half_width } => TimeProfile::Bump { center: -center, half_width },
            TimeProfile::Plateau { start, end, ramp } => TimeProfile::Plateau { start: -end, end: -start, ramp },
        }
    }
}

/// Space-time support box of one separable term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermSupport {
    pub t_lo: f64,
    pub t_hi: f64,
    pub center: Vec3,
    pub radius: f64,
}

/// A potential given as `sum_k time_factor(k, t) * space_factor(k, x)`.
pub trait SpaceTimePotential: Sync + Send {
    fn n_terms(&self) -> usize;
    fn time_factor(&self, k: usize, t: f64) -> f64;
    fn space_factor(&self, k: usize, x: Vec3) -> f64;
    fn term_support(&self, k: usize) -> TermSupport;
    /// Radius of a centred ball containing the spatial support.
    fn rho(&self) -> f64;

    fn value(&self, t: f64, x: Vec3) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.n_terms() {
            let g = self.time_factor(k, t);
            if g != 0.0 {
                acc += g * self.space_factor(k, x);
            }
        }
        acc
    }

    fn time_support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..self.n_terms() {
            let s = self.term_support(k);
            lo = lo.min(s.t_lo);
            hi = hi.max(s.t_hi);
        }
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// Spacing used by the generic plane quadrature.
    fn quadrature_spacing(&self) -> f64;

    /// `int_{x . omega = p} q(t, x) dS(x)`.
    ///
    /// The default is a uniform 2-D trapezoid rule over each term's disc.
    fn plane_integral(&self, t: f64, p: f64, omega: Vec3) -> f64 {
        let (e1, e2) = orthonormal_frame(omega);
        let step = self.quadrature_spacing();
        let mut acc = 0.0;
        for k in 0..self.n_terms() {
            let g = self.time_factor(k, t);
            if g == 0.0 {
                continue;
            }
            let sup = self.term_support(k);
            let d = p - dot(sup.center, omega);
            if d.abs() >= sup.radius {
                continue;
            }
            let a = (sup.radius * sup.radius - d * d).sqrt();
            let foot = add(sup.center, scale(omega, d));
            let m = (a / step).ceil() as i64;
            let mut term = 0.0;
            for i in -m..=m {
                let u = i as f64 * step;
                for j in -m..=m {
                    let v = j as f64 * step;
                    if u * u + v * v >= a * a {
                        continue;
                    }
                    let x = add(foot, add(scale(e1, u), scale(e2, v)));
                    term += self.space_factor(k, x);
                }
            }
            acc += g * term * step * step;
        }
        acc
    }

    /// `plane_integral(times[i], offsets[j], dirs[d])` laid out
    /// `[time][direction][offset]`.
    fn plane_integral_table(&self, times: &[f64], dirs: &DirectionSet, offsets: &UniformGrid1) -> Vec<f64> {
        let nd = dirs.len();
        let mut out = vec![0.0; times.len() * nd * offsets.n];
        if offsets.n == 0 {
            return out;
        }
        out.par_chunks_mut(offsets.n).enumerate().for_each(|(r, row)| {
            let (t, omega) = (times[r / nd], dirs.dirs[r % nd]);
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.plane_integral(t, offsets.value(j), omega);
            }
        });
        out
    }

    /// Stable text identifying the potential, used to key cached results;
    /// `None` disables caching.
    fn fingerprint(&self) -> Option<String> {
        None
    }
}

impl<P: SpaceTimePotential + ?Sized> SpaceTimePotential for &P {
    fn n_terms(&self) -> usize {
        (**self).n_terms()
    }
    fn time_factor(&self, k: usize, t: f64) -> f64 {
        (**self).time_factor(k, t)
    }
    fn space_factor(&self, k: usize, x: Vec3) -> f64 {
        (**self).space_factor(k, x)
    }
    fn term_support(&self, k: usize) -> TermSupport {
        (**self).term_support(k)
    }
    fn rho(&self) -> f64 {
        (**self).rho()
    }
    fn value(&self, t: f64, x: Vec3) -> f64 {
        (**self).value(t, x)
    }
    fn time_support(&self) -> (f64, f64) {
        (**self).time_support()
    }
    fn quadrature_spacing(&self) -> f64 {
        (**self).quadrature_spacing()
    }
    fn plane_integral(&self, t: f64, p: f64, omega: Vec3) -> f64 {
        (**self).plane_integral(t, p, omega)
    }
    fn plane_integral_table(&self, times: &[f64], dirs: &DirectionSet, offsets: &UniformGrid1) -> Vec<f64> {
        (**self).plane_integral_table(times, dirs, offsets)
    }
    fn fingerprint(&self) -> Option<String> {
        (**self).fingerprint()
    }
}

/// One separable bump `amplitude * profile(t) * cutoff(|x - center| / width)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec3,
    pub width: f64,
    pub amplitude: f64,
    pub profile: TimeProfile,
}

/// Analytic potential `q = scale * sum_i bump_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub bumps: Vec<Bump>,
    pub rho: f64,
    pub scale: f64,
}

impl Potential {
    pub fn new(bumps: Vec<Bump>, rho: f64, scale: f64) -> Result<Self> {
        if !(rho > 0.0) || !scale.is_finite() {
            return Err(invalid(format!("potential needs rho > 0 and finite scale, got {rho}, {scale}")));
        }
        for (index, b) in bumps.iter().enumerate() {
            if !(b.width > 0.0) {
                return Err(invalid(format!("bump {index} has non-positive width {}", b.width)));
            }
            if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return Err(invalid(format!("bump {index} has non-finite parameters")));
            }
            b.profile.validate()?;
            let extent = norm(b.center) + b.width;
            if extent > rho * (1.0 + 1e-12) {
                return Err(Error::BumpOutsideSupport { index, rho, extent });
            }
        }
        Ok(Self { bumps, rho, scale })
    }

    pub fn zero(rho: f64) -> Self {
        Self { bumps: Vec::new(), rho, scale: 1.0 }
    }

    /// The same potential multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { bumps: self.bumps.clone(), rho: self.rho, scale: self.scale * factor }
    }

    /// `sum_i c_i q_i` as a single bump list (scales folded into amplitudes).
    pub fn linear_combination(parts: &[(f64, &Potential)]) -> Result<Self> {
        let rho = parts.iter().map(|(_, q)| q.rho).fold(0.0, f64::max);
        let mut bumps = Vec::new();
        for &(c, q) in parts {
            for b in &q.bumps {
                bumps.push(Bump { amplitude: b.amplitude * q.scale * c, ..*b });
            }
        }
        Potential::new(bumps, if rho > 0.0 { rho } else { 1.0 }, 1.0)
    }

    /// `q~(t, x) = q(-t, x)`.
    pub fn time_reversed(&self) -> Self {
        let bumps = self.bumps.iter().map(|b| Bump { profile: b.profile.reversed(), ..*b }).collect();
        Self { bumps, rho: self.rho, scale: self.scale }
    }

    /// Upper bound for `sup |q|`, exact when the bumps do not overlap.
    pub fn sup_bound(&self) -> f64 {
        self.bumps.iter().map(|b| (self.scale * b.amplitude).abs()).sum()
    }
}

impl SpaceTimePotential for Potential {
    fn n_terms(&self) -> usize {
        self.bumps.len()
    }

    #[inline]
    fn time_factor(&self, k: usize, t: f64) -> f64 {
        let b = &self.bumps[k];
        self.scale * b.amplitude * b.profile.eval(t)
    }

    #[inline]
    fn space_factor(&self, k: usize, x: Vec3) -> f64 {
        let b = &self.bumps[k];
        let d = [x[0] - b.center[0], x[1] - b.center[1], x[2] - b.center[2]];
        cutoff(norm(d) / b.width)
    }

    fn term_support(&self, k: usize) -> TermSupport {
        let b = &self.bumps[k];
        let (t_lo, t_hi) = b.profile.support();
        TermSupport { t_lo, t_hi, center: b.center, radius: b.width }
    }

    fn rho(&self) -> f64 {
        self.rho
    }

    fn quadrature_spacing(&self) -> f64 {
        self.bumps.iter().map(|b| b.width).fold(f64::INFINITY, f64::min) / 64.0
    }

    /// Closed form: each bump contributes `width^2 * P(d / width)` with `P` the
    /// tabulated unit-bump plane integral.
    fn plane_integral(&self, t: f64, p: f64, omega: Vec3) -> f64 {
        let mut acc = 0.0;
        for (k, b) in self.bumps.iter().enumerate() {
            let g = self.time_factor(k, t);
            if g == 0.0 {
                continue;
            }
            let d = (p - dot(b.center, omega)) / b.width;
            acc += g * b.width * b.width * unit_bump_plane_integral(d);
        }
        acc
    }

    fn fingerprint(&self) -> Option<String> {
        serde_json::to_string(self).ok()
    }
}

/// Builds a potential whose bumps all share one time profile and amplitude.
pub fn make_bump_potential(
    centers: &[Vec3],
    widths: &[f64],
    time_profile: TimeProfile,
    amplitude: f64,
    rho: f64,
) -> Result<Potential> {
    if centers.len() != widths.len() {
        return Err(invalid(format!("{} centers but {} widths", centers.len(), widths.len())));
    }
    let bumps = centers
        .iter()
        .zip(widths)
        .map(|(&center, &width)| Bump { center, width, amplitude: 1.0, profile: time_profile })
        .collect();
    Potential::new(bumps, rho, amplitude)
}

/// Parameters of the random bump ensembles used by the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub min_bumps: usize,
    pub max_bumps: usize,
    pub min_width: f64,
    pub max_width: f64,
    /// Bumps are kept inside `B(0, rho * inset)`.
    pub inset: f64,
    pub rho: f64,
    /// Time profiles are bumps centred in `[-t_center_range, t_center_range]`.
    pub t_center_range: f64,
    pub min_half_width: f64,
    pub max_half_width: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            min_bumps: 1,
            max_bumps: 3,
            min_width: 0.3,
            max_width: 0.5,
            inset: 0.9,
            rho: 1.0,
            t_center_range: 0.05,
            min_half_width: 0.15,
            max_half_width: 0.2,
        }
    }
}

/// Draws a random bump sum with amplitudes in `[0.5, 1]` times random signs
/// (or all positive when `positive`), then scales it by `scale`.
pub fn random_bump_potential<R: Rng>(rng: &mut R, spec: &EnsembleSpec, scale: f64, positive: bool) -> Result<Potential> {
    let n = rng.gen_range(spec.min_bumps..=spec.max_bumps);
    let mut bumps = Vec::with_capacity(n);
    for _ in 0..n {
        let width = rng.gen_range(spec.min_width..=spec.max_width);
        let reach = (spec.rho * spec.inset - width).max(0.0);
        // Uniform in the ball of radius `reach` by rejection.
        let center = loop {
            let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if norm(c) < 1.0 {
                break crate::geometry::scale(c, reach);
            }
        };
        let mut amplitude = rng.gen_range(0.5..1.0);
        if !positive && rng.gen_bool(0.5) {
            amplitude = -amplitude;
        }
        let profile = TimeProfile::Bump {
            center: rng.gen_range(-spec.t_center_range..=spec.t_center_range),
            half_width: rng.gen_range(spec.min_half_width..=spec.max_half_width),
        };
        bumps.push(Bump { center, width, amplitude, profile });
    }
    Potential::new(bumps, spec.rho, scale)
}

/// `q~(t, x) = q(-t, x)` for any potential.
#[derive(Clone, Copy, Debug)]
pub struct TimeReversed<P>(pub P);

impl<P: SpaceTimePotential> SpaceTimePotential for TimeReversed<P> {
    fn n_terms(&self) -> usize {
        self.0.n_terms()
    }
    fn time_factor(&self, k: usize, t: f64) -> f64 {
        self.0.time_factor(k, -t)
    }
    fn space_factor(&self, k: usize, x: Vec3) -> f64 {
        self.0.space_factor(k, x)
    }
    fn term_support(&self, k: usize) -> TermSupport {
        let s = self.0.term_support(k);
        TermSupport { t_lo: -s.t_hi, t_hi: -s.t_lo, ..s }
    }
    fn rho(&self) -> f64 {
        self.0.rho()
    }
    fn value(&self, t: f64, x: Vec3) -> f64 {
        self.0.value(-t, x)
    }
    fn quadrature_spacing(&self) -> f64 {
        self.0.quadrature_spacing()
    }
    fn plane_integral(&self, t: f64, p: f64, omega: Vec3) -> f64 {
        self.0.plane_integral(-t, p, omega)
    }
    fn plane_integral_table(&self, times: &[f64], dirs: &DirectionSet, offsets: &UniformGrid1) -> Vec<f64> {
        let mirrored: Vec<f64> = times.iter().map(|t| -t).collect();
        self.0.plane_integral_table(&mirrored, dirs, offsets)
    }
    fn fingerprint(&self) -> Option<String> {
        self.0.fingerprint().map(|f| format!("reversed:{f}"))
    }
}

/// `sum_i c_i q_i` over arbitrary potentials; the term lists are
/// concatenated, so closed-form plane integrals are kept.
pub struct Combination<'a> {
    parts: Vec<(f64, &'a dyn SpaceTimePotential)>,
    starts: Vec<usize>,
}

impl<'a> Combination<'a> {
    pub fn new(parts: Vec<(f64, &'a dyn SpaceTimePotential)>) -> Self {
        let mut starts = Vec::with_capacity(parts.len());
        let mut total = 0;
        for (_, q) in &parts {
            starts.push(total);
            total += q.n_terms();
        }
        Self { parts, starts }
    }

    /// `a - b`.
    pub fn difference(a: &'a dyn SpaceTimePotential, b: &'a dyn SpaceTimePotential) -> Self {
        Self::new(vec![(1.0, a), (-1.0, b)])
    }

    fn locate(&self, k: usize) -> (usize, usize) {
        let i = self.starts.partition_point(|&s| s <= k) - 1;
        (i, k - self.starts[i])
    }
}

impl SpaceTimePotential for Combination<'_> {
    fn n_terms(&self) -> usize {
        self.parts.iter().map(|(_, q)| q.n_terms()).sum()
    }
    fn time_factor(&self, k: usize, t: f64) -> f64 {
        let (i, j) = self.locate(k);
        let (c, q) = self.parts[i];
        c * q.time_factor(j, t)
    }
    fn space_factor(&self, k: usize, x: Vec3) -> f64 {
        let (i, j) = self.locate(k);
        self.parts[i].1.space_factor(j, x)
    }
    fn term_support(&self, k: usize) -> TermSupport {
        let (i, j) = self.locate(k);
        self.parts[i].1.term_support(j)
    }
    fn rho(&self) -> f64 {
        self.parts.iter().map(|(_, q)| q.rho()).fold(0.0, f64::max)
    }
    fn value(&self, t: f64, x: Vec3) -> f64 {
        self.parts.iter().map(|(c, q)| c * q.value(t, x)).sum()
    }
    fn quadrature_spacing(&self) -> f64 {
        self.parts.iter().map(|(_, q)| q.quadrature_spacing()).fold(f64::INFINITY, f64::min)
    }
    fn plane_integral(&self, t: f64, p: f64, omega: Vec3) -> f64 {
        self.parts.iter().map(|(c, q)| c * q.plane_integral(t, p, omega)).sum()
    }
    fn plane_integral_table(&self, times: &[f64], dirs: &DirectionSet, offsets: &UniformGrid1) -> Vec<f64> {
        let mut out = vec![0.0; times.len() * dirs.len() * offsets.n];
        for (c, q) in &self.parts {
            for (o, v) in out.iter_mut().zip(q.plane_integral_table(times, dirs, offsets)) {
                *o += c * v;
            }
        }
        out
    }
    fn fingerprint(&self) -> Option<String> {
        let mut key = String::from("combination");
        for (c, q) in &self.parts {
            key.push_str(&format!("|{c:e}*{}", q.fingerprint()?));
        }
        Some(key)
    }
}

/// A potential known through time slices on a grid: piecewise linear in time
/// (hat functions centred on the slice times), trilinear in space, and cut
/// off outside `B(0, rho)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPotential {
    pub grid: Grid3,
    pub times: UniformGrid1,
    /// `times.n` slices of `grid.len()` samples each.
    pub values: Vec<f64>,
    pub rho: f64,
}

impl SampledPotential {
    pub fn new(grid: Grid3, times: UniformGrid1, values: Vec<f64>, rho: f64) -> Result<Self> {
        if values.len() != grid.len() * times.n {
            return Err(Error::GridMismatch(format!(
                "{} samples for {} slices of {} nodes",
                values.len(),
                times.n,
                grid.len()
            )));
        }
        Ok(Self { grid, times, values, rho })
    }

    pub fn zeros(grid: Grid3, times: UniformGrid1, rho: f64) -> Self {
        Self { grid, times, values: vec![0.0; grid.len() * times.n], rho }
    }

    /// Samples an arbitrary potential at the slice times and grid nodes,
    /// zeroing nodes outside `B(0, rho)`.
    pub fn from_potential<P: SpaceTimePotential + ?Sized>(q: &P, grid: Grid3, times: UniformGrid1) -> Self {
        let rho = q.rho();
        let mut values = Vec::with_capacity(grid.len() * times.n);
        for i in 0..times.n {
            let t = times.value(i);
            values.extend(grid.sample(|x| if norm(x) < rho { q.value(t, x) } else { 0.0 }));
        }
        Self { grid, times, values, rho }
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.values[k * n..(k + 1) * n]
    }

    pub fn same_layout(&self, other: &SampledPotential) -> bool {
        self.grid == other.grid && self.times == other.times
    }

    /// `self + factor * other` on identical layouts.
    pub fn add_scaled(&mut self, factor: f64, other: &SampledPotential) -> Result<()> {
        if !self.same_layout(other) {
            return Err(Error::GridMismatch("sampled potentials on different layouts".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }
}

impl SpaceTimePotential for SampledPotential {
    fn n_terms(&self) -> usize {
        self.times.n
    }

    fn time_factor(&self, k: usize, t: f64) -> f64 {
        let u = ((t - self.times.value(k)) / self.times.step).abs();
        if u >= 1.0 {
            0.0
        } else {
            1.0 - u
        }
    }

    fn space_factor(&self, k: usize, x: Vec3) -> f64 {
        if norm(x) >= self.rho {
            return 0.0;
        }
        self.grid.trilinear(self.slice(k), x)
    }

    fn term_support(&self, k: usize) -> TermSupport {
        let t = self.times.value(k);
        TermSupport { t_lo: t - self.times.step, t_hi: t + self.times.step, center: [0.0; 3], radius: self.rho }
    }

    fn rho(&self) -> f64 {
        self.rho
    }

    fn value(&self, t: f64, x: Vec3) -> f64 {
        let u = (t - self.times.start) / self.times.step;
        if !(u > -1.0 && u < self.times.n as f64) || norm(x) >= self.rho {
            return 0.0;
        }
        let k = u.floor();
        let f = u - k;
        let mut acc = 0.0;
        if k >= 0.0 {
            acc += (1.0 - f) * self.grid.trilinear(self.slice(k as usize), x);
        }
        let k1 = k + 1.0;
        if f > 0.0 && k1 < self.times.n as f64 {
            acc += f * self.grid.trilinear(self.slice(k1 as usize), x);
        }
        acc
    }

    fn quadrature_spacing(&self) -> f64 {
        self.grid.h
    }

    /// Radon transforms of the slices that carry weight at the requested
    /// times, combined with the hat factors. Falls back to the generic rule
    /// when `offsets` does not cover `[-rho, rho]`.
    fn plane_integral_table(&self, times: &[f64], dirs: &DirectionSet, offsets: &UniformGrid1) -> Vec<f64> {
        let block = dirs.len() * offsets.n;
        if !offsets.covers(-self.rho, self.rho) {
            return (0..times.len())
                .flat_map(|i| {
                    let mut row = vec![0.0; block];
                    for (d, &omega) in dirs.dirs.iter().enumerate() {
                        for j in 0..offsets.n {
                            row[d * offsets.n + j] = self.plane_integral(times[i], offsets.value(j), omega);
                        }
                    }
                    row
                })
                .collect();
        }
        let mut transforms: Vec<Option<Vec<f64>>> = vec![None; self.times.n];
        let mut out = vec![0.0; times.len() * block];
        for (i, &t) in times.iter().enumerate() {
            for (k, cached) in transforms.iter_mut().enumerate() {
                let g = self.time_factor(k, t);
                if g == 0.0 {
                    continue;
                }
                let sino = cached.get_or_insert_with(|| {
                    let slice = Volume { grid: self.grid, values: self.slice(k).to_vec() };
                    radon_forward(&slice, dirs, offsets, self.rho).expect("offsets checked").values
                });
                for (o, v) in out[i * block..(i + 1) * block].iter_mut().zip(sino.iter()) {
                    *o += g * v;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_peak_and_edge() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(1.0), 0.0);
        assert_eq!(cutoff(-1.5), 0.0);
        assert!((cutoff(0.5) - (1.0f64 - 1.0 / 0.75).exp()).abs() < 1e-16);
    }

    #[test]
    fn smooth_step_is_monotone_and_symmetric() {
        let mut prev = 0.0;
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let v = smooth_step(x);
            assert!(v >= prev);
            assert!((v + smooth_step(1.0 - x) - 1.0).abs() < 1e-15);
            prev = v;
        }
    }

    #[test]
    fn plane_table_matches_direct_quadrature() {
        // Independent route: polar quadrature of the plane integral.
        for &d in &[0.0, 0.2, 0.55, 0.9, 0.99] {
            let a = (1.0f64 - d * d).sqrt();
            let n = 20000;
            let dr = a / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let r = (i as f64 + 0.5) * dr;
                acc += cutoff((d * d + r * r).sqrt()) * 2.0 * PI * r * dr;
            }
            let table = unit_bump_plane_integral(d);
            assert!((acc - table).abs() < 1e-8, "d={d}: {acc} vs {table}");
        }
    }

    #[test]
    fn closed_form_plane_integral_matches_generic() {
        let q = make_bump_potential(
            &[[0.2, -0.1, 0.3], [-0.3, 0.2, -0.1]],
            &[0.4, 0.35],
            TimeProfile::Bump { center: 0.0, half_width: 0.5 },
            0.7,
            1.0,
        )
        .unwrap();
        struct Generic<'a>(&'a Potential);
        impl SpaceTimePotential for Generic<'_> {
            fn n_terms(&self) -> usize {
                self.0.n_terms()
            }
            fn time_factor(&self, k: usize, t: f64) -> f64 {
                self.0.time_factor(k, t)
            }
            fn space_factor(&self, k: usize, x: Vec3) -> f64 {
                self.0.space_factor(k, x)
            }
            fn term_support(&self, k: usize) -> TermSupport {
                self.0.term_support(k)
            }
            fn rho(&self) -> f64 {
                1.0
            }
            fn quadrature_spacing(&self) -> f64 {
                0.35 / 80.0
            }
        }
        let omega = crate::geometry::normalize([0.3, -0.5, 0.8]);
        for &p in &[-0.4, -0.1, 0.0, 0.25] {
            let a = q.plane_integral(0.1, p, omega);
            let b = Generic(&q).plane_integral(0.1, p, omega);
            assert!((a - b).abs() < 1e-7 * a.abs().max(1e-3), "p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn rejects_escaping_bump() {
        let err = make_bump_potential(
            &[[0.0, 0.0, 0.0], [0.8, 0.0, 0.0]],
            &[0.5, 0.3],
            TimeProfile::Bump { center: 0.0, half_width: 0.2 },
            1.0,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BumpOutsideSupport { index: 1, .. }));
    }

    #[test]
    fn sampled_potential_reproduces_slices_at_nodes() {
        let q = make_bump_potential(
            &[[0.0, 0.0, 0.0]],
            &[0.6],
            TimeProfile::Bump { center: 0.0, half_width: 0.3 },
            1.0,
            1.0,
        )
        .unwrap();
        let grid = Grid3::centered(1.0, 0.1).unwrap();
        let times = UniformGrid1::new(-0.3, 0.05, 13).unwrap();
        let s = SampledPotential::from_potential(&q, grid, times);
        let x = grid.point(12, 9, 11);
        for k in 0..times.n {
            let t = times.value(k);
            assert!((s.value(t, x) - q.value(t, x)).abs() < 1e-15);
        }
    }

    #[test]
    fn time_reversal_mirrors_values() {
        let q = make_bump_potential(
            &[[0.1, 0.0, 0.0]],
            &[0.5],
            TimeProfile::Plateau { start: -0.1, end: 0.4, ramp: 0.1 },
            2.0,
            1.0,
        )
        .unwrap();
        let r = q.time_reversed();
        let w = TimeReversed(&q);
        for &t in &[-0.35, -0.2, 0.0, 0.05, 0.3] {
            let x = [0.2, 0.1, -0.1];
            assert_eq!(r.value(t, x), q.value(-t, x));
            assert_eq!(w.value(t, x), q.value(-t, x));
        }
    }
}
