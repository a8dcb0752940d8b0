//! Progressive wave expansion of the incoming scattering solution,
//! `u^- ~ delta(t + s - x . omega) + sum_j a_j(t, x, omega) h_j(t + s - x . omega)`,
//! truncated at order one.
//!
//! The coefficients are transported along the characteristics `x + tau omega`
//! at speed one, so they are computed on a grid aligned with `omega`:
//! `xi = t - x . omega` (constant along a ray), `p = x . omega` (the ray
//! parameter) and transverse coordinates `y`. In these variables
//! `box = 2 d_xi d_p - d_p^2 - Lap_y` and every ray integral is a cumulative
//! sum along `p`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::{add, dot, orthonormal_frame, scale, Grid3, UniformGrid1, Vec3};
use crate::mollifier::{h as h_profile, Mollifier};
use crate::potential::SpaceTimePotential;
use crate::solver::{lattice_range, SolveWindow};

/// Highest expansion order implemented.
pub const MAX_ORDER: usize = 1;

/// Zero nodes kept around the support on every aligned axis.
const HALO: usize = 4;

/// Grid in `(xi, y1, y2, p)` with `p` fastest, for one direction `omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedGrid {
    pub omega: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub xi: UniformGrid1,
    pub y: UniformGrid1,
    pub p: UniformGrid1,
}

impl AlignedGrid {
    /// Covers every ray through the space-time support of `q`, with a zero
    /// halo on each side.
    pub fn for_potential(q: &dyn SpaceTimePotential, omega: Vec3, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!("aligned grid step must be positive, got {step}")));
        }
        let rho = q.rho();
        let (t_lo, t_hi) = q.time_support();
        let pad = HALO as f64 * step;
        let span = |lo: f64, hi: f64| -> Result<UniformGrid1> {
            let n = ((hi - lo) / step).ceil() as usize + 1;
            UniformGrid1::new(lo, step, n)
        };
        let (e1, e2) = orthonormal_frame(omega);
        Ok(Self {
            omega,
            e1,
            e2,
            xi: span(t_lo - rho - pad, t_hi + rho + pad)?,
            y: span(-rho - pad, rho + pad)?,
            p: span(-rho - pad, rho + pad)?,
        })
    }

    pub fn step(&self) -> f64 {
        self.p.step
    }

    pub fn len(&self) -> usize {
        self.xi.n * self.y.n * self.y.n * self.p.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of one `xi` plane.
    pub fn plane_len(&self) -> usize {
        self.y.n * self.y.n * self.p.n
    }

    #[inline]
    pub fn index(&self, ixi: usize, iy1: usize, iy2: usize, ip: usize) -> usize {
        ((ixi * self.y.n + iy1) * self.y.n + iy2) * self.p.n + ip
    }

    /// Space-time point of a node.
    #[inline]
    pub fn point(&self, ixi: usize, iy1: usize, iy2: usize, ip: usize) -> (f64, Vec3) {
        let p = self.p.value(ip);
        let x = add(add(scale(self.omega, p), scale(self.e1, self.y.value(iy1))), scale(self.e2, self.y.value(iy2)));
        (self.xi.value(ixi) + p, x)
    }

    /// `(xi, y1, y2, p)` of a space-time point.
    #[inline]
    pub fn coords(&self, t: f64, x: Vec3) -> [f64; 4] {
        let p = dot(x, self.omega);
        [t - p, dot(x, self.e1), dot(x, self.e2), p]
    }

    /// Samples `q` at every node.
    pub fn sample(&self, q: &dyn SpaceTimePotential) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let plane = self.plane_len();
        out.par_chunks_mut(plane).enumerate().for_each(|(ixi, chunk)| {
            for iy1 in 0..self.y.n {
                for iy2 in 0..self.y.n {
                    for ip in 0..self.p.n {
                        let (t, x) = self.point(ixi, iy1, iy2, ip);
                        chunk[(iy1 * self.y.n + iy2) * self.p.n + ip] = q.value(t, x);
                    }
                }
            }
        });
        out
    }
}

/// `a_j(t, x, omega)` sampled on an [`AlignedGrid`]; beyond the last `p`
/// node the coefficient is continued linearly, which is exact once the ray
/// has left the support of q (`a_0` is then constant and `a_1` linear in `p`).
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionCoeff {
    pub order: usize,
    pub rho: f64,
    pub grid: AlignedGrid,
    pub values: Vec<f64>,
}

impl ExpansionCoeff {
    pub fn omega(&self) -> Vec3 {
        self.grid.omega
    }

    /// Multilinear interpolation; zero outside the `xi` and `y` ranges and
    /// before the first `p` node.
    pub fn eval(&self, t: f64, x: Vec3) -> f64 {
        let g = &self.grid;
        let [xi, y1, y2, p] = g.coords(t, x);
        let Some((i0, fx)) = locate(&g.xi, xi) else { return 0.0 };
        let Some((j0, fy1)) = locate(&g.y, y1) else { return 0.0 };
        let Some((k0, fy2)) = locate(&g.y, y2) else { return 0.0 };
        if p < g.p.start {
            return 0.0;
        }
        // Past the last node `fp` exceeds 1: linear continuation.
        let u = (p - g.p.start) / g.p.step;
        let l0 = (u.floor() as usize).min(g.p.n - 2);
        let fp = u - l0 as f64;
        let mut acc = 0.0;
        for (di, wi) in [(0, 1.0 - fx), (1, fx)] {
            for (dj, wj) in [(0, 1.0 - fy1), (1, fy1)] {
                for (dk, wk) in [(0, 1.0 - fy2), (1, fy2)] {
                    let w = wi * wj * wk;
                    if w == 0.0 {
                        continue;
                    }
                    let base = g.index(i0 + di, j0 + dj, k0 + dk, l0);
                    acc += w * ((1.0 - fp) * self.values[base] + fp * self.values[base + 1]);
                }
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        crate::reduce::max_abs(&self.values)
    }
}

/// Cell index and fractional position, `None` outside the grid.
fn locate(axis: &UniformGrid1, v: f64) -> Option<(usize, f64)> {
    let u = (v - axis.start) / axis.step;
    if !(u >= 0.0) || u > (axis.n - 1) as f64 {
        return None;
    }
    let i = (u.floor() as usize).min(axis.n - 2);
    Some((i, u - i as f64))
}

/// `-1/2` times the running integral along `p` of each ray, fourth order in
/// the interior. Past the last node the integrand is continued linearly.
fn ray_integrate(grid: &AlignedGrid, integrand: &[f64]) -> Vec<f64> {
    let n = grid.p.n;
    let d = grid.p.step;
    let mut out = vec![0.0; integrand.len()];
    out.par_chunks_mut(n).zip(integrand.par_chunks(n)).for_each(|(a, f)| {
        let at = |k: isize| -> f64 {
            if k < 0 {
                0.0
            } else if (k as usize) < n {
                f[k as usize]
            } else {
                2.0 * f[n - 1] - f[n - 2]
            }
        };
        let mut acc = 0.0;
        a[0] = 0.0;
        for k in 1..n as isize {
            acc += d / 24.0 * (-at(k - 2) + 13.0 * at(k - 1) + 13.0 * at(k) - at(k + 1));
            a[k as usize] = -0.5 * acc;
        }
    });
    out
}

/// `a_0` at one point by adaptive quadrature along the backward ray:
/// `a_0 = -1/2 int_{-inf}^0 q(t + tau, x + tau omega) dtau`.
pub fn a0_point(q: &dyn SpaceTimePotential, t: f64, x: Vec3, omega: Vec3) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..q.n_terms() {
        let sup = q.term_support(k);
        // Ray parameters inside the term's ball and time window.
        let rel = crate::geometry::sub(x, sup.center);
        let b = dot(rel, omega);
        let disc = b * b - (dot(rel, rel) - sup.radius * sup.radius);
        if disc <= 0.0 {
            continue;
        }
        let root = disc.sqrt();
        let lo = (-b - root).max(sup.t_lo - t);
        let hi = (-b + root).min(sup.t_hi - t).min(0.0);
        if !(hi > lo) {
            continue;
        }
        let f = |tau: f64| q.time_factor(k, t + tau) * q.space_factor(k, add(x, scale(omega, tau)));
        total += adaptive(&f, lo, hi, 1e-12, 0)?;
    }
    let v = -0.5 * total;
    if !v.is_finite() {
        return Err(Error::NonFiniteSample { t, x });
    }
    Ok(v)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let out = quadrature::integrate(f, a, b, tol);
    if out.error_estimate <= tol.max(1e-10 * out.integral.abs()) || depth >= 12 {
        return Ok(out.integral);
    }
    let mid = 0.5 * (a + b);
    Ok(adaptive(f, a, mid, 0.5 * tol, depth + 1)? + adaptive(f, mid, b, 0.5 * tol, depth + 1)?)
}

/// `a_0` on the aligned grid of `omega` with spacing `step`.
pub fn a0(q: &dyn SpaceTimePotential, omega: Vec3, step: f64) -> Result<ExpansionCoeff> {
    let grid = AlignedGrid::for_potential(q, omega, step)?;
    let samples = grid.sample(q);
    Ok(a0_from_samples(q.rho(), grid, &samples))
}

fn a0_from_samples(rho: f64, grid: AlignedGrid, q_samples: &[f64]) -> ExpansionCoeff {
    let values = ray_integrate(&grid, q_samples);
    ExpansionCoeff { order: 0, rho, grid, values }
}

/// `a_{j+1} = -1/2 int (box + q) a_j` along the rays, with `box` by centred
/// differences on the aligned grid.
pub fn a_next(q: &dyn SpaceTimePotential, prev: &ExpansionCoeff) -> Result<ExpansionCoeff> {
    let samples = prev.grid.sample(q);
    a_next_from_samples(&samples, prev)
}

fn a_next_from_samples(q_samples: &[f64], prev: &ExpansionCoeff) -> Result<ExpansionCoeff> {
    if prev.order >= MAX_ORDER {
        return Err(Error::UnsupportedOrder(prev.order + 1));
    }
    check_margin(prev)?;
    let g = &prev.grid;
    let a = &prev.values;
    let (nx, ny, np) = (g.xi.n, g.y.n, g.p.n);
    let d = g.step();
    let inv_d2 = 1.0 / (d * d);
    let mut r = vec![0.0; a.len()];
    let plane = g.plane_len();
    r.par_chunks_mut(plane).enumerate().for_each(|(i, chunk)| {
        if i == 0 || i == nx - 1 {
            return;
        }
        // Value along p with the linear continuation past the last node.
        let at = |ii: usize, j: usize, k: usize, l: isize| -> f64 {
            let base = g.index(ii, j, k, 0);
            if l < 0 {
                0.0
            } else if (l as usize) < np {
                a[base + l as usize]
            } else {
                2.0 * a[base + np - 1] - a[base + np - 2]
            }
        };
        for j in 1..ny - 1 {
            for k in 1..ny - 1 {
                for l in 0..np as isize {
                    let c = at(i, j, k, l);
                    let mixed = (at(i + 1, j, k, l + 1) - at(i + 1, j, k, l - 1) - at(i - 1, j, k, l + 1)
                        + at(i - 1, j, k, l - 1))
                        * 0.25
                        * inv_d2;
                    let dpp = (at(i, j, k, l + 1) - 2.0 * c + at(i, j, k, l - 1)) * inv_d2;
                    let lap_y = (at(i, j + 1, k, l) + at(i, j - 1, k, l) + at(i, j, k + 1, l) + at(i, j, k - 1, l)
                        - 4.0 * c)
                        * inv_d2;
                    let idx = g.index(i, j, k, l as usize);
                    chunk[idx - i * plane] = 2.0 * mixed - dpp - lap_y + q_samples[idx] * c;
                }
            }
        }
    });
    let values = ray_integrate(g, &r);
    Ok(ExpansionCoeff { order: prev.order + 1, rho: prev.rho, grid: g.clone(), values })
}

/// The stencil reads one node past every `xi` and `y` face and the first `p`
/// node; those nodes must carry no signal.
fn check_margin(c: &ExpansionCoeff) -> Result<()> {
    let g = &c.grid;
    let tol = 1e-12 * c.max_abs();
    let (nx, ny, np) = (g.xi.n, g.y.n, g.p.n);
    let worst = |axis: &'static str, v: f64| -> Result<()> {
        if v.abs() > tol {
            return Err(Error::StencilMargin { axis, needed: 2 });
        }
        Ok(())
    };
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..ny {
                let base = g.index(i, j, k, 0);
                worst("p", c.values[base])?;
                let edge_xi = i < 2 || i + 2 >= nx;
                let edge_y = j < 2 || j + 2 >= ny || k < 2 || k + 2 >= ny;
                if edge_xi || edge_y {
                    let axis = if edge_xi { "xi" } else { "y" };
                    for l in 0..np {
                        worst(axis, c.values[base + l])?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// The coefficients `a_0..=a_N` for one direction, with the potential
/// samples they were built from.
#[derive(Clone, Debug)]
pub struct BornExpansion {
    pub terms: Vec<ExpansionCoeff>,
    pub q_samples: Vec<f64>,
}

impl BornExpansion {
    pub fn new(q: &dyn SpaceTimePotential, omega: Vec3, order: usize, step: f64) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder(order));
        }
        let grid = AlignedGrid::for_potential(q, omega, step)?;
        let q_samples = grid.sample(q);
        let mut terms = vec![a0_from_samples(q.rho(), grid, &q_samples)];
        for _ in 0..order {
            let next = a_next_from_samples(&q_samples, terms.last().unwrap())?;
            terms.push(next);
        }
        Ok(Self { terms, q_samples })
    }

    pub fn grid(&self) -> &AlignedGrid {
        &self.terms[0].grid
    }

    /// `G_j(xi, p) = int q a_j dy`, laid out `[xi][p]`: the transverse
    /// moments that a measurement plane `delta(t + s' + x . omega)` sees.
    pub fn transverse_moments(&self) -> Vec<Vec<f64>> {
        self.weighted_moments(&self.q_samples)
    }

    /// `int w a_j dy` for a weight sampled on the aligned grid.
    pub fn weighted_moments(&self, weight: &[f64]) -> Vec<Vec<f64>> {
        let g = self.grid();
        let (nx, ny, np) = (g.xi.n, g.y.n, g.p.n);
        let area = g.y.step * g.y.step;
        self.terms
            .iter()
            .map(|c| {
                let mut out = vec![0.0; nx * np];
                out.par_chunks_mut(np).enumerate().for_each(|(i, row)| {
                    for j in 0..ny {
                        for k in 0..ny {
                            let base = g.index(i, j, k, 0);
                            for l in 0..np {
                                row[l] += weight[base + l] * c.values[base + l];
                            }
                        }
                    }
                    row.iter_mut().for_each(|v| *v *= area);
                });
                out
            })
            .collect()
    }

    /// `sum_j a_j(t, x) (delta_eta * h_j)(t + s - x . omega)`; `eta = 0`
    /// uses the unmollified `h_j`.
    pub fn scattered_value(&self, s: f64, mollifier: Option<&Mollifier>, t: f64, x: Vec3) -> f64 {
        let phase = t + s - dot(x, self.grid().omega);
        let mut acc = 0.0;
        for c in &self.terms {
            let profile = match mollifier {
                Some(m) => m.h(c.order as i32, phase).unwrap(),
                None => h_profile(c.order as i32, phase).unwrap(),
            };
            if profile != 0.0 {
                acc += c.eval(t, x) * profile;
            }
        }
        acc
    }
}

/// The expansion approximation `sum_{j <= N} a_j h_j` of `u_sc^-` on the same
/// lattice as `scattered_minus` with the same arguments. The aligned grid
/// uses the solver spacing `h`. `eta = 0` gives the unmollified field.
pub fn born_scattered(
    q: &dyn SpaceTimePotential,
    s: f64,
    omega: Vec3,
    order: usize,
    eta: f64,
    window: &SolveWindow,
    h: f64,
) -> Result<SpaceTimeField> {
    let expansion = BornExpansion::new(q, omega, order, h)?;
    let mollifier = if eta == 0.0 { None } else { Some(Mollifier::new(eta)?) };
    let grid = Grid3::centered(window.box_radius, h)?;
    let dt = window.dt(h);
    let (n_start, n_end) = lattice_range(window.t_start, window.t_end, dt);
    let nt = (n_end - n_start + 1) as usize;
    let t_start = n_start as f64 * dt;
    let mut field = SpaceTimeField::zeros(grid, t_start, dt, nt);
    for n in 0..nt {
        let t = field.time(n);
        field.slice_mut(n).par_iter_mut().enumerate().for_each(|(idx, v)| {
            *v = expansion.scattered_value(s, mollifier.as_ref(), t, grid.point_of(idx));
        });
    }
    field.meta = Some(crate::field::IncidentMeta { s, omega, eta });
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_bump_potential, TimeProfile};

    fn sample_q() -> crate::potential::Potential {
        make_bump_potential(
            &[[0.2, -0.1, 0.1], [-0.3, 0.2, 0.0]],
            &[0.4, 0.35],
            TimeProfile::Bump { center: 0.0, half_width: 0.2 },
            0.5,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn ray_sum_matches_point_quadrature() {
        let q = sample_q();
        let omega = crate::geometry::normalize([0.3, -0.5, 0.8]);
        let c = a0(&q, omega, 0.025).unwrap();
        let scale = c.max_abs();
        for (t, x) in [(0.1, [0.2, 0.1, 0.3]), (-0.2, [0.0, 0.0, 0.0]), (0.4, [-0.5, 0.3, 0.6])] {
            let exact = a0_point(&q, t, x, omega).unwrap();
            // Interpolation off the nodes dominates the difference.
            assert!((c.eval(t, x) - exact).abs() < 2e-2 * scale, "{} vs {exact}", c.eval(t, x));
        }
    }

    #[test]
    fn rejects_order_two() {
        let q = sample_q();
        assert!(matches!(BornExpansion::new(&q, [0.0, 0.0, 1.0], 2, 0.1), Err(Error::UnsupportedOrder(2))));
    }

    #[test]
    fn margin_violation_names_axis() {
        let q = sample_q();
        let mut c = a0(&q, [0.0, 0.0, 1.0], 0.1).unwrap();
        let idx = c.grid.index(0, 5, 5, 5);
        c.values[idx] = 1.0;
        assert!(matches!(a_next(&q, &c), Err(Error::StencilMargin { axis: "xi", .. })));
    }
}
