//! Scattering amplitudes, backscattering data cubes, asymptotic wave
//! profiles and the components of the pseudo-linearization operator.
//!
//! The amplitude pairs `q` with `u^- = delta_eta(t + s - x . omega) + u_sc^-`
//! against a measurement plane `delta_eta(t + s' - x . omega')`. The
//! delta-delta part is reduced analytically to a plane integral; only the
//! scattered part needs a field, from the FDTD solver or from the
//! progressive wave expansion.

pub mod components;
pub mod cube;
pub mod pairing;
pub mod profiles;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::born::BornExpansion;
use crate::error::{invalid, Error, Result};
use crate::geometry::{add, dot, norm, orthonormal_frame, scale, sub, Vec3};
use crate::mollifier::Mollifier;
use crate::potential::SpaceTimePotential;
use crate::solver::DEFAULT_CFL;

pub use components::{m_component, pseudolinearization_check, MComponent, PseudolinGroup, PseudolinSample};
pub use cube::{
    backscatter_cube, principal_cube, scattered_pairing_cube, CubeLayout, DataCube, MemoryCache, NoCache,
    PairingCache,
};
pub use pairing::{PlanePairing, ProductPairing, RestrictedRecorder};
pub use profiles::{
    far_field_profile_streaming, wave_profile_far_field, wave_profile_from_source, FarFieldShell, ProfileSampler,
};

/// Direction pairs closer than this are rejected as forward scattering.
pub const FORWARD_TOLERANCE: f64 = 1e-6;

/// Mollification slack used by support checks, in units of `eta`.
pub const SUPPORT_SLACK: f64 = 10.0;

/// How the scattered field is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Streaming FDTD solves of `u_sc^-`.
    Fdtd,
    /// The expansion `a_0 h_0 + a_1 h_1` of `u_sc^-`.
    Born,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Fdtd => "fdtd",
            Backend::Born => "born",
        }
    }
}

/// Discretization of a data synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub backend: Backend,
    /// Solver grid spacing.
    pub h: f64,
    /// Mollifier width of the incident and measurement planes.
    pub eta: f64,
    pub cfl: f64,
    /// Spacing of the aligned grid carrying the expansion coefficients.
    pub born_step: f64,
}

impl Synthesis {
    /// `eta = 3h`, the default Courant factor and the expansion on twice the
    /// solver spacing (the expansion only feeds the scattered part, which is
    /// small next to the principal part).
    pub fn new(backend: Backend, h: f64) -> Self {
        Self { backend, h, eta: 3.0 * h, cfl: DEFAULT_CFL, born_step: 2.0 * h }
    }

    pub fn mollifier(&self) -> Result<Mollifier> {
        Mollifier::new(self.eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.eta > 0.0 && self.cfl > 0.0 && self.born_step > 0.0) {
            return Err(invalid(format!("synthesis needs positive h, eta, cfl and expansion step, got {self:?}")));
        }
        Ok(())
    }
}

/// One value `A(s', omega'; s, omega)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSample {
    pub s: f64,
    pub s_prime: f64,
    pub omega: Vec3,
    pub omega_prime: Vec3,
    pub value: f64,
}

impl AmplitudeSample {
    /// Largest `s'` at which the amplitude can be nonzero for a potential
    /// supported in `B(0, rho)`, including the mollification slack.
    pub fn support_edge(&self, rho: f64, eta: f64) -> f64 {
        self.s + rho * norm(sub(self.omega, self.omega_prime)) + SUPPORT_SLACK * eta
    }
}

/// Integration window of the backscattering pairings: for each `sigma'`
/// the integrands live in `(-T - sigma', T - sigma') x B(0, rho)`, and the
/// principal part vanishes for `sigma` outside `[-rho, rho]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeWindow {
    pub t_half: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl WedgeWindow {
    /// `T = t_1 + 2 rho + 10 eta` with `t_1 = max |t|` over the time support.
    pub fn for_potential(q: &dyn SpaceTimePotential, eta: f64) -> Self {
        let (t0, t1) = q.time_support();
        let rho = q.rho();
        Self { t_half: t0.abs().max(t1.abs()) + 2.0 * rho + SUPPORT_SLACK * eta, sigma_lo: -rho, sigma_hi: rho }
    }

    pub fn contains_time(&self, sigma_prime: f64, t: f64) -> bool {
        t > -self.t_half - sigma_prime && t < self.t_half - sigma_prime
    }

    pub fn contains_sigma(&self, sigma: f64) -> bool {
        sigma >= self.sigma_lo && sigma <= self.sigma_hi
    }
}

/// Weight `2 (4 - (1 + omega . omega')^2)^{-1/2}` of the product of the two
/// plane deltas, taken against the surface measure of the codimension-2
/// plane `{t = x . omega - s, t = x . omega' - s'}` in space-time. It equals 1
/// for backscattering.
pub fn delta_pair_weight(omega: Vec3, omega_prime: Vec3) -> Result<f64> {
    let gap = norm(sub(omega, omega_prime));
    if gap < FORWARD_TOLERANCE {
        return Err(Error::ForwardScattering(gap));
    }
    let c = dot(omega, omega_prime).clamp(-1.0, 1.0);
    Ok(2.0 / (4.0 - (1.0 + c) * (1.0 + c)).sqrt())
}

/// `int_{x . nu = c} q(x . omega - s, x) dS(x)`: the trapezoid rule on a
/// square lattice over each term's disc, with the time varying across the
/// plane.
pub fn tilted_plane_integral(q: &dyn SpaceTimePotential, s: f64, omega: Vec3, nu: Vec3, c: f64) -> f64 {
    let (e1, e2) = orthonormal_frame(nu);
    let step = q.quadrature_spacing();
    let mut acc = 0.0;
    for k in 0..q.n_terms() {
        let sup = q.term_support(k);
        let d = c - dot(sup.center, nu);
        if d.abs() >= sup.radius {
            continue;
        }
        // Times met on this disc lie within |x . omega - center . omega| < radius.
        let tc = dot(sup.center, omega) - s;
        if tc + sup.radius <= sup.t_lo || tc - sup.radius >= sup.t_hi {
            continue;
        }
        let a = (sup.radius * sup.radius - d * d).sqrt();
        let foot = add(sup.center, scale(nu, d));
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
                let g = q.time_factor(k, dot(x, omega) - s);
                if g != 0.0 {
                    term += g * q.space_factor(k, x);
                }
            }
        }
        acc += term * step * step;
    }
    acc
}

/// The delta-delta part `int q delta(t + s - x . omega) delta(t + s' - x . omega')`
/// with the pair weight, optionally mollified in both delays.
pub fn principal_term(
    q: &dyn SpaceTimePotential,
    s: f64,
    omega: Vec3,
    s_prime: f64,
    omega_prime: Vec3,
    mollifier: Option<&Mollifier>,
) -> Result<f64> {
    let weight = delta_pair_weight(omega, omega_prime)?;
    let c = dot(omega, omega_prime).clamp(-1.0, 1.0);
    // The codimension-2 plane measure over its projection to x-space.
    let lift = ((3.0 + c) / 2.0).sqrt();
    let gap = sub(omega, omega_prime);
    let len = norm(gap);
    let nu = scale(gap, 1.0 / len);
    let raw = |a: f64, b: f64| tilted_plane_integral(q, a, omega, nu, (a - b) / len);
    let value = match mollifier {
        None => raw(s, s_prime),
        Some(m) => {
            let rule = m.averaging_rule(1.0);
            let partial: Vec<f64> = rule
                .par_iter()
                .map(|&(da, wa)| rule.iter().map(|&(db, wb)| wb * raw(s - da, s_prime - db)).sum::<f64>() * wa)
                .collect();
            partial.iter().sum()
        }
    };
    Ok(weight * lift * value)
}

/// `A(s', omega'; s, omega)` with the principal part in closed form and the
/// scattered part from the configured backend.
pub fn scattering_amplitude(
    q: &dyn SpaceTimePotential,
    s: f64,
    omega: Vec3,
    s_prime: f64,
    omega_prime: Vec3,
    synth: &Synthesis,
) -> Result<AmplitudeSample> {
    synth.validate()?;
    let mollifier = synth.mollifier()?;
    let principal = principal_term(q, s, omega, s_prime, omega_prime, Some(&mollifier))?;
    let scattered = match synth.backend {
        Backend::Fdtd => pairing::fdtd_plane_pairing(q, q, s, omega, omega_prime, &[s_prime], synth)?[0],
        Backend::Born => {
            let expansion = BornExpansion::new(q, omega, 1, synth.born_step)?;
            born_plane_pairing(&expansion, &expansion.q_samples, s, s_prime, omega_prime, &mollifier)
        }
    };
    Ok(AmplitudeSample { s, s_prime, omega, omega_prime, value: principal + scattered })
}

/// `int w (a_0 h_0 + a_1 h_1)(t + s - x . omega) delta_eta(t + s' - x . omega')`
/// summed over the aligned grid; `weight` holds samples on that grid.
pub fn born_plane_pairing(
    expansion: &BornExpansion,
    weight: &[f64],
    s: f64,
    s_prime: f64,
    omega_prime: Vec3,
    mollifier: &Mollifier,
) -> f64 {
    let g = expansion.grid();
    let reach = mollifier.support_radius();
    let cell = g.step().powi(4);
    let partial: Vec<f64> = (0..g.xi.n)
        .into_par_iter()
        .map(|ixi| {
            let xi = g.xi.value(ixi);
            let profiles: Vec<f64> =
                expansion.terms.iter().map(|c| mollifier.h(c.order as i32, xi + s).unwrap()).collect();
            if profiles.iter().all(|&v| v == 0.0) {
                return 0.0;
            }
            let mut acc = 0.0;
            for iy1 in 0..g.y.n {
                for iy2 in 0..g.y.n {
                    let base = g.index(ixi, iy1, iy2, 0);
                    for ip in 0..g.p.n {
                        let w = weight[base + ip];
                        if w == 0.0 {
                            continue;
                        }
                        let (t, x) = g.point(ixi, iy1, iy2, ip);
                        let phase = t + s_prime - dot(x, omega_prime);
                        if phase.abs() > reach {
                            continue;
                        }
                        let field: f64 =
                            expansion.terms.iter().zip(&profiles).map(|(c, &hp)| c.values[base + ip] * hp).sum();
                        acc += w * field * mollifier.delta(phase);
                    }
                }
            }
            acc
        })
        .collect();
    partial.iter().sum::<f64>() * cell
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backscatter_weight_is_one() {
        let omega = [0.0, 0.0, 1.0];
        assert_eq!(delta_pair_weight(omega, [0.0, 0.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn forward_scattering_is_rejected() {
        let omega = [0.6, 0.0, 0.8];
        assert!(matches!(delta_pair_weight(omega, omega), Err(Error::ForwardScattering(_))));
    }
}
