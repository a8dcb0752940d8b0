//! Weighted Radon transforms with smooth weights: the ratio
//! `|R_mu f|_{L2(S2;H1)} / (sup_w |mu(., w)|_{C4} |f|_{L2})` over an ensemble.

use bslab_core::field::Volume;
use bslab_core::geometry::{dot, UniformGrid1, Vec3};
use bslab_core::norms::fd_sup_norm;
use bslab_core::potential::SpaceTimePotential;
use bslab_core::radon::{radon_forward, radon_weighted, sobolev_data_norm};
use rand::Rng;

use super::{ensemble, fmt, rng};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Metrics, Outcome, Table};

/// Amplitude of the weight's oscillation around 1.
const WOBBLE: f64 = 0.3;
/// Probe spacing of the C4 estimate.
const PROBE: f64 = 0.1;

pub(super) fn run(cfg: &ExperimentConfig, m: &mut Metrics<'_>, out: &mut Outcome) -> Result<()> {
    let rho = cfg.grid.rho;
    let grid = bslab_core::geometry::Grid3::centered(rho, cfg.grid.h)?;
    let dirs = cfg.directions()?;
    let sigma = cfg.sigma_grid()?;
    let mut rng = rng(cfg);
    let members = ensemble(cfg, &mut rng)?;
    let n_probe = (2.0 * rho / PROBE).round() as usize + 1;
    let axis = UniformGrid1::linspace(-rho, rho, n_probe)?;
    let axes = [axis, axis, axis];

    let mut table = Table::new("weighted_radon", &["member", "a_x", "a_y", "a_z", "c4_norm", "ratio"]);
    let mut ratios = Vec::with_capacity(members.len());
    let mut exact = true;
    for (k, q) in members.iter().enumerate() {
        let (t0, t1) = q.time_support();
        let t = 0.5 * (t0 + t1);
        let f = Volume::from_fn(grid, |x| q.value(t, x));
        let a: Vec3 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let mu = move |x: Vec3, w: Vec3| 1.0 + WOBBLE * (dot(a, x) + w[2]).sin();
        let mut c4 = 0.0f64;
        for &w in &dirs.dirs {
            c4 = c4.max(fd_sup_norm(&axes, 4, |c| mu([c[0], c[1], c[2]], w))?);
        }
        let weighted = radon_weighted(&f, &mu, &dirs, &sigma, rho)?;
        let ratio = sobolev_data_norm(&weighted, 1) / (c4 * f.l2_norm());
        table.row([k.to_string(), fmt(a[0]), fmt(a[1]), fmt(a[2]), fmt(c4), fmt(ratio)]);
        ratios.push(ratio);

        let unit = radon_weighted(&f, &|_: Vec3, _: Vec3| 1.0, &dirs, &sigma, rho)?;
        let plain = radon_forward(&f, &dirs, &sigma, rho)?;
        exact &= unit.values.iter().zip(&plain.values).all(|(x, y)| x.to_bits() == y.to_bits());
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    m.at_most("weighted_ratio_spread", hi / lo, 10.0, "max/min of the normalized ratio over the ensemble");
    m.info("weighted_constant", hi, "the bounding constant: largest normalized ratio");
    m.flag("unit_weight_bit_exact", exact, "mu = 1 reproduces the plain transform bit for bit");
    out.tables.push(table);
    Ok(())
}
