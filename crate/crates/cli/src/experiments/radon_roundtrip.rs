//! Filtered backprojection of the closed-form Gaussian sinogram, and the
//! spread of the two-sided stability ratio over a random ensemble.

use std::f64::consts::PI;
use std::time::Instant;

use bslab_core::field::Volume;
use bslab_core::geometry::{dot, Grid3, UniformGrid1};
use bslab_core::potential::SpaceTimePotential;
use bslab_core::radon::{radon_inverse, radon_stability_ratio, Sinogram};

use super::{ensemble, fmt, mid_plane, rng};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{ArrayOut, Metrics, Outcome, Table};

const SCALE_FACTOR: f64 = 37.5;

pub(super) fn run(cfg: &ExperimentConfig, m: &mut Metrics<'_>, out: &mut Outcome) -> Result<()> {
    let rho = cfg.grid.rho;
    let grid = Grid3::centered(rho, cfg.grid.h)?;
    let dirs = cfg.directions()?;

    // The sinogram of exp(-|x|^2) is pi exp(-p^2) for every direction.
    let start = Instant::now();
    let half = cfg.params.offset_half.unwrap_or(4.0);
    let offsets = UniformGrid1::linspace(-half, half, cfg.data.offsets)?;
    let sino = Sinogram::from_fn(offsets, dirs.clone(), |p, _| PI * (-p * p).exp());
    let rec = radon_inverse(&sino, &grid);
    let exact = Volume::from_fn(grid, |x| (-dot(x, x)).exp());
    let err = rec.relative_error(&exact, Some(rho))?;
    let seconds = start.elapsed().as_secs_f64();
    m.at_most("roundtrip_error", err, 0.05, "relative L2 error inside the ball");
    m.seconds("roundtrip_seconds", seconds, 60.0, "wall time of the round trip");
    let (dims, values) = mid_plane(&rec);
    out.arrays.push(ArrayOut { name: "gaussian_reconstruction_z0".into(), dims, values, meta: None });

    // Stability ratio on the ensemble, sampled at each member's time centre.
    let mut rng = rng(cfg);
    let members = ensemble(cfg, &mut rng)?;
    let sigma = cfg.sigma_grid()?;
    let mut table = Table::new("stability_ratios", &["member", "ratio"]);
    let mut ratios = Vec::with_capacity(members.len());
    let mut first = None;
    for (k, q) in members.iter().enumerate() {
        let (t0, t1) = q.time_support();
        let t = 0.5 * (t0 + t1);
        let f = Volume::from_fn(grid, |x| q.value(t, x));
        let (r, _) = radon_stability_ratio(&f, &dirs, &sigma, rho)?;
        if first.is_none() {
            first = Some(f);
        }
        table.row([k.to_string(), fmt(r)]);
        ratios.push(r);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    m.at_most("stability_spread", hi / lo, 10.0, "max/min of |Rf|_{L2(S2;H1)}/|f|_{L2} over the ensemble");
    m.info("stability_min", lo, "smallest ratio");
    m.info("stability_max", hi, "largest ratio");
    if let Some(f) = first {
        let scaled = Volume { grid, values: f.values.iter().map(|v| v * SCALE_FACTOR).collect() };
        let (a, _) = radon_stability_ratio(&f, &dirs, &sigma, rho)?;
        let (b, _) = radon_stability_ratio(&scaled, &dirs, &sigma, rho)?;
        m.at_most("scale_invariance", (a - b).abs() / a, 1e-10, "relative change of the ratio under f -> 37.5 f");
    }
    out.tables.push(table);
    Ok(())
}
