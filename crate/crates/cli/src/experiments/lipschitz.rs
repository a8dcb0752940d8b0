//! Empirical Lipschitz constant of the inverse map: potential differences
//! over data differences on random pairs of small potentials.

use bslab_core::geometry::Grid3;
use bslab_core::inversion::{lipschitz_ratio, slice_times};
use bslab_core::potential::SpaceTimePotential;
use bslab_core::scattering::{backscatter_cube, CubeLayout};

use super::{ensemble, fmt, rng, Context};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Metrics, Outcome, Series, Table};

pub(super) fn run(cfg: &ExperimentConfig, ctx: &Context<'_>, m: &mut Metrics<'_>, out: &mut Outcome) -> Result<()> {
    let mut rng = rng(cfg);
    let mut draw = cfg.clone();
    draw.ensemble.size = 2 * cfg.ensemble.size;
    let members = ensemble(&draw, &mut rng)?;
    let support = members.iter().map(|q| q.time_support()).fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| {
        (a.0.min(b.0), a.1.max(b.1))
    });
    let layout = CubeLayout {
        sigma_prime: cfg.sigma_prime_grid(support)?,
        sigma: cfg.sigma_grid()?,
        dirs: cfg.directions()?,
    };
    let times = slice_times(&layout.sigma_prime);
    let grid = Grid3::centered(cfg.grid.rho, cfg.grid.h)?;
    let synth = cfg.synthesis(cfg.data.backend, cfg.grid.h);

    let mut table = Table::new("lipschitz", &["pair", "ratio"]);
    let mut ratios = Vec::with_capacity(cfg.ensemble.size);
    for (k, pair) in members.chunks(2).enumerate() {
        let (q1, q2) = (&pair[0], &pair[1]);
        let a1 = backscatter_cube(q1, &layout, &synth, ctx.cache)?;
        let a2 = backscatter_cube(q2, &layout, &synth, ctx.cache)?;
        let r = match lipschitz_ratio(q1, q2, &a1, &a2, &grid, &times) {
            Ok(r) => r,
            Err(bslab_core::Error::UndefinedRatio(d)) => {
                log::warn!("pair {k}: data difference {d} is below the ratio floor");
                f64::INFINITY
            }
            Err(e) => return Err(e.into()),
        };
        log::info!("pair {k}: ratio {r:.6e}");
        table.row([k.to_string(), fmt(r)]);
        ratios.push(r);
    }
    let finite = ratios.iter().all(|r| r.is_finite());
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let max = sorted.last().copied().unwrap_or(f64::NAN);
    m.flag("lipschitz_finite", finite, "every pair has a finite ratio");
    m.at_most("lipschitz_max_over_median", max / median, 1.5, "max ratio over the median ratio");
    m.info("lipschitz_constant", max, "empirical constant: the largest ratio");
    out.series.push(Series {
        name: "lipschitz_ratios".into(),
        title: "|q1 - q2| / |A1 - A2| per pair".into(),
        x_label: "pair".into(),
        y_label: "ratio".into(),
        lines: vec![("ratio".into(), ratios.iter().enumerate().map(|(k, &r)| (k as f64, r)).collect())],
        log_y: false,
    });
    out.tables.push(table);
    Ok(())
}
