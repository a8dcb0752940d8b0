//! Linearized reconstruction from synthesized backscattering data over a
//! sweep of amplitudes, with optional fixed-point refinement.

use std::time::Instant;

use bslab_core::geometry::Grid3;
use bslab_core::inversion::{born_iterate, linearized_reconstruct, reconstruction_errors};
use bslab_core::potential::SpaceTimePotential;
use bslab_core::scattering::{backscatter_cube, CubeLayout};

use super::{fmt, mid_plane_of, Context};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{ArrayOut, Check, Metrics, Outcome, Series, Table};

pub(super) fn run(
    cfg: &ExperimentConfig,
    ctx: &Context<'_>,
    m: &mut Metrics<'_>,
    out: &mut Outcome,
    start: Instant,
) -> Result<()> {
    let shape = cfg.potential("q")?;
    let eps = if cfg.params.epsilons.is_empty() { vec![0.04, 0.02, 0.01] } else { cfg.params.epsilons.clone() };
    let rho = cfg.grid.rho;
    let support = shape.time_support();
    let layout = CubeLayout {
        sigma_prime: cfg.sigma_prime_grid(support)?,
        sigma: cfg.sigma_grid()?,
        dirs: cfg.directions()?,
    };
    let synth = cfg.synthesis(cfg.data.backend, cfg.grid.h);
    let grid = Grid3::centered(rho, cfg.grid.h)?;

    let mut table = Table::new("reconstruction", &["epsilon", "relative_error"]);
    let mut lines = Vec::new();
    let mut errors = Vec::new();
    let mut last = None;
    for &e in &eps {
        let t = Instant::now();
        let q = shape.scaled(e);
        let cube = backscatter_cube(&q, &layout, &synth, ctx.cache)?;
        let rec = linearized_reconstruct(&cube, &grid, rho, Some(support))?;
        let errs = reconstruction_errors(&rec, &q);
        let rel = errs.relative()?;
        log::info!("eps {e}: relative error {rel:.4e} ({:.1} s)", t.elapsed().as_secs_f64());
        table.row([fmt(e), fmt(rel)]);
        lines.push((
            format!("eps = {e}"),
            errs.times.iter().zip(errs.error.iter().zip(&errs.truth)).filter(|(_, (_, &n))| n > 0.0).map(|(&t, (&a, &n))| (t, a / n)).collect(),
        ));
        errors.push(rel);
        last = Some((q, cube, rec));
    }
    let final_error = *errors.last().unwrap_or(&f64::NAN);
    m.at_most(
        "reconstruction_error",
        final_error,
        0.2,
        format!("|q_rec - q|_(Linf L2) / |q|_(Linf L2) at eps = {}", eps.last().copied().unwrap_or(f64::NAN)),
    );
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    m.flag(
        "reconstruction_monotone",
        monotone,
        format!("errors {:?} strictly decrease along eps {:?}", errors, eps),
    );

    if let Some((_q, cube, rec)) = &last {
        let mid = rec.times.n / 2;
        let (dims, values) = mid_plane_of(&grid, rec.slice(mid));
        out.arrays.push(ArrayOut {
            name: "reconstruction_mid_slice_z0".into(),
            dims,
            values,
            meta: Some(serde_json::json!({ "t": rec.times.value(mid), "h": cfg.grid.h })),
        });
        if let Some(iters) = cfg.params.iterations.filter(|&n| n > 0) {
            let it = born_iterate(cube, rec, iters, &synth, ctx.cache)?;
            let first = it.residuals.first().copied().unwrap_or(f64::NAN);
            m.push(
                "iteration_residual",
                it.residuals[it.best_index] / first,
                Check::Info,
                format!("best data residual over the initial one after {} iterations", it.residuals.len() - 1),
            );
            out.series.push(Series {
                name: "iteration_residuals".into(),
                title: "fixed-point iteration".into(),
                x_label: "iteration".into(),
                y_label: "data residual".into(),
                lines: vec![("residual".into(), it.residuals.iter().enumerate().map(|(k, &r)| (k as f64, r)).collect())],
                log_y: true,
            });
        }
    }
    m.seconds("reconstruction_seconds", start.elapsed().as_secs_f64(), 1800.0, "wall time of the sweep");
    out.series.push(Series {
        name: "slice_errors".into(),
        title: "relative error per time slice".into(),
        x_label: "t".into(),
        y_label: "|q_rec - q|_L2 / |q|_L2".into(),
        lines,
        log_y: false,
    });
    out.tables.push(table);
    Ok(())
}
