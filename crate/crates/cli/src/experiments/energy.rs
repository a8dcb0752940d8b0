//! Discrete energy conservation of the free scheme and the Grönwall bound
//! with a potential.

use bslab_core::geometry::{norm, Grid3};
use bslab_core::potential::cutoff;
use bslab_core::solver::{
    energy_series, gronwall_envelope, run as solve, Boundary, EnergyMonitor, Init, Recorder, SolveSpec, Source,
};

use super::{ensemble, fmt, rng};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Metrics, Outcome, Series, Table};

/// Radius of the initial pulse, relative to rho.
const PULSE: f64 = 0.4;

fn pulse(grid: &Grid3, radius: f64) -> Vec<f64> {
    grid.sample(|x| cutoff(norm(x) / radius))
}

pub(super) fn run(cfg: &ExperimentConfig, m: &mut Metrics<'_>, out: &mut Outcome) -> Result<()> {
    let rho = cfg.grid.rho;
    let steps = cfg.params.steps.unwrap_or(500) as i64;

    let grid = Grid3::centered(rho, cfg.grid.h)?;
    let dt = cfg.grid.dt();
    let mut mon = EnergyMonitor::default();
    solve(
        SolveSpec {
            grid,
            dt,
            cfl: cfg.grid.cfl,
            n_start: 0,
            n_end: steps,
            q: None,
            source: Source::None,
            init: Init::Cauchy { u: pulse(&grid, PULSE * rho), ut: vec![0.0; grid.len()] },
            boundary: Boundary::Zero,
        },
        &mut [&mut mon],
    )?;
    let drift = mon.series.max_relative_drift();
    m.at_most("energy_drift", drift, 1e-6, format!("max relative drift of the wave energy over {steps} steps"));
    let w = mon.series.wave();
    let e0 = w.first().copied().unwrap_or(1.0);
    out.series.push(Series {
        name: "energy_drift".into(),
        title: "free evolution: relative energy drift".into(),
        x_label: "t".into(),
        y_label: "|E(t) - E(0)| / E(0)".into(),
        lines: vec![(
            "drift".into(),
            mon.series.times.iter().zip(&w).map(|(&t, &e)| (t, ((e - e0) / e0).abs())).collect(),
        )],
        log_y: false,
    });

    // Grönwall envelope on a random ensemble, on a grid with room around
    // the support so the pulse stays clear of the boundary.
    let h = cfg.params.aux_h.unwrap_or(cfg.grid.h);
    let grid = Grid3::centered(1.2 * rho, h)?;
    let dt = cfg.grid.cfl * h / 3f64.sqrt();
    let mut rng = rng(cfg);
    let members = ensemble(cfg, &mut rng)?;
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    let mut sup_q = 0.0f64;
    let mut table = Table::new("gronwall", &["member", "sup_q", "max_energy_over_envelope", "violations"]);
    for (k, q) in members.iter().enumerate() {
        let (t0, t1) = bslab_core::potential::SpaceTimePotential::time_support(q);
        let mut rec = Recorder::new(1);
        solve(
            SolveSpec {
                grid,
                dt,
                cfl: cfg.grid.cfl,
                n_start: ((t0 - 0.25) / dt).floor() as i64,
                n_end: ((t1 + 0.25) / dt).ceil() as i64,
                q: Some(q),
                source: Source::None,
                init: Init::Cauchy { u: pulse(&grid, PULSE * rho), ut: vec![0.0; grid.len()] },
                boundary: Boundary::Zero,
            },
            &mut [&mut rec],
        )?;
        let field = rec.into_field()?;
        let series = energy_series(&field, Some(q))?;
        let e = series.totals();
        let env = gronwall_envelope(&series.times, &e, series.c_q, 0, None);
        let bad = e.iter().zip(&env).filter(|(a, b)| a > b).count();
        let ratio = e.iter().zip(&env).map(|(a, b)| a / b).fold(0.0, f64::max);
        violations += bad;
        worst = worst.max(ratio);
        sup_q = sup_q.max(series.c_q - 2.0);
        table.row([k.to_string(), fmt(series.c_q - 2.0), fmt(ratio), bad.to_string()]);
        if k == 0 {
            out.series.push(Series {
                name: "gronwall_member0".into(),
                title: "energy against the Grönwall envelope".into(),
                x_label: "t".into(),
                y_label: "E(t)".into(),
                lines: vec![
                    ("energy".into(), series.times.iter().copied().zip(e.iter().copied()).collect()),
                    ("envelope".into(), series.times.iter().copied().zip(env.iter().copied()).collect()),
                ],
                log_y: false,
            });
        }
    }
    m.at_most("gronwall_violations", violations as f64, 0.0, "time levels where E exceeds the envelope");
    m.info("gronwall_max_ratio", worst, "largest E / envelope");
    m.at_most("potential_sup", sup_q, 1.0 + 1e-12, "sup |q| over the ensemble, sampled on the nodes");
    out.tables.push(table);
    Ok(())
}
