//! Support properties: the free light cone, the half-space supports of the
//! scattered solutions, the support wedge of the amplitude in `s'` and the
//! sigma-support of the backscattering cube.

use std::time::Instant;

use bslab_core::geometry::{dot, norm, DirectionSet, Grid3, UniformGrid1, Vec3};
use bslab_core::potential::{cutoff, Potential, SpaceTimePotential};
use bslab_core::scattering::pairing::{fdtd_plane_pairing, scatter_box};
use bslab_core::scattering::{
    backscatter_cube, principal_term, AmplitudeSample, Backend, CubeLayout, DataCube, Synthesis, SUPPORT_SLACK,
};
use bslab_core::solver::plane_wave::{ScatterRun, ScatterSide};
use bslab_core::solver::{run as solve, Boundary, ConeMonitor, HalfSpaceMonitor, Init, SolveSpec, Source};

use super::{fmt, Context};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{Metrics, Outcome, Series, Table};

const LIMIT: f64 = 1e-6;

pub(super) fn run(
    cfg: &ExperimentConfig,
    ctx: &Context<'_>,
    m: &mut Metrics<'_>,
    out: &mut Outcome,
    start: Instant,
) -> Result<()> {
    let q = cfg.potential("q")?;
    let synth = cfg.synthesis(Backend::Fdtd, cfg.grid.h);
    let slack = SUPPORT_SLACK * synth.eta;
    let mut table = Table::new("supports", &["check", "outside_max", "field_max", "ratio", "holds"]);
    let mut record = |m: &mut Metrics<'_>, name: &str, outside: f64, max: f64, note: &str| {
        let ratio = if max > 0.0 { outside / max } else { 0.0 };
        table.row([name.to_string(), fmt(outside), fmt(max), fmt(ratio), (ratio <= LIMIT).to_string()]);
        m.at_most(name, ratio, LIMIT, note);
    };

    let cone = free_cone(cfg, slack)?;
    record(m, "free_cone", cone.outside_max, cone.field_max, "free wave outside |x| <= r0 + t + 10 eta");

    let dirs = cfg.directions()?;
    let omega = dirs.dirs[0];
    let s = 0.1;
    let (minus, plus) = half_spaces(&q, s, omega, &synth, slack)?;
    record(m, "minus_half_space", minus.outside_max, minus.field_max, "u_sc^- where t + s - x.w < -10 eta");
    record(m, "plus_half_space", plus.outside_max, plus.field_max, "u_sc^+ where t + s - x.w > 10 eta");

    let (outside, max, series) = amplitude_wedge(&q, &dirs, &synth)?;
    record(m, "amplitude_wedge", outside, max, "A(s', w'; s, w) beyond s' = s + rho |w - w'| + 10 eta");
    out.series.push(series);

    let born = born_cube(cfg, &q, ctx)?;
    let (lo, hi) = tail_window(&q, born.eta);
    let (below, above) = born.tails(lo, hi);
    record(m, "cube_sigma_support_born", below.max(above), born.max_abs(), "Born cube outside |sigma| <= rho + 10 eta");

    let fdtd = fdtd_cube(cfg, &q, ctx)?;
    let (lo, hi) = tail_window(&q, fdtd.eta);
    let (below, above) = fdtd.tails(lo, hi);
    record(m, "cube_sigma_support_fdtd", below.max(above), fdtd.max_abs(), "FDTD cube outside |sigma| <= rho + 10 eta");

    m.seconds("supports_seconds", start.elapsed().as_secs_f64(), 600.0, "wall time of the suite");
    out.tables.push(table);
    Ok(())
}

fn tail_window(q: &Potential, eta: f64) -> (f64, f64) {
    let need = q.rho() + SUPPORT_SLACK * eta;
    (-need, need)
}

/// A pulse of radius `0.3 rho` evolved on a box of radius `1.5 rho` until
/// the cone reaches the box.
fn free_cone(cfg: &ExperimentConfig, slack: f64) -> Result<ConeMonitor> {
    let rho = cfg.grid.rho;
    let grid = Grid3::centered(1.5 * rho, cfg.grid.h)?;
    let dt = cfg.grid.dt();
    let r0 = 0.3 * rho;
    let steps = ((1.5 * rho - r0) / dt).ceil() as i64;
    let mut cone = ConeMonitor::new(r0, 0.0, slack);
    solve(
        SolveSpec {
            grid,
            dt,
            cfl: cfg.grid.cfl,
            n_start: 0,
            n_end: steps,
            q: None,
            source: Source::None,
            init: Init::Cauchy { u: grid.sample(|x| cutoff(norm(x) / r0)), ut: vec![0.0; grid.len()] },
            boundary: Boundary::Zero,
        },
        &mut [&mut cone],
    )?;
    Ok(cone)
}

fn half_spaces(
    q: &Potential,
    s: f64,
    omega: Vec3,
    synth: &Synthesis,
    slack: f64,
) -> Result<(HalfSpaceMonitor, HalfSpaceMonitor)> {
    let (t0, t1) = q.time_support();
    let radius = q.rho() + 0.3;
    let mollifier = synth.mollifier()?;
    let mut monitors = Vec::new();
    for (side, sign, t_limit) in [(ScatterSide::Minus, 1.0, t1 + 0.2), (ScatterSide::Plus, -1.0, t0 - 0.2)] {
        let box_radius = scatter_box(q, s, side, t_limit, radius, synth)
            .ok_or_else(|| HarnessError::Config("support run is empty: the potential misses the incident front".into()))?;
        let mut mon = HalfSpaceMonitor::new(s, omega, sign, slack, radius);
        ScatterRun {
            q,
            s,
            omega,
            mollifier,
            h: synth.h,
            cfl: synth.cfl,
            box_radius,
            t_limit,
            side,
            measure_radius: radius,
        }
        .run(&mut [&mut mon])?;
        monitors.push(mon);
    }
    let plus = monitors.pop().unwrap();
    let minus = monitors.pop().unwrap();
    Ok((minus, plus))
}

/// Amplitude against `s'` for the backscattering pair and one oblique pair,
/// across the support edge. Returns the largest value beyond the edge, the
/// largest value overall and the curves.
fn amplitude_wedge(q: &Potential, dirs: &DirectionSet, synth: &Synthesis) -> Result<(f64, f64, Series)> {
    let omega = dirs.dirs[0];
    let oblique = dirs
        .dirs
        .iter()
        .copied()
        .min_by(|a, b| dot(*a, omega).abs().total_cmp(&dot(*b, omega).abs()))
        .unwrap_or(omega);
    let mollifier = synth.mollifier()?;
    let s = 0.0;
    let mut outside = 0.0f64;
    let mut max = 0.0f64;
    let mut lines = Vec::new();
    for (label, omega_prime) in [("w' = -w", bslab_core::geometry::neg(omega)), ("w' oblique", oblique)] {
        let probe = AmplitudeSample { s, s_prime: 0.0, omega, omega_prime, value: 0.0 };
        let edge = probe.support_edge(q.rho(), synth.eta);
        let delays = UniformGrid1::linspace(edge - 1.2 * q.rho() - 0.5, edge + 0.5, 41)?.values();
        let scattered = fdtd_plane_pairing(q, q, s, omega, omega_prime, &delays, synth)?;
        let mut curve = Vec::with_capacity(delays.len());
        for (&sp, sc) in delays.iter().zip(scattered) {
            let a = principal_term(q, s, omega, sp, omega_prime, Some(&mollifier))? + sc;
            max = max.max(a.abs());
            if sp > edge {
                outside = outside.max(a.abs());
            }
            curve.push((sp - edge, a));
        }
        lines.push((label.to_string(), curve));
    }
    let series = Series {
        name: "amplitude_wedge".into(),
        title: "amplitude across the support edge".into(),
        x_label: "s' - edge".into(),
        y_label: "A".into(),
        lines,
        log_y: false,
    };
    Ok((outside, max, series))
}

fn born_cube(cfg: &ExperimentConfig, q: &Potential, ctx: &Context<'_>) -> Result<DataCube> {
    let layout = CubeLayout {
        sigma_prime: cfg.sigma_prime_grid(q.time_support())?,
        sigma: cfg.sigma_grid()?,
        dirs: cfg.directions()?,
    };
    Ok(backscatter_cube(q, &layout, &cfg.synthesis(Backend::Born, cfg.grid.h), ctx.cache)?)
}

/// FDTD cube on a coarse grid with a few directions and three sigma' values.
fn fdtd_cube(cfg: &ExperimentConfig, q: &Potential, ctx: &Context<'_>) -> Result<DataCube> {
    let h = cfg.params.aux_h.unwrap_or(cfg.grid.h);
    let synth = cfg.synthesis(Backend::Fdtd, h);
    let (t0, t1) = q.time_support();
    let half = q.rho() + SUPPORT_SLACK * synth.eta + 4.0 * h;
    let layout = CubeLayout {
        sigma_prime: UniformGrid1::linspace(-0.5 * t1, -0.5 * t0, 3)?,
        sigma: UniformGrid1::symmetric(half, 2.0 * h)?,
        dirs: DirectionSet::with_count(cfg.params.aux_directions.unwrap_or(6))?,
    };
    Ok(backscatter_cube(q, &layout, &synth, ctx.cache)?)
}
