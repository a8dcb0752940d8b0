//! Asymptotic wave profiles by two routes (far-field shells of a computed
//! outgoing field and the source integral), and the shift property of the
//! translation representation under free evolution.

use bslab_core::field::Volume;
use bslab_core::geometry::{norm, sub, DirectionSet, Grid3, UniformGrid1};
use bslab_core::potential::cutoff;
use bslab_core::radon::{translation_rep, Sinogram};
use bslab_core::scattering::{far_field_profile_streaming, wave_profile_from_source, FarFieldShell};
use bslab_core::solver::{run as solve, Boundary, Init, Observer, SolveSpec, Source, StepView};

use super::rel_l2;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Metrics, Outcome, Series};

pub(super) fn run(cfg: &ExperimentConfig, m: &mut Metrics<'_>, out: &mut Outcome) -> Result<()> {
    let p = cfg.potential("source")?;
    let h = cfg.grid.h;
    let half = cfg.params.offset_half.unwrap_or(1.1);
    let offsets = UniformGrid1::linspace(-half, half, cfg.data.offsets)?;
    let dirs = cfg.directions()?;
    let shells: Vec<FarFieldShell> = if cfg.params.shells.is_empty() {
        vec![FarFieldShell { r_inner: 1.0, thickness: 0.2 }, FarFieldShell { r_inner: 2.0, thickness: 0.2 }]
    } else {
        cfg.params.shells.iter().map(|s| FarFieldShell { r_inner: s[0], thickness: s[1] }).collect()
    };
    let far = far_field_profile_streaming(&p, &shells, &offsets, &dirs, h, cfg.grid.cfl)?;
    let near = wave_profile_from_source(&p, &offsets, &dirs, h)?;
    m.at_most("far_field_error", rel_l2(&far.values, &near.values), 0.05, "shell extraction against the source formula");
    out.series.push(Series {
        name: "profile_direction0".into(),
        title: "wave profile along the first direction".into(),
        x_label: "s".into(),
        y_label: "u#(s, w)".into(),
        lines: vec![
            ("far-field shells".into(), offsets.values().into_iter().zip(far.row(0).iter().copied()).collect()),
            ("source integral".into(), offsets.values().into_iter().zip(near.row(0).iter().copied()).collect()),
        ],
        log_y: false,
    });

    let err = translation_shift(cfg)?;
    m.at_most("translation_shift_error", err, 0.05, "k(t) against k(0) shifted by t");
    Ok(())
}

/// Captures `u` and a centred `u_t` at one lattice level.
struct Snapshot {
    n: i64,
    u: Vec<f64>,
    ut: Vec<f64>,
}

impl Observer for Snapshot {
    fn observe(&mut self, v: &StepView<'_>) -> bslab_core::Result<()> {
        if v.n == self.n {
            self.u = v.cur.to_vec();
            self.ut = (0..v.cur.len()).map(|i| v.ut(i)).collect();
        }
        Ok(())
    }
}

/// Evolves Cauchy data `(f, 0)` freely for `t ~ 0.3` and compares the
/// translation representation of the state with that of the data shifted
/// by `t`, on offsets spaced so that `t` is a whole number of samples.
fn translation_shift(cfg: &ExperimentConfig) -> Result<f64> {
    let h = cfg.params.aux_h.unwrap_or(cfg.grid.h);
    let rho = cfg.grid.rho;
    let grid = Grid3::centered(1.3 * rho, h)?;
    let dt = cfg.grid.cfl * h / 3f64.sqrt();
    let steps = (0.3 / dt).round() as i64;
    let t = steps as f64 * dt;
    let f1 = Volume::from_fn(grid, |x| cutoff(norm(sub(x, [0.05, 0.0, -0.05])) / (0.7 * rho)));
    let f2 = Volume::zeros(grid);
    let mut snap = Snapshot { n: steps, u: Vec::new(), ut: Vec::new() };
    solve(
        SolveSpec {
            grid,
            dt,
            cfl: cfg.grid.cfl,
            n_start: 0,
            n_end: steps + 1,
            q: None,
            source: Source::None,
            init: Init::Cauchy { u: f1.values.clone(), ut: f2.values.clone() },
            boundary: Boundary::Zero,
        },
        &mut [&mut snap],
    )?;
    let shift = (t / h).ceil() as usize;
    let step = t / shift as f64;
    let half = (1.5 * rho / step).ceil() as usize;
    let p = UniformGrid1::new(-(half as f64) * step, step, 2 * half + 1)?;
    let dirs = DirectionSet::design(26)?;
    let reach = 1.25 * rho;
    let k0 = translation_rep(&f1, &f2, &dirs, &p, reach)?;
    let kt = translation_rep(&Volume::new(grid, snap.u)?, &Volume::new(grid, snap.ut)?, &dirs, &p, reach)?;
    let mut shifted = Sinogram::zeros(p, dirs.clone());
    for d in 0..dirs.len() {
        for i in shift..p.n {
            shifted.row_mut(d)[i] = k0.k.row(d)[i - shift];
        }
    }
    Ok(rel_l2(&kt.k.values, &shifted.values))
}
