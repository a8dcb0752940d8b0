//! The pseudo-linearization identity `A_1 - A_2 = int (q_1 - q_2) u_1^- u_2^+`
//! checked by two independent routes, and the backscattering weight of the
//! delta-delta product.

use bslab_core::geometry::{dot, neg, DirectionSet, Vec3};
use bslab_core::inversion::pseudolin_residual;
use bslab_core::scattering::{delta_pair_weight, Backend, PseudolinGroup};

use super::fmt;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Check, Metrics, Outcome, Series, Table};

pub(super) fn run(cfg: &ExperimentConfig, m: &mut Metrics<'_>, out: &mut Outcome) -> Result<()> {
    pair_weight(cfg, m)?;

    let q1 = cfg.potential("q1")?;
    let q2 = cfg.potential("q2")?;
    let dirs = DirectionSet::fibonacci(cfg.params.aux_directions.unwrap_or(16))?;
    let delays = if cfg.params.delays.is_empty() { vec![-0.2, -0.05, 0.05, 0.2] } else { cfg.params.delays.clone() };
    let measure =
        if cfg.params.measurement_delays.is_empty() { vec![-0.1, 0.1] } else { cfg.params.measurement_delays.clone() };
    let groups: Vec<PseudolinGroup> = dirs
        .dirs
        .iter()
        .flat_map(|&omega| {
            let measure = &measure;
            delays.iter().map(move |&s| PseudolinGroup {
                s,
                omega,
                measurements: measure.iter().map(|&sp| (sp, neg(omega))).collect(),
            })
        })
        .collect();

    let synth = cfg.synthesis(Backend::Fdtd, cfg.grid.h);
    let full = pseudolin_residual(&q1, &q2, &groups, &synth)?;
    m.at_most("pseudolin_residual", full.residual, 0.05, "relative l2 residual between the two sides");
    m.push("pseudolin_samples", groups.len() as f64, Check::AtLeast(64.0), "number of (s, w) configurations");
    let mut table = Table::new("pseudolin_samples", &["s", "omega_x", "omega_y", "omega_z", "s_prime", "lhs", "rhs"]);
    for smp in &full.samples {
        table.row([
            fmt(smp.s),
            fmt(smp.omega[0]),
            fmt(smp.omega[1]),
            fmt(smp.omega[2]),
            fmt(smp.s_prime),
            fmt(smp.lhs),
            fmt(smp.rhs),
        ]);
    }
    out.tables.push(table);
    out.series.push(Series {
        name: "pseudolin_sides".into(),
        title: "pseudo-linearization: both sides per sample".into(),
        x_label: "sample".into(),
        y_label: "value".into(),
        lines: vec![
            ("synthesized difference".into(), full.samples.iter().enumerate().map(|(i, s)| (i as f64, s.lhs)).collect()),
            ("product quadrature".into(), full.samples.iter().enumerate().map(|(i, s)| (i as f64, s.rhs)).collect()),
        ],
        log_y: false,
    });

    // Refinement on a subset of the configurations.
    let aux_h = cfg.params.aux_h.unwrap_or(0.5 * cfg.grid.h);
    let subset_len = cfg.params.aux_groups.unwrap_or(8).min(groups.len());
    let stride = (groups.len() / subset_len.max(1)).max(1);
    let subset: Vec<PseudolinGroup> = groups.iter().step_by(stride).take(subset_len).cloned().collect();
    let coarse = pseudolin_residual(&q1, &q2, &subset, &synth)?;
    let fine = pseudolin_residual(&q1, &q2, &subset, &cfg.synthesis(Backend::Fdtd, aux_h))?;
    m.at_most(
        "pseudolin_refined_ratio",
        fine.residual / coarse.residual,
        1.0,
        format!(
            "residual at h = {aux_h} over residual at h = {} on {} configurations ({} and {})",
            cfg.grid.h,
            subset.len(),
            coarse.residual,
            fine.residual
        ),
    );
    Ok(())
}

/// The weight `2 (4 - (1 + w.w')^2)^{-1/2}` against the coarea density of
/// the two plane phases `t + s - x.w` and `t + s' - x.w'` in space-time,
/// `|grad phi_1 ^ grad phi_2|^{-1}` from the Gram determinant, times 2.
fn pair_weight(cfg: &ExperimentConfig, m: &mut Metrics<'_>) -> Result<()> {
    let dirs = cfg.directions()?;
    let mut backscatter = 0.0f64;
    for &w in &dirs.dirs {
        backscatter = backscatter.max((delta_pair_weight(w, neg(w))? - 1.0).abs());
    }
    m.push("backscatter_weight", backscatter, Check::Equals(0.0), "max |w(w, -w) - 1| over the direction set");

    let gram = |a: Vec3, b: Vec3| {
        let ga = [1.0, -a[0], -a[1], -a[2]];
        let gb = [1.0, -b[0], -b[1], -b[2]];
        let d = |u: &[f64; 4], v: &[f64; 4]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        2.0 / (d(&ga, &ga) * d(&gb, &gb) - d(&ga, &gb).powi(2)).sqrt()
    };
    let mut worst = 0.0f64;
    for &a in &dirs.dirs {
        for &b in &dirs.dirs {
            if dot(a, b) > 0.9 {
                continue;
            }
            let w = delta_pair_weight(a, b)?;
            worst = worst.max((w - gram(a, b)).abs() / w);
        }
    }
    m.at_most("pair_weight_formula", worst, 1e-12, "closed-form weight against twice the Gram coarea density");
    Ok(())
}
