//! Size of the scattered parts `M10 dq` and `M11 dq` of the linearized
//! operator against its principal part `M00 dq`, and their scaling with the
//! amplitude of `q_1`.

use bslab_core::potential::SpaceTimePotential;
use bslab_core::scattering::{m_component, CubeLayout, MComponent};

use super::{fmt, Context};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{Metrics, Outcome, Table};

pub(super) fn run(cfg: &ExperimentConfig, ctx: &Context<'_>, m: &mut Metrics<'_>, out: &mut Outcome) -> Result<()> {
    let shape = cfg.potential("q1")?;
    let q2 = cfg.potential("q2")?;
    let dq = cfg.potential("dq")?;
    let eps = if cfg.params.epsilons.is_empty() { vec![0.05, 0.025] } else { cfg.params.epsilons.clone() };
    if eps.len() != 2 {
        return Err(HarnessError::Config("born-smallness needs exactly two epsilons (eps, eps / 2)".into()));
    }
    let synth = cfg.synthesis(cfg.data.backend, cfg.grid.h);
    let layout = CubeLayout {
        sigma_prime: cfg.sigma_prime_grid(dq.time_support())?,
        sigma: cfg.sigma_grid()?,
        dirs: cfg.directions()?,
    };
    let mut table = Table::new("m_norms", &["epsilon", "m00", "m10", "m11"]);
    let mut norms = Vec::new();
    for &e in &eps {
        let q1 = shape.scaled(e);
        let mut row = [0.0; 3];
        for (k, which) in [MComponent::M00, MComponent::M10, MComponent::M11].into_iter().enumerate() {
            row[k] = m_component(&q1, &q2, &dq, which, &layout, &synth, ctx.cache)?.data_norm();
        }
        table.row([fmt(e), fmt(row[0]), fmt(row[1]), fmt(row[2])]);
        norms.push(row);
    }
    let [m00, m10, m11] = norms[0];
    m.at_most("m10_ratio", m10 / m00, 0.3, format!("|M10 dq| / |M00 dq| at eps = {}", eps[0]));
    m.at_most("m11_ratio", m11 / m00, 0.3, format!("|M11 dq| / |M00 dq| at eps = {}", eps[0]));
    let expected = eps[0] / eps[1];
    let deviation = |a: f64, b: f64| ((a / b) / expected - 1.0).abs();
    m.at_most("m10_halving", deviation(m10, norms[1][1]), 0.25, "relative deviation of the norm ratio from eps ratio");
    m.at_most("m11_halving", deviation(m11, norms[1][2]), 0.25, "relative deviation of the norm ratio from eps ratio");
    out.tables.push(table);
    Ok(())
}
