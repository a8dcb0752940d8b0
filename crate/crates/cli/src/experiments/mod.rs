//! The experiment drivers. Each one reads its knobs from an
//! [`ExperimentConfig`], does its numerical work through `bslab-core` and
//! returns an [`Outcome`]; nothing here touches the file system.

mod energy;
mod lipschitz;
mod profiles;
mod pseudolin;
mod radon_roundtrip;
mod reconstruct;
mod smallness;
mod supports;
mod weighted_radon;

use std::time::Instant;

use bslab_core::field::Volume;
use bslab_core::geometry::Grid3;
use bslab_core::potential::Potential;
use bslab_core::scattering::PairingCache;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{Metrics, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    RadonRoundtrip,
    Energy,
    Supports,
    Pseudolin,
    BornSmallness,
    Reconstruct,
    Lipschitz,
    Profiles,
    WeightedRadon,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::RadonRoundtrip,
        Experiment::Energy,
        Experiment::Supports,
        Experiment::Pseudolin,
        Experiment::BornSmallness,
        Experiment::Reconstruct,
        Experiment::Lipschitz,
        Experiment::Profiles,
        Experiment::WeightedRadon,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::RadonRoundtrip => "radon-roundtrip",
            Experiment::Energy => "energy",
            Experiment::Supports => "supports",
            Experiment::Pseudolin => "pseudolin",
            Experiment::BornSmallness => "born-smallness",
            Experiment::Reconstruct => "reconstruct",
            Experiment::Lipschitz => "lipschitz",
            Experiment::Profiles => "profiles",
            Experiment::WeightedRadon => "weighted-radon",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
            HarnessError::Usage(format!("unknown experiment `{name}` (known: {})", known.join(", ")))
        })
    }

    /// Whether the experiment draws a random ensemble.
    pub fn uses_ensemble(&self) -> bool {
        matches!(
            self,
            Experiment::RadonRoundtrip | Experiment::Energy | Experiment::Lipschitz | Experiment::WeightedRadon
        )
    }

    /// Whether the experiment synthesizes backscattering cubes on the
    /// configured sigma grid.
    pub fn uses_cube(&self) -> bool {
        matches!(self, Experiment::Supports | Experiment::Reconstruct | Experiment::Lipschitz)
    }

    pub fn required_potentials(&self) -> &'static [&'static str] {
        match self {
            Experiment::Supports | Experiment::Reconstruct => &["q"],
            Experiment::Pseudolin => &["q1", "q2"],
            Experiment::BornSmallness => &["q1", "q2", "dq"],
            Experiment::Profiles => &["source"],
            _ => &[],
        }
    }

    /// Names of every metric the experiment reports.
    pub fn metric_names(&self) -> &'static [&'static str] {
        match self {
            Experiment::RadonRoundtrip => {
                &["roundtrip_error", "roundtrip_seconds", "stability_spread", "scale_invariance", "stability_min", "stability_max"]
            }
            Experiment::Energy => &["energy_drift", "gronwall_violations", "gronwall_max_ratio", "potential_sup"],
            Experiment::Supports => &[
                "free_cone",
                "minus_half_space",
                "plus_half_space",
                "amplitude_wedge",
                "cube_sigma_support_born",
                "cube_sigma_support_fdtd",
                "supports_seconds",
            ],
            Experiment::Pseudolin => &[
                "pseudolin_residual",
                "pseudolin_samples",
                "pseudolin_refined_ratio",
                "backscatter_weight",
                "pair_weight_formula",
            ],
            Experiment::BornSmallness => &["m10_ratio", "m11_ratio", "m10_halving", "m11_halving"],
            Experiment::Reconstruct => {
                &["reconstruction_error", "reconstruction_monotone", "reconstruction_seconds", "iteration_residual"]
            }
            Experiment::Lipschitz => &["lipschitz_finite", "lipschitz_max_over_median", "lipschitz_constant"],
            Experiment::Profiles => &["far_field_error", "translation_shift_error"],
            Experiment::WeightedRadon => &["weighted_ratio_spread", "weighted_constant", "unit_weight_bit_exact"],
        }
    }
}

/// What the drivers share besides the configuration.
pub struct Context<'a> {
    pub cache: &'a dyn PairingCache,
}

pub fn run_experiment(cfg: &ExperimentConfig, ctx: &Context<'_>) -> Result<Outcome> {
    cfg.validate()?;
    let kind = cfg.kind()?;
    let start = Instant::now();
    let mut m = Metrics::new(&cfg.tolerances);
    let mut out = Outcome::default();
    match kind {
        Experiment::RadonRoundtrip => radon_roundtrip::run(cfg, &mut m, &mut out)?,
        Experiment::Energy => energy::run(cfg, &mut m, &mut out)?,
        Experiment::Supports => supports::run(cfg, ctx, &mut m, &mut out, start)?,
        Experiment::Pseudolin => pseudolin::run(cfg, &mut m, &mut out)?,
        Experiment::BornSmallness => smallness::run(cfg, ctx, &mut m, &mut out)?,
        Experiment::Reconstruct => reconstruct::run(cfg, ctx, &mut m, &mut out, start)?,
        Experiment::Lipschitz => lipschitz::run(cfg, ctx, &mut m, &mut out)?,
        Experiment::Profiles => profiles::run(cfg, &mut m, &mut out)?,
        Experiment::WeightedRadon => weighted_radon::run(cfg, &mut m, &mut out)?,
    }
    out.metrics = m.list;
    log::info!("{} finished in {:.1} s", kind.name(), start.elapsed().as_secs_f64());
    Ok(out)
}

pub(crate) fn rng(cfg: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

/// `cfg.ensemble.size` random bump potentials, each scaled so that its sup
/// bound equals `cfg.ensemble.amplitude`.
pub(crate) fn ensemble(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Potential>> {
    let spec = cfg.ensemble.spec(cfg.grid.rho);
    (0..cfg.ensemble.size)
        .map(|_| {
            let raw = bslab_core::potential::random_bump_potential(rng, &spec, 1.0, false)?;
            Ok(raw.scaled(cfg.ensemble.amplitude / raw.sup_bound()))
        })
        .collect()
}

pub(crate) fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// The `z = 0` plane of a volume as a row-major `[nx, ny]` array.
pub(crate) fn mid_plane(v: &Volume) -> (Vec<usize>, Vec<f64>) {
    mid_plane_of(&v.grid, &v.values)
}

pub(crate) fn mid_plane_of(grid: &Grid3, values: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let [nx, ny, nz] = grid.dims;
    let k = nz / 2;
    let mut out = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            out.push(values[grid.index(i, j, k)]);
        }
    }
    (vec![nx, ny], out)
}

/// Shortest round-trip text of a value.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v:e}")
}
