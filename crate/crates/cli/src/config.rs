//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bslab_core::geometry::{DirectionSet, UniformGrid1, Vec3};
use bslab_core::potential::{Bump, EnsembleSpec, Potential, TimeProfile};
use bslab_core::scattering::{Backend, Synthesis, SUPPORT_SLACK};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiments::Experiment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory; the command line `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub grid: GridConfig,
    #[serde(default)]
    pub data: DataConfig,
    /// Named potentials; each experiment documents the names it reads.
    #[serde(default)]
    pub potentials: BTreeMap<String, PotentialConfig>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub params: Params,
    /// Overrides of metric thresholds, by metric name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Spatial step.
    pub h: f64,
    #[serde(default = "one")]
    pub rho: f64,
    /// Courant factor: `dt = cfl * h / sqrt 3`.
    #[serde(default = "half")]
    pub cfl: f64,
    /// Mollifier width, `3h` when absent.
    #[serde(default)]
    pub eta: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl GridConfig {
    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(3.0 * self.h)
    }

    pub fn dt(&self) -> f64 {
        self.cfl * self.h / 3f64.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub directions: usize,
    /// Number of sigma (or offset) samples.
    pub offsets: usize,
    /// Half width of the sigma grid, `rho + 10 eta` when absent.
    #[serde(default)]
    pub sigma_half: Option<f64>,
    /// sigma' step, the solver dt when absent.
    #[serde(default)]
    pub sigma_prime_step: Option<f64>,
    /// sigma' half width, from the potential's time support when absent.
    #[serde(default)]
    pub sigma_prime_half: Option<f64>,
    pub backend: Backend,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            directions: 74,
            offsets: 121,
            sigma_half: None,
            sigma_prime_step: None,
            sigma_prime_half: None,
            backend: Backend::Born,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: Vec3,
    pub width: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

/// A bump sum `amplitude * sum_i a_i profile(t) cutoff(|x - c_i| / w_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default = "one")]
    pub amplitude: f64,
    pub time: TimeProfile,
    pub bumps: Vec<BumpConfig>,
    /// Support radius, the grid rho when absent.
    #[serde(default)]
    pub rho: Option<f64>,
}

impl PotentialConfig {
    pub fn build(&self, default_rho: f64) -> bslab_core::Result<Potential> {
        let bumps = self
            .bumps
            .iter()
            .map(|b| Bump { center: b.center, width: b.width, amplitude: b.amplitude, profile: self.time })
            .collect();
        Potential::new(bumps, self.rho.unwrap_or(default_rho), self.amplitude)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub size: usize,
    /// Overall scale of each random potential.
    pub amplitude: f64,
    pub min_bumps: usize,
    pub max_bumps: usize,
    pub min_width: f64,
    pub max_width: f64,
    pub t_center_range: f64,
    pub min_half_width: f64,
    pub max_half_width: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        let d = EnsembleSpec::default();
        Self {
            size: 20,
            amplitude: 1.0,
            min_bumps: d.min_bumps,
            max_bumps: d.max_bumps,
            min_width: d.min_width,
            max_width: d.max_width,
            t_center_range: d.t_center_range,
            min_half_width: d.min_half_width,
            max_half_width: d.max_half_width,
        }
    }
}

impl EnsembleConfig {
    pub fn spec(&self, rho: f64) -> EnsembleSpec {
        EnsembleSpec {
            min_bumps: self.min_bumps,
            max_bumps: self.max_bumps,
            min_width: self.min_width,
            max_width: self.max_width,
            inset: 0.9,
            rho,
            t_center_range: self.t_center_range,
            min_half_width: self.min_half_width,
            max_half_width: self.max_half_width,
        }
    }
}

/// Experiment-specific knobs; each experiment reads the ones it needs and
/// falls back to its own defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Potential amplitudes swept by the experiment.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Time steps of a free evolution.
    pub steps: Option<usize>,
    /// Spacing of an auxiliary coarser or finer run.
    pub aux_h: Option<f64>,
    /// Direction count of an auxiliary run.
    pub aux_directions: Option<usize>,
    /// Incident delays `s` per direction.
    #[serde(default)]
    pub delays: Vec<f64>,
    /// Measurement delays `s'` per incident configuration.
    #[serde(default)]
    pub measurement_delays: Vec<f64>,
    /// Number of incident configurations rerun at the auxiliary spacing.
    pub aux_groups: Option<usize>,
    /// Far-field shells `[r_inner, thickness]`.
    #[serde(default)]
    pub shells: Vec<[f64; 2]>,
    /// Fixed-point iterations after the linearized reconstruction.
    pub iterations: Option<usize>,
    /// Offset half width of closed-form sinograms.
    pub offset_half: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        Ok((Self::from_toml(&text)?, text))
    }

    pub fn kind(&self) -> Result<Experiment> {
        Experiment::parse(&self.experiment)
    }

    pub fn potential(&self, name: &str) -> Result<Potential> {
        let p = self
            .potentials
            .get(name)
            .ok_or_else(|| HarnessError::Config(format!("missing potential `{name}`")))?;
        p.build(self.grid.rho).map_err(|e| HarnessError::Config(format!("potential `{name}`: {e}")))
    }

    pub fn directions(&self) -> Result<DirectionSet> {
        DirectionSet::with_count(self.data.directions).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn synthesis(&self, backend: Backend, h: f64) -> Synthesis {
        let mut s = Synthesis::new(backend, h);
        s.eta = self.grid.eta.map_or(3.0 * h, |e| e * h / self.grid.h);
        s.cfl = self.grid.cfl;
        s
    }

    /// Symmetric sigma grid with `data.offsets` samples reaching
    /// `sigma_half` (default `rho + 10 eta`).
    pub fn sigma_grid(&self) -> Result<UniformGrid1> {
        let half = self.data.sigma_half.unwrap_or(self.grid.rho + SUPPORT_SLACK * self.grid.eta());
        UniformGrid1::linspace(-half, half, self.data.offsets).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// sigma' on the solver time lattice (or `sigma_prime_step`), covering
    /// `[-t1, -t0]` of the given time support unless `sigma_prime_half` is set.
    pub fn sigma_prime_grid(&self, time_support: (f64, f64)) -> Result<UniformGrid1> {
        let step = self.data.sigma_prime_step.unwrap_or(self.grid.dt());
        let (lo, hi) = match self.data.sigma_prime_half {
            Some(h) => (-h, h),
            None => (-time_support.1, -time_support.0),
        };
        let i_lo = (lo / step - 1e-9).floor() as i64;
        let i_hi = (hi / step + 1e-9).ceil() as i64;
        UniformGrid1::new(i_lo as f64 * step, step, (i_hi - i_lo + 1) as usize)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Checks every derived constraint; no files are touched.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let g = &self.grid;
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(g.h > 0.0 && g.h.is_finite()) {
            return bad(format!("grid.h must be positive, got {}", g.h));
        }
        if !(g.rho > 0.0) {
            return bad(format!("grid.rho must be positive, got {}", g.rho));
        }
        if !(g.cfl > 0.0 && g.cfl <= 1.0) {
            return bad(format!("grid.cfl = {} violates the CFL bound (0, 1]", g.cfl));
        }
        if !(g.eta() > 0.0) {
            return bad(format!("grid.eta must be positive, got {}", g.eta()));
        }
        if self.data.directions == 0 {
            return bad("data.directions must be positive".into());
        }
        self.directions()?;
        if self.data.offsets < 2 {
            return bad(format!("data.offsets must be at least 2, got {}", self.data.offsets));
        }
        if kind.uses_ensemble() && self.ensemble.size == 0 {
            return bad("ensemble.size must be positive".into());
        }
        if kind.uses_ensemble()
            && (self.ensemble.min_bumps == 0
                || self.ensemble.min_bumps > self.ensemble.max_bumps
                || !(self.ensemble.min_width > 0.0 && self.ensemble.min_width <= self.ensemble.max_width)
                || !(self.ensemble.min_half_width > 0.0 && self.ensemble.min_half_width <= self.ensemble.max_half_width))
        {
            return bad("ensemble ranges are empty or non-positive".into());
        }
        for name in kind.required_potentials() {
            self.potential(name)?;
        }
        if kind.uses_cube() {
            let need = g.rho + SUPPORT_SLACK * g.eta();
            let sigma = self.sigma_grid()?;
            if !sigma.covers(-need, need) {
                return bad(format!(
                    "sigma grid [{}, {}] does not cover the support window [-{need}, {need}]",
                    sigma.start,
                    sigma.end()
                ));
            }
        }
        for (name, v) in &self.tolerances {
            if !kind.metric_names().contains(&name.as_str()) {
                return bad(format!("unknown tolerance `{name}` for {}", kind.name()));
            }
            if !v.is_finite() {
                return bad(format!("tolerance `{name}` is not finite"));
            }
        }
        for &e in &self.params.epsilons {
            if !(e > 0.0) {
                return bad(format!("params.epsilons must be positive, got {e}"));
            }
        }
        if let Some(h) = self.params.aux_h {
            if !(h > 0.0) {
                return bad(format!("params.aux_h must be positive, got {h}"));
            }
        }
        for s in &self.params.shells {
            if !(s[0] > 0.0 && s[1] > 0.0) {
                return bad(format!("shell {s:?} must have positive radius and thickness"));
            }
        }
        Ok(())
    }
}
