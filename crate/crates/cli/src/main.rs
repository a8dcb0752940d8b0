use std::path::PathBuf;
use std::process::ExitCode;

use bslab::cache::DiskCache;
use bslab::report::write_outputs;
use bslab::{run_experiment, Context, Experiment, ExperimentConfig, HarnessError, Result};
use bslab_core::scattering::{MemoryCache, PairingCache};
use clap::Parser;

/// Runs one experiment and writes its report.
#[derive(Parser, Debug)]
#[command(name = "bslab", version)]
struct Cli {
    /// One of radon-roundtrip, energy, supports, pseudolin, born-smallness,
    /// reconstruct, lipschitz, profiles, weighted-radon.
    experiment: String,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's `out`, else runs/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: BSLAB_JOBS, else all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for FDTD pairing results reused across runs.
    #[arg(long)]
    cache: Option<PathBuf>,
}

fn jobs(cli: &Cli) -> Result<Option<usize>> {
    if let Some(n) = cli.jobs {
        return Ok(Some(n));
    }
    match std::env::var("BSLAB_JOBS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| HarnessError::Usage(format!("BSLAB_JOBS=`{v}` is not a count"))),
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let kind = Experiment::parse(&cli.experiment)?;
    let (mut cfg, text) = ExperimentConfig::load(&cli.config)?;
    if cfg.kind()? != kind {
        return Err(HarnessError::Config(format!(
            "config is for `{}` but `{}` was requested",
            cfg.experiment,
            kind.name()
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    if let Some(n) = jobs(&cli)? {
        if n == 0 {
            return Err(HarnessError::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Usage(format!("cannot start {n} workers: {e}")))?;
    }
    let out_dir = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("runs").join(kind.name()));
    let memory = MemoryCache::default();
    let disk = cli.cache.as_ref().map(DiskCache::new).transpose()?;
    let cache: &dyn PairingCache = match &disk {
        Some(d) => d,
        None => &memory,
    };
    let outcome = run_experiment(&cfg, &Context { cache })?;
    write_outputs(&out_dir, kind.name(), cfg.seed, (&cli.config.display().to_string(), &text), &outcome)?;
    for mt in &outcome.metrics {
        println!("{:<28} {:>14.6e}  {}", mt.name, mt.value, if mt.pass { "pass" } else { "FAIL" });
    }
    let failing = outcome.failing();
    for mt in &failing {
        eprintln!("tolerance failure: {} = {} ({:?})", mt.name, mt.value, mt.check);
    }
    println!("report written to {}", out_dir.display());
    Ok(failing.is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
