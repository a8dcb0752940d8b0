use std::fs;
use std::path::Path;
use std::process::Command;

use bslab::report::{Check, Metrics};
use bslab::{Experiment, ExperimentConfig, HarnessError};
use sha2::{Digest, Sha256};

const ENERGY: &str = r#"
experiment = "energy"
seed = 4

[grid]
h = 0.1

[ensemble]
size = 2
t_center_range = 0.1

[params]
steps = 20
"#;

const ROUNDTRIP: &str = r#"
experiment = "radon-roundtrip"
seed = 9

[grid]
h = 0.1

[data]
directions = 26
offsets = 41

[ensemble]
size = 4
"#;

fn bslab(args: &[&str], config: &str, dir: &Path) -> (i32, String, String) {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bslab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn passing_run_writes_a_complete_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = bslab(&["energy"], ENERGY, dir.path());
    assert_eq!(code, 0, "{stdout}\n{stderr}");
    let out = dir.path().join("out");
    for f in ["metrics.csv", "metrics.svg", "metric_energy_drift.svg", "gronwall.csv", "energy_drift.svg", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("metric,value,comparison,threshold,pass,note"));
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")), "{csv}");
    let svg = fs::read_to_string(out.join("energy_drift.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn manifest_hashes_config_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = bslab(&["energy"], ENERGY, dir.path());
    assert_eq!(code, 0, "{stderr}");
    let out = dir.path().join("out");
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "energy");
    assert_eq!(manifest["inputs"][0]["sha256"], hex::encode(Sha256::digest(ENERGY.as_bytes())));
    for entry in manifest["outputs"].as_array().unwrap() {
        let bytes = fs::read(out.join(entry["path"].as_str().unwrap())).unwrap();
        assert_eq!(entry["sha256"], hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn tolerance_failure_exits_one_and_names_the_metric() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{ENERGY}\n[tolerances]\nenergy_drift = -1.0\n");
    let (code, _, stderr) = bslab(&["energy"], &config, dir.path());
    assert_eq!(code, 1);
    assert!(stderr.contains("energy_drift"), "{stderr}");
    let csv = fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    assert!(csv.contains("energy_drift") && csv.contains(",false,"));
}

#[test]
fn empty_ensemble_is_rejected_without_writing_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = ENERGY.replace("size = 2", "size = 0");
    let (code, _, stderr) = bslab(&["energy"], &config, dir.path());
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("ensemble.size"), "{stderr}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = bslab(&["no-such-experiment"], ENERGY, dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown experiment"), "{stderr}");
    let (code, _, _) = bslab(&["radon-roundtrip"], ENERGY, dir.path());
    assert_eq!(code, 2);
    let (code, _, stderr) = bslab(&["energy"], &ENERGY.replace("steps = 20", "stepz = 20"), dir.path());
    assert_eq!(code, 2, "{stderr}");
    let (code, _, stderr) = bslab(&["energy"], &format!("{ENERGY}\n[tolerances]\nnot_a_metric = 1.0\n"), dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("not_a_metric"), "{stderr}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn identical_config_and_seed_give_identical_metrics() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(bslab(&["radon-roundtrip"], ROUNDTRIP, a.path()).0, 0);
    assert_eq!(bslab(&["radon-roundtrip", "--jobs", "1"], ROUNDTRIP, b.path()).0, 0);
    for f in ["metrics.csv", "stability_ratios.csv", "gaussian_reconstruction_z0.bslb"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let c = tempfile::tempdir().unwrap();
    assert_eq!(bslab(&["radon-roundtrip", "--seed", "10"], ROUNDTRIP, c.path()).0, 0);
    let x = fs::read(a.path().join("out/stability_ratios.csv")).unwrap();
    let z = fs::read(c.path().join("out/stability_ratios.csv")).unwrap();
    assert_ne!(x, z, "a different seed draws a different ensemble");
}

#[test]
fn arrays_written_by_a_run_load_back() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bslab(&["radon-roundtrip"], ROUNDTRIP, dir.path()).0, 0);
    let (dims, values) =
        bslab_core::arrayio::load_array(&dir.path().join("out/gaussian_reconstruction_z0.bslb")).unwrap();
    assert_eq!(dims, vec![21, 21]);
    assert_eq!(values.len(), 441);
    // The centre of exp(-|x|^2) is 1.
    assert!((values[10 * 21 + 10] - 1.0).abs() < 0.1, "{}", values[220]);
}

#[test]
fn config_validation_catches_derived_constraints() {
    let parse = |s: &str| ExperimentConfig::from_toml(s).unwrap();
    assert!(parse(ENERGY).validate().is_ok());
    let cfl = parse(&ENERGY.replace("h = 0.1", "h = 0.1\ncfl = 1.5"));
    assert!(matches!(cfl.validate(), Err(HarnessError::Config(m)) if m.contains("CFL")));
    let cube = r#"
experiment = "reconstruct"
[grid]
h = 0.05
[data]
sigma_half = 1.2
[potentials.q]
time = { kind = "bump", center = 0.0, half_width = 0.25 }
bumps = [{ center = [0.0, 0.0, 0.0], width = 0.5 }]
"#;
    assert!(matches!(parse(cube).validate(), Err(HarnessError::Config(m)) if m.contains("sigma grid")));
    let missing = cube.replace("[potentials.q]", "[potentials.other]").replace("sigma_half = 1.2", "");
    assert!(matches!(parse(&missing).validate(), Err(HarnessError::Config(m)) if m.contains("missing potential `q`")));
    let outside = cube.replace("[0.0, 0.0, 0.0], width = 0.5", "[0.8, 0.0, 0.0], width = 0.5").replace("sigma_half = 1.2", "");
    assert!(parse(&outside).validate().is_err());
}

#[test]
fn every_experiment_name_round_trips() {
    for e in Experiment::ALL {
        assert_eq!(Experiment::parse(e.name()).unwrap(), e);
        assert!(!e.metric_names().is_empty());
    }
    assert!(matches!(Experiment::parse("energy "), Err(HarnessError::Usage(_))));
}

#[test]
fn tolerance_overrides_replace_thresholds() {
    let overrides = [("a".to_string(), 2.0)].into_iter().collect();
    let mut m = Metrics::new(&overrides);
    m.at_most("a", 1.5, 1.0, "");
    m.at_most("b", 1.5, 1.0, "");
    m.flag("c", true, "");
    m.info("d", f64::NAN, "");
    assert_eq!(m.list[0].check, Check::AtMost(2.0));
    assert!(m.list[0].pass && !m.list[1].pass && m.list[2].pass && m.list[3].pass);
    m.at_most("e", f64::NAN, 1.0, "");
    assert!(!m.list[4].pass, "NaN never passes a bound");
}

#[test]
fn disk_cache_round_trips_values() {
    use bslab_core::scattering::PairingCache;
    let dir = tempfile::tempdir().unwrap();
    let cache = bslab::cache::DiskCache::new(dir.path().join("cache")).unwrap();
    assert!(cache.load("key").is_none());
    let values = vec![1.5, -0.25, f64::MIN_POSITIVE, 3e300];
    cache.store("key", &values);
    assert_eq!(cache.load("key").unwrap(), values);
    assert!(cache.load("other").is_none());
    let again = bslab::cache::DiskCache::new(dir.path().join("cache")).unwrap();
    assert_eq!(again.load("key").unwrap(), values);
}
