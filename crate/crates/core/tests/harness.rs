use std::fs;
use std::path::Path;

use bsde_core::harness::{
    fit_rate, run_experiment, sha256_hex, verify_report, ExperimentConfig, RunOptions, Stage,
};
use bsde_core::Error;
use proptest::prelude::*;

const B3_RATES: &str = r#"
name = "b3-small"
seed = 5
h = [0.1, 0.05, 0.025]
n_paths = 3000
refine = 4

[problem]
benchmark = "B3"

[truncation]
policy = "explicit"
t = 8.0

[solver]
mesh_points = 201

[moments]
enabled = false
freidlin = false

[checks]
gronwall = false
kolmogorov = false
em_slope = false
two_stopping = false
"#;

fn opts(root: &Path, stamp: &str) -> RunOptions {
    RunOptions { out_root: Some(root.to_path_buf()), seed: None, stamp: Some(stamp.into()) }
}

#[test]
fn config_errors() {
    let missing_seed = B3_RATES.replace("seed = 5\n", "");
    assert!(matches!(ExperimentConfig::from_toml_str(&missing_seed), Err(Error::Config(_))));
    let unknown = format!("{B3_RATES}\nbogus = 1\n");
    assert!(ExperimentConfig::from_toml_str(&unknown).is_err());

    let rising = B3_RATES.replace("h = [0.1, 0.05, 0.025]", "h = [0.05, 0.1, 0.025]");
    assert!(ExperimentConfig::from_toml_str(&rising).unwrap().validate().is_err());
    let slash = B3_RATES.replace("b3-small", "a/b");
    assert!(ExperimentConfig::from_toml_str(&slash).unwrap().validate().is_err());
    let unknown_id = B3_RATES.replace("\"B3\"", "\"B7\"");
    assert!(ExperimentConfig::from_toml_str(&unknown_id).unwrap().validate().is_err());
}

#[test]
fn stepsize_violation_is_reported() {
    let inline = r#"
name = "steep"
seed = 1
h = [0.1, 0.05]
n_paths = 100

[problem.inline]
domain = { kind = "interval", lo = -1.0, hi = 1.0 }
x0 = [0.0]
constants = { l_mu = 0.0, l_sigma = 0.0, l_f = 1.0, l_g = 0.0, sup_f0 = 0.0 }
"#;
    let cfg = ExperimentConfig::from_toml_str(inline).unwrap();
    let err = cfg.validate().unwrap_err().to_string();
    assert!(err.contains("h ≥ 1/(12 L_f)"), "{err}");
    let ok = inline.replace("h = [0.1, 0.05]", "h = [0.02, 0.01]");
    assert!(ExperimentConfig::from_toml_str(&ok).unwrap().validate().is_ok());
}

#[test]
fn config_roundtrip() {
    let cfg = ExperimentConfig::from_toml_str(B3_RATES).unwrap();
    let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(cfg, back);
}

#[test]
fn b3_run_is_reproducible_and_hashed() {
    let root = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(B3_RATES).unwrap();
    let a = run_experiment(&cfg, Stage::Rates, &opts(root.path(), "a")).unwrap();
    let b = run_experiment(&cfg, Stage::Rates, &opts(root.path(), "b")).unwrap();
    assert_eq!(a.dir, root.path().join("b3-small").join("a"));

    let rates = a.rates.as_ref().unwrap();
    for row in &rates.rows {
        assert!(row.e2.mean >= row.e1.mean);
    }
    let quad: Vec<_> = rates.rows.iter().filter(|r| r.solver == "quadrature").collect();
    assert_eq!(quad.len(), 3);
    assert!(quad[2].terminal.mean < quad[0].terminal.mean);
    assert!(rates.slope("terminal", "quadrature").is_some());

    for name in ["rates.csv", "errors_h0.1.csv", "slopes.csv", "checks.json", "config.toml"] {
        let x = fs::read(a.dir.join(name)).unwrap();
        assert_eq!(x, fs::read(b.dir.join(name)).unwrap(), "{name} differs between runs");
    }
    let check = verify_report(&a.dir).unwrap();
    assert!(check.ok());
    assert_eq!(check.manifest.seed, 5);
    let listed: Vec<&str> = check.manifest.files.iter().map(|f| f.path.as_str()).collect();
    assert!(listed.contains(&"rates.csv") && listed.contains(&"checks.json"));
    let entry = check.manifest.files.iter().find(|f| f.path == "rates.csv").unwrap();
    assert_eq!(entry.sha256, sha256_hex(&fs::read(a.dir.join("rates.csv")).unwrap()));

    let json: serde_json::Value = serde_json::from_slice(&fs::read(a.dir.join("checks.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);

    // Same stamp twice gets a suffix rather than overwriting.
    let c = run_experiment(&cfg, Stage::Simulate, &opts(root.path(), "a")).unwrap();
    assert_eq!(c.dir, root.path().join("b3-small").join("a-1"));
}

#[test]
fn tampering_is_detected() {
    let root = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(B3_RATES).unwrap();
    let out = run_experiment(&cfg, Stage::Simulate, &opts(root.path(), "t")).unwrap();
    let target = out.dir.join("exits_h0.1.csv");
    let mut bytes = fs::read(&target).unwrap();
    bytes.push(b'\n');
    fs::write(&target, bytes).unwrap();
    fs::remove_file(out.dir.join("config.toml")).unwrap();
    let check = verify_report(&out.dir).unwrap();
    assert!(!check.ok());
    assert_eq!(check.mismatched, vec!["exits_h0.1.csv".to_string()]);
    assert_eq!(check.missing, vec!["config.toml".to_string()]);
}

#[test]
fn failed_stage_is_recorded() {
    let root = tempfile::tempdir().unwrap();
    let bad = B3_RATES.replace("mesh_points = 201", "mesh_points = 5");
    let cfg = ExperimentConfig::from_toml_str(&bad).unwrap();
    assert!(run_experiment(&cfg, Stage::Solve, &opts(root.path(), "f")).is_err());
    let check = verify_report(&root.path().join("b3-small").join("f")).unwrap();
    assert!(check.manifest.failed_stage.as_deref().unwrap().starts_with("solve"));
    assert!(check.manifest.error.is_some());
    assert!(!check.ok());
}

#[test]
fn fit_rate_examples() {
    let hs = [0.2, 0.1, 0.05, 0.025];
    let lin: Vec<_> = hs.iter().map(|&h| (h, h, 0.0)).collect();
    assert!((fit_rate(&lin).unwrap().slope - 1.0).abs() < 1e-12);
    let root: Vec<_> = hs.iter().map(|&h: &f64| (h, h.sqrt(), 0.0)).collect();
    assert!((fit_rate(&root).unwrap().slope - 0.5).abs() < 1e-12);
    let mut dropped = lin.clone();
    dropped[0].1 = 0.0;
    let f = fit_rate(&dropped).unwrap();
    assert_eq!(f.n_used, 3);
    assert_eq!(f.warnings.len(), 1);
    dropped[1].1 = -1.0;
    assert!(fit_rate(&dropped).is_err());
}

proptest! {
    #[test]
    fn fit_rate_scale_invariant(
        slope in -2.0f64..3.0,
        noise in prop::collection::vec(-0.3f64..0.3, 4),
        rel_ci in prop::collection::vec(0.01f64..0.5, 4),
        scale in 1e-6f64..1e6,
    ) {
        let hs = [0.2, 0.1, 0.05, 0.025];
        let pts: Vec<_> = hs
            .iter()
            .zip(noise.iter().zip(&rel_ci))
            .map(|(&h, (e, c)): (&f64, (&f64, &f64))| {
                let v = h.powf(slope) * e.exp();
                (h, v, c * v)
            })
            .collect();
        let scaled: Vec<_> = pts.iter().map(|&(h, v, c)| (h, v * scale, c * scale)).collect();
        let a = fit_rate(&pts).unwrap();
        let b = fit_rate(&scaled).unwrap();
        prop_assert!((a.slope - b.slope).abs() < 1e-9);
        prop_assert!((a.stderr - b.stderr).abs() < 1e-9);
        prop_assert!((b.intercept - a.intercept - scale.ln()).abs() < 1e-9);
    }
}
