use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
name = "tiny"
seed = 9
h = [0.1, 0.05, 0.025]
n_paths = 2000
refine = 4

[problem]
benchmark = "B3"

[truncation]
policy = "explicit"
t = 6.0

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

fn bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsde-lab"))
        .args(args)
        .env("BSDE_LAB_OUT", out)
        .env_remove("BSDE_LAB_WORKERS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_dir(o: &Output) -> PathBuf {
    PathBuf::from(String::from_utf8_lossy(&o.stdout).lines().next().unwrap().trim())
}

#[test]
fn validate_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.toml", TINY);
    let o = bin(&["validate", &good], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let bad = write(tmp.path(), "bad.toml", &TINY.replace("seed = 9\n", ""));
    assert_eq!(bin(&["validate", &bad], tmp.path()).status.code(), Some(1));
    let missing = tmp.path().join("nope.toml");
    assert_eq!(bin(&["validate", missing.to_str().unwrap()], tmp.path()).status.code(), Some(1));
}

#[test]
fn rates_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("out");
    let o = bin(&["rates", &cfg, "--workers", "2"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    assert!(dir.starts_with(out.join("tiny")));
    for f in ["manifest.json", "rates.csv", "checks.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }

    let d = dir.to_str().unwrap();
    assert_eq!(bin(&["report", d], &out).status.code(), Some(0));
    fs::write(dir.join("rates.csv"), "h\n").unwrap();
    let o = bin(&["report", d], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("hash mismatch: rates.csv"));
}

#[test]
fn seed_flag_and_out_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let elsewhere = tmp.path().join("elsewhere");
    let o = bin(&["simulate", &cfg, "--seed", "11", "--out", elsewhere.to_str().unwrap()], &tmp.path().join("env"));
    assert_eq!(o.status.code(), Some(0));
    let dir = run_dir(&o);
    assert!(dir.starts_with(&elsewhere));
    let manifest = fs::read_to_string(dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 11"));
}

#[test]
fn window_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{TINY}\n[windows]\ne1_slope_min = 50.0\n");
    let cfg = write(tmp.path(), "strict.toml", &body);
    let o = bin(&["rates", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]"));
}

#[test]
fn runtime_failure_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = bin(&["simulate", &cfg], &blocker);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
