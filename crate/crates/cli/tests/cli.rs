use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rzf-secrecy"))
}

fn scenario(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("scenario.json");
    std::fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str], scen: &Path, out: Option<&Path>) -> Output {
    let mut c = bin();
    c.args(args).arg("--scenario").arg(scen);
    if let Some(o) = out {
        c.arg("--out").arg(o);
    }
    c.output().unwrap()
}

const SMALL: &str = r#"{"M":16,"N":8,"L":4,"z":0.3,"sigma2_db":10,"rho2_db":3}"#;

#[test]
fn analyze_writes_schema_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario(dir.path(), SMALL);
    let out = dir.path().join("a.csv");
    let o = run(&["analyze", "--units", "bits"], &scen, Some(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("#schema=rzf-secrecy/analyze/v1\n"));
    assert_eq!(csv.lines().count(), 2 + 8);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(m["versions"]["library"].is_string());
}

#[test]
fn config_hash_tracks_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario(dir.path(), SMALL);
    let hash = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = run(&["montecarlo", "--trials", "200", "--seed", seed], &scen, Some(&out));
        assert!(o.status.success());
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
        assert_eq!(m["seed"].as_u64().unwrap(), seed.parse::<u64>().unwrap());
        m["config_hash"].as_str().unwrap().to_string()
    };
    let a = hash("3", "a.csv");
    assert_eq!(a, hash("3", "b.csv"));
    assert_ne!(a, hash("4", "c.csv"));
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario(dir.path(), r#"{"M":16,"N":8,"L":4,"z":-1,"sigma2_db":10,"rho2_db":3}"#);
    assert_eq!(run(&["analyze"], &scen, None).status.code(), Some(2));
    let scen = scenario(dir.path(), SMALL);
    assert_eq!(run(&["montecarlo", "--grid", "1:0:0.1"], &scen, None).status.code(), Some(2));
    assert_eq!(run(&["analyze"], &dir.path().join("missing.json"), None).status.code(), Some(2));
}

#[test]
fn numerical_regime_exits_3() {
    // overloaded with vanishing regularization: δ ~ 1/z
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario(dir.path(), r#"{"M":64,"N":65,"L":16,"z":1e-8,"sigma2_db":10,"rho2_db":4}"#);
    assert_eq!(run(&["analyze"], &scen, None).status.code(), Some(3));
}

#[test]
fn validate_and_quantiles_run() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario(dir.path(), SMALL);
    let o = run(&["validate"], &scen, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let o = run(&["quantiles", "--trials", "2000", "--grid", "0.5"], &scen, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.starts_with("#schema=rzf-secrecy/outage-quantiles/v1\n"));
}

#[test]
fn sweep_over_antennas() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario(dir.path(), SMALL);
    let o = run(&["sweep", "--param", "m", "--grid", "16:32:8"], &scen, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 2 + 3);
}
