use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use holomera::cli::{self, config_hash, ExperimentConfig, ExperimentKind};
use serde_json::Value;

fn sample(kind: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{kind}.json"))
}

fn holomera(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holomera")).args(args).env("HOLOMERA_THREADS", "1").output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn sample_configs_validate() {
    for kind in ExperimentKind::ALL {
        let text = fs::read_to_string(sample(kind.name())).unwrap();
        let report = cli::validate(&text, Some(kind));
        assert!(report.valid, "{kind}: {:?}", report.errors);
        let o = holomera(&["validate", "--config", sample(kind.name()).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout_json(&o)["valid"], true);
    }
}

#[test]
fn validation_reports_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "bad.json", r#"{"chi": 1, "colour": "red", "sweeps": "many"}"#);
    let o = holomera(&["validate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let keys: Vec<String> =
        stdout_json(&o)["errors"].as_array().unwrap().iter().map(|e| e["key"].as_str().unwrap().to_string()).collect();
    for k in ["chi", "colour", "sweeps"] {
        assert!(keys.iter().any(|x| x == k), "{k} missing from {keys:?}");
    }
    assert!(cli::validate("", None).errors.iter().any(|e| e.key == "$"));
    assert!(cli::validate("{}", None).valid);
}

#[test]
fn invalid_configs_exit_2_with_error_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("flow", r#"{"b": 2}"#, "b"),
        ("holo-compare", r#"{"mass_squared": [-0.3]}"#, "mass_squared"),
        ("flow", r#"{"separations": [3, 10, 27]}"#, "separations"),
        ("crossover", r#"{"experiment": "flow"}"#, "experiment"),
        ("entropy", r#"{"state": "finite-range", "block_sizes": [9, 18, 27]}"#, "block_sizes"),
        ("mps-export", r#"{"chi": 8, "wstar": 3}"#, "wstar"),
    ];
    for (kind, text, key) in cases {
        let p = write(tmp.path(), "c.json", text);
        let o = holomera(&[kind, "--config", p.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{kind} {text}");
        let err = &stdout_json(&o)["error"];
        assert_eq!(err["kind"], "invalid-config");
        assert!(err["violations"].as_array().unwrap().iter().any(|v| v["key"] == key), "{kind} {text}: {err}");
    }
    assert!(!tmp.path().join("o").exists());

    let o = holomera(&["no-such-kind", "--config", sample("flow").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = holomera(&["flow", "--config", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = holomera(&["flow"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "c.json", r#"{"state": "finite-range", "cap": "maximally-mixed", "block_sizes": [3, 6, 9, 81]}"#);
    let o = holomera(&["entropy", "--config", p.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = &stdout_json(&o)["error"];
    assert_eq!(err["kind"], "numerical-failure");
    assert_eq!(err["module"], "entropy");
    assert_eq!(err["variant"], "budget");
}

#[test]
fn runs_are_byte_identical_and_stamped() {
    let tmp = tempfile::tempdir().unwrap();
    for kind in ["flow", "mps-export", "entropy"] {
        let (a, b) = (tmp.path().join(format!("{kind}-a")), tmp.path().join(format!("{kind}-b")));
        let cfg = sample(kind);
        let oa = holomera(&[kind, "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
        assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stdout));
        let ob = Command::new(env!("CARGO_BIN_EXE_holomera"))
            .args([kind, "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(ob.status.code(), Some(0));
        let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
        assert_eq!(fa, fb, "{kind}");

        let summary = stdout_json(&oa);
        let hash = summary["config_hash"].as_str().unwrap().to_string();
        let cfg_value: ExperimentConfig = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
        assert_eq!(hash, config_hash(&cfg_value));
        let version = format!("holomera {}", env!("CARGO_PKG_VERSION"));
        for (name, bytes) in fa {
            let text = String::from_utf8(bytes).unwrap();
            assert!(!text.contains('\r'));
            assert!(text.contains(&hash) && text.contains(&version), "{name}");
            if name.ends_with(".csv") {
                assert!(text.starts_with("# software="));
                assert!(text.ends_with('\n'));
            } else {
                let v: Value = serde_json::from_str(&text).unwrap();
                assert_eq!(v["config_hash"], hash.as_str());
                assert_eq!(v["experiment"], kind);
            }
        }
    }
}

#[test]
fn seed_override_changes_hash_and_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = sample("scaling-dims");
    let run = |seed: &str, dir: &str| {
        let o = holomera(&["scaling-dims", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join(dir).to_str().unwrap(), "--seed", seed]);
        assert_eq!(o.status.code(), Some(0));
        stdout_json(&o)["config_hash"].as_str().unwrap().to_string()
    };
    let (h1, h2) = (run("1", "a"), run("2", "b"));
    assert_ne!(h1, h2);
    let a = fs::read_to_string(tmp.path().join("a/scaling_dims.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b/scaling_dims.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn scaling_dims_table_contains_identity() {
    let cfg = cli::load(ExperimentKind::ScalingDims, r#"{"chi": 4}"#, None).unwrap();
    let art = cli::compute(ExperimentKind::ScalingDims, &cfg).unwrap();
    let doc: Value = serde_json::from_slice(art.get("scaling_dims.json").unwrap()).unwrap();
    let rows = doc["result"]["table"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 16);
    assert!(rows[0]["delta"].as_f64().unwrap().abs() < 1e-12);
    assert!(doc["result"]["unitality_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn flow_run_satisfies_the_flow_equation() {
    let text = fs::read_to_string(sample("flow")).unwrap();
    let cfg = cli::load(ExperimentKind::Flow, &text, None).unwrap();
    let art = cli::compute(ExperimentKind::Flow, &cfg).unwrap();
    let doc: Value = serde_json::from_slice(art.get("flow.json").unwrap()).unwrap();
    let r = &doc["result"];
    assert!(r["cs_residual_max"].as_f64().unwrap() < 1e-6);
    assert!(r["operator_difference_max"].as_f64().unwrap() < 1e-12);
    assert!(r["covariance"]["max_relative_error"].as_f64().unwrap() < 1e-8);
}
