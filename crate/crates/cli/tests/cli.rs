use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ppgstress::compress::{calibrate, prune_dense_units, quantize_ptq, PruneConfig};
use ppgstress::model::{build_default_model, save_model};
use ppgstress::scalogram::ScalogramImage;
use serde_json::Value;

const SMALL: &str = r#"
seed = 3
[synth]
records_per_class = 1
duration_s = 16.0
[model]
hidden_units = 16
[train]
epochs = 1
batch_size = 8
[prune]
keep = 8
[quantize]
calibration_images = 8
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ppgstress"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(dir: &Path, args: &[&str]) {
    assert_eq!(run(dir, args).status.code(), Some(0), "{args:?}");
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn schema(name: &str) -> Value {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(name);
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Checks `type`, `required`, `properties`, `items`, `minimum` and `maximum`.
fn validate(v: &Value, s: &Value, at: &str) {
    if let Some(t) = s.get("type").and_then(Value::as_str) {
        let ok = match t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "integer" => v.is_i64() || v.is_u64(),
            "number" => v.is_number(),
            "boolean" => v.is_boolean(),
            "string" => v.is_string(),
            _ => panic!("unsupported type {t}"),
        };
        assert!(ok, "{at}: expected {t}, got {v}");
    }
    if let (Some(min), Some(x)) = (s.get("minimum").and_then(Value::as_f64), v.as_f64()) {
        assert!(x >= min, "{at}: {x} < {min}");
    }
    if let (Some(max), Some(x)) = (s.get("maximum").and_then(Value::as_f64), v.as_f64()) {
        assert!(x <= max, "{at}: {x} > {max}");
    }
    for key in s.get("required").and_then(Value::as_array).into_iter().flatten() {
        let key = key.as_str().unwrap();
        assert!(v.get(key).is_some(), "{at}: missing {key}");
    }
    if let Some(props) = s.get("properties").and_then(Value::as_object) {
        for (k, sub) in props {
            if let Some(child) = v.get(k) {
                validate(child, sub, &format!("{at}.{k}"));
            }
        }
    }
    if let (Some(items), Some(arr)) = (s.get("items"), v.as_array()) {
        for (i, child) in arr.iter().enumerate() {
            validate(child, items, &format!("{at}[{i}]"));
        }
    }
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = setup();
    let d = dir.path();
    let c = ["--config", "small.toml"];
    let steps: Vec<Vec<&str>> = vec![
        vec!["synth", "--out", "rec"],
        vec!["featurize", "--in", "rec", "--out", "x.sclg"],
        vec!["train", "--in", "x.sclg", "--out", "m.sdm", "--history", "h.csv"],
        vec!["prune", "--in", "m.sdm", "--out", "p.sdm"],
        vec!["quantize", "--in", "p.sdm", "--calib", "x.sclg", "--out", "q.sdm"],
        vec!["infer", "--model", "q.sdm", "--in", "x.sclg", "--out", "pred.csv"],
        vec!["evaluate", "--in", "pred.csv", "--out", "metrics.json", "--pr-csv", "pr.csv"],
        vec!["budget", "--in", "q.sdm", "--out", "budget.json"],
        vec!["report", "--in", "metrics.json", "budget.json", "--out", "report.json"],
    ];
    for s in &steps {
        let args: Vec<&str> = c.iter().copied().chain(s.iter().copied()).collect();
        ok(d, &args);
    }

    let history = std::fs::read_to_string(d.join("h.csv")).unwrap();
    assert!(history.starts_with("epoch,train_acc,val_acc,loss\n1,"));
    let preds = std::fs::read_to_string(d.join("pred.csv")).unwrap();
    assert!(preds.starts_with("index,score,pred,label\n0,"));
    assert_eq!(preds.lines().count(), 1 + 14);
    assert!(std::fs::read_to_string(d.join("pr.csv")).unwrap().starts_with("threshold,precision,recall\n"));

    validate(&json(d.join("metrics.json")), &schema("metrics_report.schema.json"), "metrics");
    validate(&json(d.join("budget.json")), &schema("budget_report.schema.json"), "budget");
    let report = json(d.join("report.json"));
    validate(&report, &schema("run_report.schema.json"), "report");
    assert_eq!(report["pass"], true);
    assert_eq!(report["artifacts"]["budget"]["pass"], true);
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--seed", "7", "synth", "--records", "1", "--out", "a"]);
    ok(d, &["--seed", "7", "synth", "--records", "1", "--out", "b"]);
    ok(d, &["--seed", "8", "synth", "--records", "1", "--out", "c"]);
    for name in ["rec000_nonstress.csv", "rec000_stress.csv"] {
        let a = std::fs::read(d.join("a").join(name)).unwrap();
        assert_eq!(a, std::fs::read(d.join("b").join(name)).unwrap());
        assert_ne!(a, std::fs::read(d.join("c").join(name)).unwrap());
    }
}

#[test]
fn budget_gate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = build_default_model(0);
    save_model(&base, d.join("base.sdm")).unwrap();
    let pruned = prune_dense_units(&base, &PruneConfig::default()).unwrap();
    let q = quantize_ptq(&pruned, &calibrate(&pruned, &[ScalogramImage::zeros()]).unwrap()).unwrap();
    q.save(d.join("q.sdm")).unwrap();

    let out = run(d, &["budget", "--in", "q.sdm"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["ram_peak_bytes"], 127_104);
    assert_eq!(v["flash_bytes"], 1_625_512);

    let out = run(d, &["budget", "--in", "base.sdm"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], false);
    assert_eq!(v["margins"]["flash"], -17_347_464);

    let out = run(d, &["budget", "--in", "q.sdm", "--ram-budget", "100000"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(d, &["budget", "--in", "base.sdm", "--flash-budget", "20000000"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(d, &["synth", "--bogus"]).status.code(), Some(2));

    let out = run(d, &["featurize", "--in", "missing.csv", "--out", "x.sclg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let out = run(d, &["budget"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn accuracy_floor_is_a_gate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("p.csv"), "index,score,pred,label\n0,0.9,1,1\n1,0.8,1,0\n2,0.1,0,0\n3,0.2,0,1\n").unwrap();
    ok(d, &["evaluate", "--in", "p.csv", "--out", "m.json", "--min-accuracy", "0.5"]);
    let out = run(d, &["evaluate", "--in", "p.csv", "--out", "m.json", "--min-accuracy", "0.75"]);
    assert_eq!(out.status.code(), Some(1));
    let m = json(d.join("m.json"));
    assert_eq!(m["accuracy"], 0.5);
    assert_eq!(m["auc"], 0.75);
}

#[test]
fn config_paths_fill_missing_flags() {
    let dir = setup();
    let d = dir.path();
    let cfg = format!("{SMALL}[paths]\nrecords = \"r\"\nscalograms = \"s.sclg\"\n");
    std::fs::write(d.join("p.toml"), cfg).unwrap();
    ok(d, &["--config", "p.toml", "synth"]);
    ok(d, &["--config", "p.toml", "featurize"]);
    assert!(d.join("s.sclg").exists());
}
