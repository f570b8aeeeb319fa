use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zfdfe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zfdfe")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = zfdfe(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    zfdfe(dir, args).status.code().expect("exit code")
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&read(path)).unwrap()
}

const BUILD: &[&str] = &["codebook", "build", "--nt", "4", "--k", "2", "--size", "8", "--budget", "800", "--seed", "3", "--name", "cb"];

fn build(dir: &Path) -> String {
    ok(dir, BUILD);
    dir.join("out/codebook/cb/codebook.json").display().to_string()
}

#[test]
fn codebook_build_is_reproducible_and_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let stdout = ok(dir, BUILD);
    let stats: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(stats["size"], 8);
    assert_eq!(stats["feedback_bits"], 3);

    let files = ["codebook.json", "manifest.json", "results.json"];
    let first: Vec<String> = files.iter().map(|f| read(dir.join("out/codebook/cb").join(f))).collect();
    let mut again = vec!["--threads", "1"];
    again.extend_from_slice(BUILD);
    ok(dir, &again);
    for (f, before) in files.iter().zip(&first) {
        assert_eq!(&read(dir.join("out/codebook/cb").join(f)), before, "{f} changed on rerun");
    }

    let cb = json(dir.join("out/codebook/cb/codebook.json"));
    for key in ["nt", "k", "kind", "metric", "build_seed", "min_distance", "entries"] {
        assert!(cb.get(key).is_some(), "missing {key}");
    }
    assert_eq!(cb["entries"].as_array().unwrap().len(), 8);
    // 4x2 entry, row-major, one [re, im] pair per element
    let e0 = cb["entries"][0].as_array().unwrap();
    assert_eq!(e0.len(), 8);
    assert_eq!(e0[0].as_array().unwrap().len(), 2);

    let manifest = json(dir.join("out/codebook/cb/manifest.json"));
    assert_eq!(manifest["command"], "codebook build");
    assert_eq!(manifest["seeds"]["build_seed"], 3);
}

#[test]
fn permutation_codebook_and_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["codebook", "build", "--kind", "permutation", "--nt", "5", "--k", "4", "--name", "perm"]);
    let out = ok(dir, &["codebook", "stats", "out/codebook/perm/codebook.json"]);
    let stats: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(stats["size"], 120);
    assert_eq!(stats["kind"], "permutation");
    // reordered columns span the same subspace
    assert!(stats["min_distance_proj2"].as_f64().unwrap() < 1e-12);
}

#[test]
fn select_reports_a_valid_index() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cb = build(dir);
    let out = ok(dir, &["select", "--nt", "4", "--nr", "3", "--k", "2", "--codebook", &cb, "--snr-db", "10", "--objective", "sum-mse", "--all-values"]);
    let res: Value = serde_json::from_str(&out).unwrap();
    let idx = res["index"].as_u64().unwrap() as usize;
    let values: Vec<f64> = res["per_entry_values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(values.len(), 8);
    let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(values[idx], best);
    assert_eq!(res["log_mse"].as_array().unwrap().len(), 2);
    assert!(dir.join("out/select/sum-mse-seed0/manifest.json").exists());
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cb = build(dir);
    std::fs::write(dir.join("sys.json"), r#"{"nt": 4, "nr": 3, "k": 2, "p_total": 2.0, "sigma2_n": 0.1}"#).unwrap();
    ok(dir, &["select", "--config", "sys.json", "--sigma2", "0.5", "--codebook", &cb, "--name", "cfg"]);
    let m = json(dir.join("out/select/cfg/manifest.json"));
    assert_eq!(m["config"]["sigma2_n"], 0.5);
    assert_eq!(m["config"]["p_total"], 2.0);
}

#[test]
fn ber_campaign_layout_and_thread_independence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cb = build(dir);
    let args = |threads: &'static str, name: &'static str| -> Vec<String> {
        [
            "--threads", threads, "simulate", "ber", "--nt", "4", "--nr", "3", "--k", "2", "--codebook", &cb, "--scheme", "grassmann-zfdfe",
            "--scheme", "grassmann-zfdfe@sum-mse", "--scheme", "ordering-norm-zfdfe", "--scheme", "perfect-csi-lin-zf", "--snr-db", "-3,6,15",
            "--channels", "60", "--frames", "10", "--seed", "9", "--name", name,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    };
    let a1 = args("1", "one");
    ok(dir, &a1.iter().map(String::as_str).collect::<Vec<_>>());
    let a4 = args("4", "four");
    ok(dir, &a4.iter().map(String::as_str).collect::<Vec<_>>());

    let csv1 = read(dir.join("out/simulate/one/results.csv"));
    assert_eq!(csv1, read(dir.join("out/simulate/four/results.csv")));
    let mut lines = csv1.lines();
    assert_eq!(lines.next().unwrap(), "snr_db,scheme,ber,bits,errors,mi_bits,n_channels");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    for r in &rows {
        let (ber, bits, errors): (f64, f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap(), r[4].parse().unwrap());
        assert_eq!(bits, 60.0 * 10.0 * 2.0 * 4.0);
        assert!((ber - errors / bits).abs() < 1e-15);
        assert_eq!(r[6], "60");
    }
    assert!(rows.iter().any(|r| r[1] == "grassmann-zfdfe-8[sum-mse]"));

    let res = json(dir.join("out/simulate/one/results.json"));
    assert_eq!(res["manifest"], "manifest.json");
    assert_eq!(res["campaigns"].as_array().unwrap().len(), 4);
    let m = json(dir.join("out/simulate/one/manifest.json"));
    assert_eq!(m["seeds"]["master_seed"], 9);
}

#[test]
fn mi_campaign_leaves_ber_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = ok(dir, &["simulate", "mi", "--nt", "3", "--nr", "3", "--k", "2", "--scheme", "perfect-csi-zfdfe", "--scheme", "ordering-greedy-zfdfe", "--snr-db", "-5,20", "--channels", "40"]);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[2], "");
        assert!(f[5].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn distortion_with_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cb = build(dir);
    let out = ok(dir, &["distortion", "--nt", "4", "--nr", "2", "--k", "2", "--codebook", &cb, "--samples", "200", "--kind", "det-loss", "--density", "0.3"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["estimate"]["mean_gap"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["estimate"]["n_samples"], 200);
    assert!(v["bound"]["value"].as_f64().unwrap().is_finite());
}

#[test]
fn verify_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = ok(dir, &["verify", "zero-forcing", "--cases", "40", "--name", "zf"]);
    assert!(out.contains("[PASS]") && !out.contains("[FAIL]"), "{out}");
    let r = json(dir.join("out/verify/zf/results.json"));
    assert_eq!(r["reports"].as_array().unwrap().len(), 1);
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cb = build(dir);
    assert_eq!(code(dir, &["frobnicate"]), 2);
    assert_eq!(code(dir, &["codebook", "build", "--nt", "2", "--k", "3"]), 2);
    assert_eq!(code(dir, &["select", "--nt", "4", "--nr", "3", "--k", "2", "--codebook", "missing.json"]), 2);
    assert_eq!(code(dir, &["select", "--nt", "4", "--nr", "3", "--k", "2", "--codebook", &cb, "--objective", "max-fun"]), 2);
    assert_eq!(code(dir, &["select", "--nr", "3", "--k", "2", "--codebook", &cb]), 2);
    // codebook is 4x2 but the link asks for three streams
    assert_eq!(code(dir, &["select", "--nt", "4", "--nr", "3", "--k", "3", "--codebook", &cb]), 2);
    assert_eq!(code(dir, &["simulate", "ber", "--nt", "4", "--nr", "3", "--k", "2", "--scheme", "grassmann-zfdfe", "--snr-db", "0"]), 2);
    assert_eq!(code(dir, &["simulate", "ber", "--nt", "4", "--nr", "3", "--k", "2", "--scheme", "telepathy", "--snr-db", "0"]), 2);
    assert_eq!(code(dir, &["verify", "nonsense"]), 2);
    assert_eq!(code(dir, &["select", "--nt", "4", "--nr", "3", "--k", "2", "--codebook", &cb, "--name", ".."]), 2);
    std::fs::write(dir.join("bad.json"), "{\"nt\": 4}").unwrap();
    assert_eq!(code(dir, &["select", "--config", "bad.json", "--codebook", &cb]), 2);
}
