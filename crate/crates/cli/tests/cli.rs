use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn itl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itl")).current_dir(dir).args(args).output().expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn bounds_prints_the_calculators() {
    let dir = tempfile::tempdir().unwrap();
    let out = itl(dir.path(), &["bounds", "--p", "6", "--d", "3", "--gamma", "2", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    for key in ["beta_model", "eulerian_threshold", "time_critical", "verdicts"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["beta_model"]["zeta"], 1.0);
    assert!((v["beta_model"]["theta"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert!(v.get("timestamp_unix").is_none());
}

#[test]
fn bounds_verdict_with_a_band() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["bounds", "--p", "3", "--d", "3", "--gamma", "3", "--theta", "0.3", "--theta-upper", "0.32"];
    let v = json(&itl(dir.path(), &args).stdout);
    let verdicts = v["verdicts"].as_array().unwrap();
    assert!(!verdicts.is_empty());
    assert!(verdicts.iter().all(|x| x["side"] == "below"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(itl(p, &["--help"]).status.code(), Some(0));
    assert_eq!(itl(p, &["--version"]).status.code(), Some(0));
    assert_eq!(itl(p, &["no-such-command"]).status.code(), Some(2));
    assert_eq!(itl(p, &["bounds", "--p", "2", "--d", "3", "--gamma", "1"]).status.code(), Some(2));
    assert_eq!(itl(p, &["info", "missing.itl"]).status.code(), Some(2));
    std::fs::write(p.join("junk.itl"), b"XXXX0000").unwrap();
    assert_eq!(itl(p, &["info", "junk.itl"]).status.code(), Some(2));
    // a 16-cell set cannot resolve δ down to 2^-6
    assert_eq!(itl(p, &["synth", "cantor", "--d", "1", "--n", "18", "--length", "1", "--level", "2", "-o", "c.itl"]).status.code(), Some(0));
    assert_eq!(itl(p, &["dimension", "c.itl", "--levels", "2:6"]).status.code(), Some(3));
}

#[test]
fn synth_info_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = itl(p, &["synth", "taylor-green", "--n", "16", "--nt", "3", "-o", "tg.itl"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&itl(p, &["info", "tg.itl"]).stdout);
    assert_eq!(v["field"]["sizes"], serde_json::json!([16, 16]));
    assert_eq!(v["field"]["components"], 2);
    assert_eq!(v["field"]["nt"], 3);
    let blob = v["inputs"][0]["blob"].as_str().unwrap();
    assert_eq!(blob.len(), 40);
    assert!(p.join("itl-out/synth.json").exists());
}

#[test]
fn dimension_table_and_repeatable_reports() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    itl(p, &["synth", "cantor", "--d", "1", "--n", "1458", "--length", "1", "-o", "c.itl"]);
    let run = |out: &str| {
        let o = itl(p, &["dimension", "c.itl", "--levels", "2:7", "--no-timestamp", "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("a");
    run("b");
    let csv = std::fs::read_to_string(p.join("a/dimension.csv")).unwrap();
    assert!(csv.starts_with("delta,tau,volume\r\n"));
    assert_eq!(csv.lines().count(), 7);
    let a = std::fs::read(p.join("a/dimension.csv")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b/dimension.csv")).unwrap());
    let ja = json(&std::fs::read(p.join("a/dimension.json")).unwrap());
    let jb = json(&std::fs::read(p.join("b/dimension.json")).unwrap());
    assert_eq!(ja["cover"], jb["cover"]);
    let gamma = ja["cover"]["fit"]["gamma"].as_f64().unwrap();
    assert!((gamma - 2f64.ln() / 3f64.ln()).abs() < 0.1, "{gamma}");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("run.cfg"), "# bound inputs\np = 4\nd = 3\ngamma = 2.5\nno_timestamp = true\n").unwrap();
    let v = json(&itl(p, &["--config", "run.cfg", "bounds", "--p", "6"]).stdout);
    assert_eq!(v["inputs"]["p"], 6.0);
    assert_eq!(v["inputs"]["gamma"], 2.5);
    assert!(v.get("timestamp_unix").is_none());
    std::fs::write(p.join("bad.cfg"), "p 4\n").unwrap();
    assert_eq!(itl(p, &["--config", "bad.cfg", "bounds"]).status.code(), Some(2));
}

#[test]
fn verify_runs_a_selection() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = itl(p, &["verify", "--only", "8,9", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains(" 8 PASS") && stdout.contains(" 9 PASS"));
    let v = json(&std::fs::read(p.join("itl-out/verify.json")).unwrap());
    assert_eq!(v["passed"], 2);
    assert_eq!(itl(p, &["verify", "--only", "11"]).status.code(), Some(2));
}
