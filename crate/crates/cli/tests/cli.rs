use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn cll(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cll")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn manifest(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("manifest.toml")).unwrap().parse().unwrap()
}

fn summary_f64(m: &toml::Table, key: &str) -> f64 {
    m["summary"][key].as_float().unwrap()
}

#[test]
fn solve_hitchin_sample_reports_history() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("solve-hitchin.toml");
    let (code, err) = cll(&["--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let m = manifest(out.path());
    assert_eq!(m["command"].as_str(), Some("solve-hitchin"));
    assert!(m["config"].as_str().unwrap().contains("log(2*y)"));
    assert!(!m["summary"]["residual_history"].as_array().unwrap().is_empty());
    assert!(out.path().join("u.csv").exists());
    assert_eq!(fs::read_to_string(out.path().join("hitchin.jsonl")).unwrap().lines().count(), 3);
}

#[test]
fn missing_field_file_is_a_config_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "command = \"solve-hitchin\"\n[domain]\nnx = 8\nny = 8\nx_period = 1.0\ny_min = 0.5\ny_max = 1.5\n\
         [fields]\nphi1 = { file = \"absent_phi1.csv\" }\nboundary_u = \"0\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let (code, err) = cll(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("absent_phi1.csv"), "{err}");
    let diag = fs::read_to_string(out.join("diagnostic.jsonl")).unwrap();
    assert!(diag.contains("\"class\":\"input\""));
}

#[test]
fn unknown_command_exits_with_input_code() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("solve-hitchin.toml");
    let (code, err) = cll(&["bogus", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown command"));
}

#[test]
fn gate_failure_exits_three_with_named_gate() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(configs().join("contradiction.toml")).unwrap();
    let text = base.replace("nx = 128", "nx = 32").replace("ny = 128", "ny = 32").replace("gate = 1e-6", "gate = 1e-5")
        + "perturb_b = 0.1\n";
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let (code, _) = cll(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3);
    let diag: serde_json::Value =
        serde_json::from_str(fs::read_to_string(out.join("diagnostic.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(diag["gate"], "d1");
    assert_eq!(diag["exit_code"], 3);
    // the report bundle is still written for inspection
    assert!(out.join("identity/summary.jsonl").exists());
}

#[test]
fn closedness_growth_matches_central_charge() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("closedness.toml");
    let (code, err) = cll(&["--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--threads", "2"]);
    assert_eq!(code, 0, "{err}");
    let m = manifest(out.path());
    let (g, z) = (summary_f64(&m, "growth_rate"), summary_f64(&m, "re_z"));
    assert!(((g - z) / z).abs() < 0.05, "growth {g} vs Re Z {z}");
    assert_eq!(m["seed"].as_integer(), Some(11));
    let header = fs::read_to_string(out.path().join("wkb.csv")).unwrap();
    assert!(header.starts_with("eps,re_q,im_q,abs_dev,log_abs_trace\n"));
}

#[test]
fn seed_flag_overrides_config_and_is_recorded() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("wkb-sweep.toml");
    let (code, err) = cll(&["--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--seed", "99"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(manifest(out.path())["seed"].as_integer(), Some(99));
}

#[test]
fn every_sample_config_parses() {
    for entry in fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        cll_cli::LoadedConfig::from_path(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}
