use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ats_bsde::output::sha256_hex;
use ats_bsde::ExperimentConfig;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ats-bsde"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("ATS_BSDE_THREADS")
        .env_remove("ATS_BSDE_SEED")
        .env_remove("ATS_BSDE_MODE")
        .env_remove("ATS_BSDE_MC_SAMPLES")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn grid_example_reports_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["grid"], &configs().join("damped_cubic_c3_6.toml"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ats_comparison n=10: N="), "{stdout}");

    let summary = json(&tmp.path().join("summary.json"));
    let steps = summary["steps"].as_u64().unwrap() as usize;
    let csv = fs::read_to_string(tmp.path().join("grid.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("i,t_i,h_i,active_clause"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), steps);
    let total: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn validate_cubic_damped_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["validate"], &configs().join("validate_cubic_damped.toml"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("validate.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",1")), "{csv}");
}

#[test]
fn uniform_explicit_stability_fails_at_cap_six() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["stability"],
        &configs().join("damped_cubic_uniform_c6.toml"),
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let summary = json(&tmp.path().join("summary.json"));
    assert_eq!(summary["pass"], Value::Bool(false));
    assert!(summary["explosion"].is_object());
}

#[test]
fn adapted_stability_and_comparison_pass() {
    for cap in ["3_6", "4", "6"] {
        let config = configs().join(format!("damped_cubic_c{cap}.toml"));
        for sub in ["stability", "compare"] {
            let tmp = tempfile::tempdir().unwrap();
            let out = run(&[sub], &config, tmp.path());
            assert_eq!(
                out.status.code(),
                Some(0),
                "{sub} c={cap}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
}

#[test]
fn missing_horizon_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "[problem]\npreset = \"damped_cubic\"\ncap = 4.0\n[grid]\nkind = \"ats_1d\"\nn = 10\n",
    );
    let out = run(&["grid"], &config, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem.horizon"));
}

#[test]
fn damped_cubic_without_cap_names_the_studied_values() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "[problem]\npreset = \"damped_cubic\"\nhorizon = 1.0\n[grid]\nkind = \"ats_1d\"\nn = 10\n",
    );
    let out = run(&["grid"], &config, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("3.6") && stderr.contains("6"), "{stderr}");
}

#[test]
fn missing_stability_tolerance_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "[problem]\npreset = \"damped_cubic\"\nhorizon = 1.0\ncap = 4.0\n[grid]\nkind = \"ats_1d\"\nn = 10\n\
         [scheme]\nkind = \"explicit_ats\"\n[stability]\n",
    );
    let out = run(&["stability"], &config, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
}

fn mc_solve_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "[problem]\npreset = \"damped_cubic\"\nhorizon = 1.0\ncap = 4.0\n[grid]\nkind = \"ats_1d\"\nn = 4\n\
         [quantize]\nmode = \"mc\"\nsamples = 2000\nseed = 11\n[scheme]\nkind = \"explicit_ats\"\n\
         [output]\ndump = \"chain\"\n",
    )
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let config = mc_solve_config(tmp.path());
    let mut dumps = Vec::new();
    for threads in ["1", "4", "1"] {
        let out_dir = tmp.path().join(format!("t{threads}-{}", dumps.len()));
        let out = run(&["solve", "--threads", threads], &config, &out_dir);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let files: Vec<Vec<u8>> = ["solve.csv", "tables.csv", "chain.csv"]
            .iter()
            .map(|f| fs::read(out_dir.join(f)).unwrap())
            .collect();
        dumps.push(files);
    }
    assert_eq!(dumps[0], dumps[1]);
    assert_eq!(dumps[0], dumps[2]);
}

#[test]
fn seed_override_is_recorded_and_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let config = mc_solve_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&["solve"], &config, &a);
    run(&["solve", "--seed", "12"], &config, &b);
    let manifest = json(&b.join("manifest.json"));
    assert_eq!(manifest["seeds"]["quantize"], 12);
    assert_ne!(
        fs::read(a.join("chain.csv")).unwrap(),
        fs::read(b.join("chain.csv")).unwrap()
    );
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let out = run(
        &["solve", "--mode", "mc", "--mc-samples", "500"],
        &configs().join("damped_cubic_c4.toml"),
        &first,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = json(&first.join("manifest.json"));
    let resolved = fs::read_to_string(first.join("resolved_config.toml")).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap(), sha256_hex(&resolved));
    assert_eq!(manifest["resolved_config"].as_str().unwrap(), resolved);
    let parsed = ExperimentConfig::from_toml(&resolved).unwrap();
    assert_eq!(parsed.quantize.mode, "mc");
    assert_eq!(parsed.quantize.samples, 500);
    assert_eq!(parsed.to_toml(), resolved);

    // Rerunning the resolved config in place reproduces every file byte for byte.
    let replay = first.join("resolved_config.toml.copy");
    fs::copy(first.join("resolved_config.toml"), &replay).unwrap();
    let before = fs::read(first.join("solve.csv")).unwrap();
    let out = run(&["solve"], &replay, &first);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(first.join("solve.csv")).unwrap(), before);
    assert_eq!(
        fs::read_to_string(first.join("resolved_config.toml")).unwrap(),
        resolved
    );
}
