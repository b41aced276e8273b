use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn volgrow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volgrow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

const PERTURBED: &str = "\
[system]
kind = perturbed_cat
epsilon = 0.05

[run]
seed = 4
samples = 500
n_list = 3, 6, 9
";

#[test]
fn help_prints_grammar() {
    let o = volgrow(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("CONFIG FILE GRAMMAR"));
    assert!(text.contains("ball_bundle"));
}

#[test]
fn unknown_command_is_argument_error() {
    let o = volgrow(&["entropy", "--config", "x.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "argument");
}

#[test]
fn missing_config_file_exits_2() {
    let o = volgrow(&["lyapunov", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["schema_version"], 1);
}

#[test]
fn config_errors_are_all_reported_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[system]\nkind = torus\n[run]\ndelta = 0.7\nmc_count = 5\n",
    );
    let o = volgrow(&["ball-growth", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    let issues = e["error"]["issues"].as_array().unwrap();
    let lines: Vec<u64> = issues.iter().map(|i| i["line"].as_u64().unwrap()).collect();
    assert!(
        lines.contains(&2) && lines.contains(&4) && lines.contains(&5),
        "{e}"
    );
}

#[test]
fn reports_are_byte_identical_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PERTURBED);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, seed) in [(&a, "4"), (&b, "4"), (&c, "5")] {
        let o = volgrow(&[
            "entropy-volume",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(
        read(&a, "entropy-volume.json"),
        read(&b, "entropy-volume.json")
    );
    assert_eq!(
        read(&a, "entropy-volume.csv"),
        read(&b, "entropy-volume.csv")
    );
    assert_ne!(
        read(&a, "entropy-volume.json"),
        read(&c, "entropy-volume.json")
    );

    let csv = String::from_utf8(read(&a, "entropy-volume.csv")).unwrap();
    assert!(csv.starts_with("n,log_integral,normalized,stderr\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 4);

    let json: Value = serde_json::from_slice(&read(&a, "entropy-volume.json")).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["command"], "entropy-volume");
    assert_eq!(json["seed"], 4);
    assert!(json["result"]["fitted_rate"].as_f64().unwrap() > 0.9);
}

#[test]
fn identity_lyapunov_and_domination() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[system]\nkind = linear_toral\nrow = 1, 0\nrow = 0, 1\n[run]\nlyapunov_n = 100\ndims = 1, 1\ndomination_samples = 10\n",
    );
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let o = volgrow(&["lyapunov", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success());
    let l: Value = serde_json::from_slice(&fs::read(out.join("lyapunov.json")).unwrap()).unwrap();
    assert_eq!(l["result"]["exponents"], serde_json::json!([0.0, 0.0]));

    let o = volgrow(&["domination", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d: Value = serde_json::from_slice(&fs::read(out.join("domination.json")).unwrap()).unwrap();
    assert_eq!(d["result"]["passed"], false);
}

#[test]
fn command_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{PERTURBED}command = lyapunov\n"));
    let o = volgrow(&["compare", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PERTURBED);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = volgrow(&[
        "entropy-volume",
        "--config",
        &cfg,
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr_json(&o)["error"].is_object());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        if let Err(e) = volgrow_core::cli::parse_config(&text) {
            panic!("{}: {e}", path.display());
        }
        seen += 1;
    }
    assert!(seen >= 4);
}
