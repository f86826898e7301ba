use std::path::{Path, PathBuf};
use std::process::Command;

use mtrace_cli::config::parse;
use mtrace_cli::studies::real;
use mtrace_cli::CliError;

fn mtrace() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mtrace"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn validation_message(text: &str) -> String {
    match parse(text, "test", Path::new(".")) {
        Err(CliError::Validation(msg)) => msg,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn unknown_family_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"space": {"kind": "interval", "a": 0, "b": 1, "atom_level": 4},
            "kernel": {"family": "foo"}, "study": "trace_study"}"#,
    );
    let out = mtrace().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kernel.family") && err.contains("foo"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn malformed_json_reports_position() {
    let msg = validation_message("{\n  \"study\": \"spectrum\",\n  oops\n}");
    assert!(msg.contains("line 3"), "{msg}");
    assert!(msg.contains("column"), "{msg}");
}

#[test]
fn unknown_keys_are_rejected() {
    let msg = validation_message(r#"{"study": "spectrum", "extra": 1}"#);
    assert!(msg.contains("extra"), "{msg}");
    let msg = validation_message(
        r#"{"space": {"kind": "interval", "a": 0, "b": 1, "atom_level": 4, "colour": 1},
            "kernel": {"family": "brownian_min"}, "study": "spectrum"}"#,
    );
    assert!(msg.contains("colour"), "{msg}");
    let msg = validation_message(
        r#"{"space": {"kind": "interval", "a": 0, "b": 1, "atom_level": 4},
            "kernel": {"family": "exp_abs", "alpha": 1, "beta": 2}, "study": "spectrum"}"#,
    );
    assert!(msg.contains("beta"), "{msg}");
    let msg = validation_message(
        r#"{"space": {"kind": "circle", "a": 0, "circumference": 1, "atom_level": 4}, "study": "doob_convergence"}"#,
    );
    assert!(msg.contains("space.a"), "{msg}");
}

#[test]
fn unknown_tags_name_their_field() {
    assert!(validation_message(r#"{"study": "nope"}"#).contains("study"));
    let msg = validation_message(r#"{"space": {"kind": "sphere", "atom_level": 3}, "study": "doob_convergence"}"#);
    assert!(msg.contains("space.kind"), "{msg}");
    let msg = validation_message(
        r#"{"space": {"kind": "interval", "a": 0, "b": 1, "atom_level": 3, "density": {"family": "cauchy"}},
            "study": "doob_convergence"}"#,
    );
    assert!(msg.contains("space.density.family"), "{msg}");
    let msg = validation_message(
        r#"{"space": {"kind": "interval", "a": 0, "b": 1, "atom_level": 3},
            "filtration": {"mode": "random"}, "study": "doob_convergence"}"#,
    );
    assert!(msg.contains("filtration.mode"), "{msg}");
}

#[test]
fn atom_budget_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "big.json",
        r#"{"space": {"kind": "interval", "a": 0, "b": 1, "atom_level": 13},
            "kernel": {"family": "brownian_min"}, "study": "spectrum"}"#,
    );
    let out = mtrace().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn kernel_domain_mismatch_is_rejected() {
    let msg = validation_message(
        r#"{"space": {"kind": "torus2", "circumferences": [1, 1], "atom_level": 3},
            "kernel": {"family": "brownian_min"}, "study": "spectrum"}"#,
    );
    assert!(msg.contains("kernel"), "{msg}");
}

#[test]
fn study_assertion_failure_exits_3_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    // a tolerance below roundoff cannot be met
    let cfg = write_config(
        dir.path(),
        "tight.json",
        r#"{"space": {"kind": "interval", "a": 0, "b": 1, "atom_level": 6},
            "kernel": {"family": "gaussian_rbf", "gamma": 3.0},
            "study": "sandwich_identity", "params": {"tol": 1e-300}}"#,
    );
    let out_dir = dir.path().join("o");
    let out = mtrace().arg("run").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("sandwich_identity.csv").exists());
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("assertion_failed"));
}

#[test]
fn sampled_grid_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let n = 8;
    let rows: Vec<String> = (0..n)
        .map(|i| (0..n).map(|j| real((-((i as f64) - (j as f64)).abs() / 4.0).exp())).collect::<Vec<_>>().join(","))
        .collect();
    std::fs::write(dir.path().join("grid.csv"), rows.join("\n")).unwrap();
    let cfg = write_config(
        dir.path(),
        "sampled.json",
        r#"{"space": {"kind": "interval", "a": 0, "b": 1, "atom_level": 3},
            "kernel": {"family": "sampled", "path": "grid.csv", "psd": true},
            "study": "sandwich_identity"}"#,
    );
    let out = mtrace().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(dir.path().join("grid.csv"), "1,2\n3,4\n").unwrap();
    let out = mtrace().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("p")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_are_listed_with_digests() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = mtrace().arg("run").arg(configs().join("maximal.json")).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    for o in manifest["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(out_dir.join(o["file"].as_str().unwrap())).unwrap();
        assert!(!bytes.is_empty());
        assert_eq!(o["sha256"].as_str().unwrap(), mtrace_cli::run::sha256_hex(&bytes));
    }
    assert_eq!(manifest["phases"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["config"]["seed"], 7);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["doob.json", "cover_sandwich.json"] {
        let mut digests = Vec::new();
        for (k, threads) in ["1", "3"].iter().enumerate() {
            let out_dir = dir.path().join(format!("{name}-{k}"));
            let out = mtrace()
                .args(["run", configs().join(name).to_str().unwrap(), "--threads", threads, "--out"])
                .arg(&out_dir)
                .output()
                .unwrap();
            assert!(out.status.success());
            let csv = std::fs::read_dir(&out_dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .find(|p| p.extension().is_some_and(|e| e == "csv"))
                .unwrap();
            digests.push(std::fs::read(csv).unwrap());
        }
        assert_eq!(digests[0], digests[1], "{name}");
    }
}

#[test]
fn catalog_lists_and_filters() {
    let out = mtrace().arg("catalog").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("brownian_min") && text.contains("trace_study"));
    let out = mtrace().args(["catalog", "--filter", "half_line"]).output().unwrap();
    let filtered = String::from_utf8(out.stdout).unwrap();
    assert!(filtered.contains("rank_one_exp"));
    assert!(!filtered.contains("brownian_min"));
    assert!(filtered.lines().count() < text.lines().count());
    let again = mtrace().arg("catalog").output().unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn version_flag() {
    let out = mtrace().arg("--version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn reals_have_seventeen_significant_digits() {
    assert_eq!(real(0.1), "1.0000000000000001e-1");
    assert_eq!(real(-0.0), "0.0000000000000000e0");
    let x = std::f64::consts::PI / 7.0;
    assert_eq!(real(x).parse::<f64>().unwrap(), x);
}
