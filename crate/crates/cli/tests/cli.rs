use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gumbel-exit"));
    c.env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("experiment.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn constants_for_ou_report_standard_c() {
    let out = run(&["constants", "--eps", "0.01"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let c = v["c"].as_f64().unwrap();
    assert!((c - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    assert_eq!(v["convention"], "o1-dropped");
    assert!(v["artifact_version"].as_str().unwrap().starts_with("gumbel-exit "));
    assert_eq!(v["config"]["covariance"]["kind"], "ornstein_uhlenbeck");
}

#[test]
fn constants_ladder_is_a_list() {
    let out = run(&["constants", "--ln-eps", "-5,-50,-500"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v["ladder"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let g: Vec<f64> = rows.iter().map(|r| r["gamma"].as_f64().unwrap()).collect();
    assert!(g.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 3\nreplicatez = 10\n");
    let out = run(&["--config", &cfg, "constants"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("replicatez"), "{err}");
}

#[test]
fn unsupported_boundary_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[boundary]\nkind = \"polynomial\"\nd = 1.0\n");
    let out = run(&["--config", &cfg, "constants", "--eps", "0.01"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn non_decreasing_ladder_is_rejected() {
    let out = run(&["constants", "--eps", "0.01,0.05"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_verifier_is_a_usage_error() {
    let out = run(&["verify", "--lemma", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
}

#[test]
fn study_is_reproducible_and_writes_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, extra) in [(&a, None), (&b, Some("--sequential"))] {
        let mut args = vec!["study", "--eps", "0.1,0.05", "--replicates", "200", "--seed", "9"];
        let out_dir = dir.path().to_string_lossy().into_owned();
        args.extend(["--out", &out_dir]);
        args.extend(extra);
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["study_00.csv", "study_01.csv", "summary.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between execution policies");
    }
    let csv = std::fs::read_to_string(a.path().join("study_00.csv")).unwrap();
    assert!(csv.starts_with("# artifact_version: gumbel-exit "));
    assert!(csv.contains("\n# c: "));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 201);

    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 2);
    assert!(summary["rows"][0]["D"].as_f64().unwrap() > 0.0);

    // `stats` re-reads the CSV and reproduces the KS distance.
    let input = a.path().join("study_00.csv");
    let out = run(&["stats", "--input", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["D"], summary["rows"][0]["D"]);
    assert_eq!(stats["n"], summary["rows"][0]["n"]);
}

#[test]
fn study_needs_enough_replicates() {
    let out = run(&["study", "--eps", "0.1", "--replicates", "20"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn curve_subcommands_emit_csv() {
    let out = run(&["gamma-ladder", "--ln-eps", "-10,-30,-100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "ln_eps,gamma_exact,gamma_asymptotic,refined,abs_gap");

    let out = run(&["verify-lemma-prop", "--ln-eps", "-10,-30,-100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = run(&["--config", path.to_str().unwrap(), "constants"]);
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
            n += 1;
        }
    }
    assert!(n >= 3);
}
