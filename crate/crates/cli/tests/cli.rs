use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qdtele"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tags.toml");
    std::fs::write(&cfg, "[tagstream]\nrecord_tags = true\ndark_rate_hz = 1000.0\n").unwrap();
    let args = ["--experiment", "teleport", "--mode", "mc", "--seed", "7", "--trials", "3000", "--config", cfg.to_str().unwrap()];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&args, &a).status.success());
    assert!(run(&args, &b).status.success());
    let (fa, fb) = (dir_contents(&a), dir_contents(&b));
    assert!(fa.iter().any(|(n, _)| n == "tags_plus.txt"));
    assert_eq!(fa, fb);
}

#[test]
fn different_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["--experiment", "hom", "--mode", "mc", "--seed", "1", "--trials", "5000"], &a).status.success());
    assert!(run(&["--experiment", "hom", "--mode", "mc", "--seed", "2", "--trials", "5000"], &b).status.success());
    assert_ne!(summary(&a)["results"], summary(&b)["results"]);
}

#[test]
fn unknown_key_fails_with_one_line_and_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("typo.toml");
    std::fs::write(&cfg, "[spin]\nt2_star_ps = 1000.0\n").unwrap();
    let out = tmp.path().join("out");
    let o = run(&["--experiment", "teleport", "--config", cfg.to_str().unwrap()], &out);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("t2_star_ps"), "{err}");
    assert!(!out.exists());
}

#[test]
fn invalid_physics_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[source]\nlifetime_ps = 0.0\n").unwrap();
    let out = tmp.path().join("out");
    let o = run(&["--experiment", "qubit", "--config", cfg.to_str().unwrap()], &out);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn resolved_config_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = ["--experiment", "entangle", "--mode", "mc", "--seed", "11", "--trials", "20000"];
    assert!(run(&args, &a).status.success());
    let resolved = a.join("config.toml");
    let o = run(&["--experiment", "entangle", "--mode", "mc", "--config", resolved.to_str().unwrap()], &b);
    assert!(o.status.success());
    assert_eq!(dir_contents(&a), dir_contents(&b));
    let s = summary(&a);
    assert_eq!(s["config"]["protocol"]["seed"], 11);
    assert_eq!(s["config"]["protocol"]["trials"], 20000);
}

#[test]
fn ideal_teleport_reports_unit_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("ideal.toml");
    let o = run(&["--experiment", "teleport", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(o.status.success());
    let f = summary(tmp.path())["results"]["f_t"].as_f64().unwrap();
    assert!((f - 1.0).abs() < 1e-9, "{f}");
}

#[test]
fn hom_visibility_follows_overlap() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("m.toml");
    std::fs::write(&cfg, "[interference]\noverlap = 0.802\n").unwrap();
    let out = tmp.path().join("out");
    assert!(run(&["--experiment", "hom", "--config", cfg.to_str().unwrap()], &out).status.success());
    let v = summary(&out)["results"]["visibility"].as_f64().unwrap();
    assert!((v - 0.802).abs() < 1e-6, "{v}");
}

#[test]
fn histogram_files_follow_the_export_schema() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&["--experiment", "qubit"], tmp.path()).status.success());
    let csv = std::fs::read_to_string(tmp.path().join("qubit.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("bin_start_ps,bin_end_ps,count"));
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("qubit.json")).unwrap()).unwrap();
    assert_eq!(side["schema_id"], "qdtele.histogram.v1");
    assert_eq!(side["config_hash"], summary(tmp.path())["config_hash"]);
    assert_eq!(side["seed"], 1);
}

#[test]
fn every_experiment_runs_in_both_modes() {
    let tmp = tempfile::tempdir().unwrap();
    for e in ["qubit", "hom", "entangle", "teleport", "g2"] {
        for m in ["analytic", "mc"] {
            let out = tmp.path().join(format!("{e}_{m}"));
            let o = run(&["--experiment", e, "--mode", m, "--trials", "4000"], &out);
            assert!(o.status.success(), "{e} {m}: {}", String::from_utf8_lossy(&o.stderr));
            assert_eq!(summary(&out)["experiment"], e);
        }
    }
}
