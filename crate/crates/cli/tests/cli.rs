//! Black-box tests of the installed binary: argument handling, exit
//! codes, artifact layout, and agreement with the library pipeline.

use std::path::Path;
use std::process::{Command, Output};

use modeval::toybench::{build_cases, run_toy_benchmark, toy_eval_options, ToyBenchConfig};
use modeval::write_dataset;

fn run(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_modeval"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().expect("spawn modeval")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn scalar(report: &serde_json::Value, name: &str) -> f64 {
    report["scalars"][name]["value"]
        .as_f64()
        .unwrap_or_else(|| panic!("scalar {name} missing from report"))
}

#[test]
fn recommend_prints_the_toy_plan() {
    let dir = tempfile::tempdir().unwrap();
    let fp = dir.path().join("fingerprint.json");
    std::fs::write(
        &fp,
        serde_json::to_vec_pretty(&modeval::toybench::toy_fingerprint()).unwrap(),
    )
    .unwrap();

    let out = run(&["recommend"], &[&fp]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for needed in ["recall", "precision", "f_beta", "ap", "matched-mode distances"] {
        assert!(text.contains(needed), "plan text lacks {needed:?}:\n{text}");
    }
}

#[test]
fn recommend_names_the_malformed_field() {
    let dir = tempfile::tempdir().unwrap();
    let fp = dir.path().join("fingerprint.json");
    std::fs::write(
        &fp,
        br#"{
  "reference_granularity": "modes_exhaustive",
  "resimulation": "available",
  "confidence_scores": "sometimes",
  "log_density": "unavailable",
  "discretization": "unavailable",
  "univariate": false,
  "uncertainty_required": false
}"#,
    )
    .unwrap();

    let out = run(&["recommend"], &[&fp]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("confidence_scores") && err.contains("sometimes"),
        "error does not name the offending field: {err}"
    );
}

#[test]
fn recommend_all_covers_every_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("plans");
    let out = run(
        &["recommend", "--all", "--out"],
        &[out_dir.as_path()],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("256 fingerprints enumerated, 0 empty plans"),
        "unexpected summary: {}",
        stdout(&out)
    );
    let plans = std::fs::read_to_string(out_dir.join("plans.jsonl")).unwrap();
    assert_eq!(plans.lines().count(), 256);
}

#[test]
fn evaluate_agrees_with_the_library_pipeline() {
    let seed = 21u64;
    let cases = 60usize;

    let lib = run_toy_benchmark(&ToyBenchConfig {
        cases,
        seed,
        ..Default::default()
    })
    .unwrap();
    let lib_recall = lib.multimodal.report.scalar("recall").unwrap();
    let lib_ap = lib.multimodal.report.scalar("ap").unwrap();
    let lib_dist = lib.multimodal.report.scalar("matched_distance").unwrap();

    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("cases.jsonl");
    write_dataset(&ds, &build_cases(cases, seed, &Default::default()).unwrap()).unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        serde_json::to_vec_pretty(&serde_json::json!({
            "dataset": ds,
            "eval": toy_eval_options(seed, false),
        }))
        .unwrap(),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(
        &["evaluate", "--config"],
        &[cfg.as_path(), Path::new("--out"), out_dir.as_path()],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("run.report.json")).unwrap()).unwrap();
    assert!((scalar(&report, "recall") - lib_recall).abs() <= 1e-12);
    assert!((scalar(&report, "ap") - lib_ap).abs() <= 1e-12);
    assert!((scalar(&report, "matched_distance") - lib_dist).abs() <= 1e-12);
}

#[test]
fn evaluate_rejects_ranking_without_scores() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("cases.jsonl");
    write_dataset(&ds, &build_cases(4, 2, &Default::default()).unwrap()).unwrap();

    // same request, but the fingerprint now denies confidence scores
    let mut eval = serde_json::to_value(toy_eval_options(2, false)).unwrap();
    eval["fingerprint"]["confidence_scores"] = "unavailable".into();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        serde_json::to_vec_pretty(&serde_json::json!({ "dataset": ds, "eval": eval })).unwrap(),
    )
    .unwrap();

    let out = run(&["evaluate", "--config"], &[cfg.as_path()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("confidence scores unavailable"),
        "unexpected error: {}",
        stderr(&out)
    );
}

#[test]
fn evaluate_requires_a_config() {
    let out = run(&["evaluate"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn toybench_writes_the_artifact_set() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let out = run(
        &[
            "toybench",
            "--cases",
            "12",
            "--seed",
            "4",
            "--sweep",
            "min_samples=10,40",
            "--out",
        ],
        &[out_dir.as_path()],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("multimodal:") && text.contains("mean_point:"), "{text}");

    for name in [
        "multimodal.report.json",
        "mean_point.report.json",
        "multimodal.cases.jsonl",
        "mean_point.cases.jsonl",
        "multimodal.sweep.csv",
        "mean_point.sweep.csv",
        "toybench.summary.json",
    ] {
        assert!(out_dir.join(name).is_file(), "missing artifact {name}");
    }
    let sweep = std::fs::read_to_string(out_dir.join("multimodal.sweep.csv")).unwrap();
    assert!(sweep.starts_with("operating_point,"), "sweep header: {sweep}");
    assert_eq!(sweep.lines().count(), 3, "two sweep points plus the header");

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("toybench.summary.json")).unwrap())
            .unwrap();
    assert!(summary["multimodal"]["recall"].is_number());
    assert!(summary["mean_point"]["conventional_mean_error_multi_root"].is_number());
}

#[test]
fn toybench_resimulation_screens_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let out = run(
        &[
            "toybench",
            "--cases",
            "12",
            "--seed",
            "4",
            "--resimulation",
            "on",
            "--out",
        ],
        &[out_dir.as_path()],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("multimodal.report.json")).unwrap())
            .unwrap();
    assert!(
        report["scalars"]["resimulation_screened"]["value"].is_number(),
        "screen count missing: {report}"
    );
    let flags = report["scalars"]["precision"]["flags"]
        .as_array()
        .cloned()
        .unwrap_or_default();
    assert!(
        !flags.iter().any(|f| f == "fp_count_upper_bound"),
        "precision still flagged as an upper bound: {flags:?}"
    );
}
