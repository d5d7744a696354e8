//! End-to-end smoke tests of the command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqcore"))
}

#[test]
fn gen_check_solve_bench_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let truth = dir.path().join("truth.json");

    let status = bin()
        .args(["gen", "linear", "--n", "800", "--d", "4", "--seed", "3"])
        .arg("--output")
        .arg(&csv)
        .arg("--truth")
        .arg(&truth)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(csv.exists() && truth.exists());
    let h: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    assert_eq!(h.len(), 4);

    let check = bin()
        .args(["check", "--model", "ridge", "--lambda", "0.01"])
        .arg("--data")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stdout));
    let text = String::from_utf8_lossy(&check.stdout);
    assert!(text.contains("PASS"));
    assert!(!text.contains("FAIL"));

    let solve = bin()
        .args([
            "solve", "--model", "ridge", "--lambda", "0.01", "--method", "seqcore", "--budget",
            "200", "--r", "2.0", "--seed", "5",
        ])
        .arg("--data")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(solve.status.success());
    let result: serde_json::Value = serde_json::from_slice(&solve.stdout).unwrap();
    assert!(result["beta_final"].as_array().unwrap().len() == 4);
    assert!(result["full_loss"].as_f64().unwrap().is_finite());

    let spec = dir.path().join("spec.json");
    let out = dir.path().join("results.jsonl");
    std::fs::write(
        &spec,
        format!(
            r#"{{
              "model": {{"kind": "ridge", "lambda": 0.01}},
              "data": {{"source": "csv", "path": {:?}}},
              "methods": [
                {{"name": "original"}},
                {{"name": "unisamp", "budget": 100}},
                {{"name": "seqcore", "budget": 100, "r": 1.5}}
              ],
              "trials": 2,
              "seed": 11
            }}"#,
            csv.to_str().unwrap()
        ),
    )
    .unwrap();
    let bench = bin()
        .arg("bench")
        .arg(&spec)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(bench.status.success(), "{}", String::from_utf8_lossy(&bench.stderr));
    let lines: Vec<String> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(lines.len(), 6);
    for line in &lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["method"].is_string());
        assert!(v["full_loss"].as_f64().unwrap().is_finite());
    }
}

#[test]
fn audit_reports_pass_on_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    assert!(bin()
        .args(["gen", "linear", "--n", "2000", "--d", "5", "--seed", "9"])
        .arg("--output")
        .arg(&csv)
        .status()
        .unwrap()
        .success());
    let audit = bin()
        .args([
            "audit", "--model", "ridge", "--lambda", "0.01", "--eps", "0.25", "--probes", "40",
            "--sigma-grad", "5.0", "--budget", "400", "--seed", "2",
        ])
        .arg("--data")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(audit.status.success(), "{}", String::from_utf8_lossy(&audit.stderr));
    let v: serde_json::Value = serde_json::from_slice(&audit.stdout).unwrap();
    assert_eq!(v["claim1_holds"], serde_json::Value::Bool(true));
    assert!(v["loss_audit"]["max_rel_loss_dev"].as_f64().unwrap().is_finite());
    assert_eq!(v["coreset_size"].as_u64(), Some(400));
}

#[test]
fn gmm_generation_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("blobs.csv");
    assert!(bin()
        .args([
            "gen", "gmm", "--n", "3000", "--dim", "3", "--k", "3", "--separation", "4", "--seed",
            "7",
        ])
        .arg("--output")
        .arg(&csv)
        .status()
        .unwrap()
        .success());
    let spec = dir.path().join("spec.json");
    let out = dir.path().join("results.jsonl");
    std::fs::write(
        &spec,
        format!(
            r#"{{
              "model": {{"kind": "gmm", "k": 3, "dim": 3}},
              "data": {{"source": "csv", "path": {:?}}},
              "methods": [{{"name": "unisamp", "budget": 300}}, {{"name": "seqcore", "budget": 300, "r": 10.0}}],
              "trials": 1,
              "seed": 3,
              "host": {{"max_iters": 100}}
            }}"#,
            csv.to_str().unwrap()
        ),
    )
    .unwrap();
    let bench = bin().arg("bench").arg(&spec).arg("--output").arg(&out).output().unwrap();
    assert!(bench.status.success(), "{}", String::from_utf8_lossy(&bench.stderr));
    for line in std::fs::read_to_string(&out).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let purity = v["purity"].as_f64().unwrap();
        assert!(purity > 0.9, "purity {purity}");
    }
}
