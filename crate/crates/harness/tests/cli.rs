use std::process::Command;

fn specsamp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_specsamp")).args(args).output().unwrap()
}

#[test]
fn sweep_prints_csv() {
    let out = specsamp(&["sweep", "--alpha", "0.7", "--k", "3", "--sequences", "500"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "K,mean_ms_per_128,std_ms,efficiency,loop_ms,speedup");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,"));
}

#[test]
fn sweep_reads_cost_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cost.json");
    std::fs::write(&cfg, r#"{"target_ms": 10, "draft_ms": 0, "overhead_ms": 0}"#).unwrap();
    let out = specsamp(&["sweep", "--config", cfg.to_str().unwrap(), "--alpha", "1", "--k", "2", "--sequences", "10"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let speedups: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(speedups, vec![2.0, 3.0]);
}

#[test]
fn verify_reports_json() {
    let out = specsamp(&["verify", "--instances", "6", "--pairs", "200", "--samples", "5000", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["instances"].as_array().unwrap().len(), 6);
}

#[test]
fn train_then_sample() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    std::fs::write(&corpus, "the cat sat on the mat. the dog sat on the log. ".repeat(50)).unwrap();
    let (target, draft) = (dir.path().join("t.json"), dir.path().join("d.json"));
    for (order, path) in [("3", &target), ("1", &draft)] {
        let out = specsamp(&["train", "--corpus", corpus.to_str().unwrap(), "--order", order, "--out", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let base = ["sample", "--model", target.to_str().unwrap(), "--prompt", "the ", "--length", "40", "--method", "greedy"];
    let ars = specsamp(&base);
    let mut with_draft = base.to_vec();
    with_draft.extend(["--draft", draft.to_str().unwrap(), "--k", "3"]);
    let sps = specsamp(&with_draft);
    assert!(ars.status.success() && sps.status.success());
    assert_eq!(ars.stdout, sps.stdout);
    assert!(String::from_utf8(ars.stdout).unwrap().starts_with("the "));
}

#[test]
fn bench_writes_report_and_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    std::fs::write(
        &cfg,
        r#"{"target": {"order": 3, "alpha": 0.01}, "draft": {"order": 2, "alpha": 0.01},
            "num_sequences": 4, "completion_len": 20, "weight_bytes": {"target": 0, "draft": 0}}"#,
    )
    .unwrap();
    let out_path = dir.path().join("report.json");
    let out = specsamp(&[
        "bench", "--config", cfg.to_str().unwrap(), "--k", "2", "--seed", "5", "--method", "nucleus:0.9",
        "--format", "json", "--out", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["config"]["k"], 2);
    assert_eq!(v["config"]["seed"], 5);
    assert_eq!(v["config"]["method"], "nucleus:0.9");
    assert_eq!(v["sps"]["acceptance_rate_per_position"].as_array().unwrap().len(), 2);

    let out = specsamp(&["bench", "--config", cfg.to_str().unwrap(), "--sequences", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_sequences"));
}
