use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn pcmorl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcmorl")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = pcmorl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    pcmorl(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A run config small enough to train in seconds.
fn small_config(dir: &Path, env: &str) -> PathBuf {
    let path = dir.join(format!("{env}.json"));
    let cfg = serde_json::json!({
        "env": env,
        "train": { "n_envs": 4, "horizon": 32, "iterations": 2, "epochs_per_iter": 1, "minibatches": 2, "checkpoint_every": 5 },
        "network": { "encoder_hidden": [16], "latent_dim": 8, "expert_hidden": [16], "critic_hidden": [16] },
        "output_dir": s(&dir.join("unused")),
    });
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn untrained(dir: &Path, env: &str) -> PathBuf {
    let cfg = small_config(dir, env);
    let out = dir.join(format!("{env}-untrained"));
    ok(&["train", "--config", s(&cfg), "--iterations", "0", "--out", s(&out)]);
    out.join("checkpoint.json")
}

#[test]
fn train_writes_checkpoint_metrics_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "upright");
    let out = dir.path().join("run");
    ok(&["train", "--env", "upright", "--config", s(&cfg), "--iterations", "10", "--seed", "7", "--out", s(&out)]);
    let log = fs::read_to_string(out.join("metrics.ndjson")).unwrap();
    let records: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 10);
    assert_eq!(records[9]["iteration"], 10);
    for f in ["checkpoint.json", "ckpt_000005.json", "ckpt_000010.json", "config.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let resolved: Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 7);
    assert_eq!(resolved["train"]["iterations"], 10);
}

#[test]
fn same_seed_gives_identical_metric_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "glide");
    let logs: Vec<String> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            ok(&["train", "--config", s(&cfg), "--iterations", "3", "--seed", "11", "--out", s(&out)]);
            fs::read_to_string(out.join("metrics.ndjson")).unwrap()
        })
        .collect();
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn bad_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&["train", "--config", s(&missing)]), 2);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"env":"upright","train":{"clip_epsilon":0.2}}"#).unwrap();
    let out = pcmorl(&["train", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("clip_epsilon"));

    fs::write(&bad, r#"{"env":"upright","train":{"gamma":1.5}}"#).unwrap();
    let out = pcmorl(&["train", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.gamma"));
}

#[test]
fn diverging_training_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "upright");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["train"]["learning_rate"] = serde_json::json!(1e30);
    v["train"]["max_grad_norm"] = serde_json::json!(1e30);
    fs::write(&cfg, v.to_string()).unwrap();
    let out = pcmorl(&["train", "--config", s(&cfg), "--iterations", "5", "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("training aborted"));
}

#[test]
fn eval_prints_one_deterministic_row() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = untrained(dir.path(), "upright");
    let args = ["eval", "--ckpt", s(&ckpt), "--pref", "0.5,0.5", "--episodes", "100", "--seed", "4"];
    let first = ok(&args);
    let row: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(row["episodes"], 100);
    assert_eq!(row["lambda1"], 0.5);
    assert!(row["success_rate"].as_f64().unwrap() <= 0.05);
    assert_eq!(first, ok(&args));
}

#[test]
fn checkpoint_env_mismatch_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = untrained(dir.path(), "upright");
    assert_eq!(code(&["eval", "--ckpt", s(&ckpt), "--env", "glide"]), 2);
    assert_eq!(code(&["eval", "--ckpt", s(&dir.path().join("missing.json"))]), 2);
    fs::write(dir.path().join("junk.json"), "{}").unwrap();
    assert_eq!(code(&["sweep", "--ckpt", s(&dir.path().join("junk.json"))]), 2);
}

#[test]
fn sweep_grid_and_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = untrained(dir.path(), "glide");
    let csv = dir.path().join("sweep.csv");
    ok(&["sweep", "--ckpt", s(&ckpt), "--points", "5", "--episodes", "3", "--out", s(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "lambda1,lambda2,obj1_return,obj2_return,task_return,avg_stride,traj_deviation,episodes"
    );
    let lambda1: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(lambda1, vec![1.0, 0.75, 0.5, 0.25, 0.0]);

    let m: Value = serde_json::from_str(&ok(&["metrics", s(&csv), "--flip", "traj_deviation", "--objectives", "avg_stride,traj_deviation"])).unwrap();
    assert!(m["hypervolume"].as_f64().unwrap() >= 0.0);
    assert!(m["pareto_points"].as_u64().unwrap() >= 1);

    let two = dir.path().join("two.csv");
    ok(&["sweep", "--ckpt", s(&ckpt), "--points", "2", "--episodes", "1", "--out", s(&two)]);
    let rows: Vec<String> = fs::read_to_string(&two).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("1,0,") && rows[1].starts_with("0,1,"), "{rows:?}");
}

fn write_csv(dir: &Path, rows: &[[f64; 2]]) -> PathBuf {
    let path = dir.join("hand.csv");
    let mut text = String::from("lambda1,lambda2,obj1_return,obj2_return,task_return,avg_stride,traj_deviation,episodes\n");
    for r in rows {
        text.push_str(&format!("0.5,0.5,{},{},0,0,0,1\n", r[0], r[1]));
    }
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn metrics_hand_cases() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path(), &[[1.0, 2.0], [2.0, 1.0], [1.0, 1.0]]);
    let m: Value = serde_json::from_str(&ok(&["metrics", s(&csv), "--ref", "0,0"])).unwrap();
    assert_eq!(m["hypervolume"], 3.0);
    assert_eq!(m["pareto_points"], 2);
    assert_eq!(m["sparsity"], 2.0);

    let single = write_csv(dir.path(), &[[1.0, 2.0]]);
    let m: Value = serde_json::from_str(&ok(&["metrics", s(&single), "--ref", "0,0"])).unwrap();
    assert_eq!(m["sparsity"], 0.0);

    // negating obj2 turns (1,-2), (2,-1) into a chain: only (2,-1) survives
    let csv = write_csv(dir.path(), &[[1.0, 2.0], [2.0, 1.0]]);
    let m: Value = serde_json::from_str(&ok(&["metrics", s(&csv), "--flip", "obj2_return", "--ref", "0,-3"])).unwrap();
    assert_eq!(m["pareto_points"], 1);
    assert_eq!(m["front"][0], serde_json::json!([2.0, -1.0]));

    assert_eq!(code(&["metrics", s(&csv), "--objectives", "obj1_return,speed"]), 2);
    assert_eq!(code(&["metrics", s(&csv), "--flip", "speed"]), 2);
}

#[test]
fn train_fixed_reports_both_policies() {
    let dir = tempfile::tempdir().unwrap();
    let conditioned = untrained(dir.path(), "upright");
    let cfg = small_config(dir.path(), "upright");
    let out = dir.path().join("fixed");
    let text = ok(&[
        "train-fixed", "--config", s(&cfg), "--pref", "1,0", "--iterations", "2", "--out", s(&out),
        "--ckpt", s(&conditioned), "--episodes", "4",
    ]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["preference"], serde_json::json!([1.0, 0.0]));
    assert_eq!(v["fixed"]["lambda1"], 1.0);
    assert_eq!(v["conditioned"]["episodes"], 4);
    let resolved: Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["train"]["fixed_preference"], serde_json::json!([1.0, 0.0]));
    assert!(out.join("comparison.json").is_file());
}

#[test]
fn switch_at_horizon_matches_eval() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = untrained(dir.path(), "upright");
    let demo: Value =
        serde_json::from_str(&ok(&["switch-demo", "--ckpt", s(&ckpt), "--t-switch", "500", "--seed", "2"])).unwrap();
    let steps = demo["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 500);
    assert!(steps.iter().all(|st| st["lambda"] == serde_json::json!([0.0, 1.0])));
    let task: f64 = steps.iter().map(|st| st["task"].as_f64().unwrap()).sum();
    let row: Value =
        serde_json::from_str(&ok(&["eval", "--ckpt", s(&ckpt), "--pref", "0,1", "--episodes", "1", "--seed", "2"])).unwrap();
    assert_eq!(task, row["task_return"].as_f64().unwrap());

    assert_eq!(code(&["switch-demo", "--ckpt", s(&ckpt), "--t-switch", "0"]), 2);
}

#[test]
fn serve_on_a_busy_port_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = untrained(dir.path(), "upright");
    let busy = std::net::TcpListener::bind("0.0.0.0:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    assert_eq!(code(&["serve", "--ckpt", s(&ckpt), "--port", &port]), 2);
}
