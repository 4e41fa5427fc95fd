use std::path::Path;
use std::process::{Command, Output};

fn ccl(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccl"))
        .args(args)
        .env("CCL_OUTPUT_ROOT", root)
        .output()
        .unwrap()
}

fn tiny() -> Vec<&'static str> {
    vec![
        "env.kind=point_reach",
        "rollout_steps=50",
        "actor_hidden=[4]",
        "critic_hidden=[4]",
        "epochs=1",
        "eval_episodes=2",
        "iterations=2",
        "checkpoint_every=1",
    ]
}

#[test]
fn usage_errors_exit_with_one() {
    let root = tempfile::tempdir().unwrap();
    assert_eq!(ccl(&[], root.path()).status.code(), Some(1));
    assert_eq!(ccl(&["train", "no_such_key=3"], root.path()).status.code(), Some(1));
    assert_eq!(ccl(&["train", "--iterations", "3"], root.path()).status.code(), Some(1));
    assert_eq!(ccl(&["--help"], root.path()).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_two() {
    let root = tempfile::tempdir().unwrap();
    let missing = root.path().join("missing");
    let out = ccl(&["eval", "--run-dir", missing.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn train_eval_heatmap_round() {
    let root = tempfile::tempdir().unwrap();
    let run = root.path().join("run");
    let run_s = run.to_str().unwrap();
    let mut args = vec!["train", "--quiet", "--run-dir", run_s];
    args.extend(tiny());
    let out = ccl(&args, root.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let trace = root.path().join("trace.csv");
    let out = ccl(
        &[
            "eval",
            "--run-dir",
            run_s,
            "--episodes",
            "3",
            "--trace",
            trace.to_str().unwrap(),
        ],
        root.path(),
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["iteration"], 2);
    assert_eq!(v["returns"].as_array().unwrap().len(), 3);
    assert!(trace.exists());

    let out = ccl(
        &[
            "heatmap",
            "--run-dir",
            run_s,
            "--iterations",
            "1,2",
            "--rollouts",
            "2",
            "--grid",
            "10",
        ],
        root.path(),
    );
    assert!(out.status.success());
    assert!(run.join("heatmap.csv").exists() && run.join("heatmap.svg").exists());

    // Extending the budget continues from the last checkpoint.
    let out = ccl(&["train", "--quiet", "--resume", run_s, "--iterations", "3"], root.path());
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
}

#[test]
fn default_run_directory_lives_under_the_output_root() {
    let root = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--quiet"];
    args.extend(tiny());
    assert!(ccl(&args, root.path()).status.success());
    let dirs: Vec<_> = std::fs::read_dir(root.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(dirs.len(), 1);
    assert!(dirs[0].to_str().unwrap().starts_with("point_reach_ccl_seed0_"));
}

#[test]
fn sweep_trains_every_grid_point() {
    let root = tempfile::tempdir().unwrap();
    let out_dir = root.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--out",
        out_dir.to_str().unwrap(),
        "--grid",
        "mode=none,oem",
        "seeds=[1,2]",
    ];
    args.extend(tiny());
    let out = ccl(&args, root.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}
