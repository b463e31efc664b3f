use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn riva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riva")).args(args).output().unwrap()
}

fn corpus(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(rel).display().to_string()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// Compares against `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "help text drifted from {}", path.display());
}

#[test]
fn help_text_is_stable() {
    for (args, name) in [
        (vec!["--help"], "help.txt"),
        (vec!["run", "--help"], "run_help.txt"),
        (vec!["eval", "--help"], "eval_help.txt"),
        (vec!["export", "--help"], "export_help.txt"),
        (vec!["inspect", "--help"], "inspect_help.txt"),
        (vec!["list-tasks", "--help"], "list_tasks_help.txt"),
    ] {
        let out = riva(&args);
        assert_eq!(out.status.code(), Some(0));
        golden(name, &text(&out.stdout));
    }
}

#[test]
fn zero_k_is_a_config_error() {
    let out = riva(&["run", "--scenario", &corpus("scenarios/s1_stale_mapping.json"), "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("k must be ≥ 1"));
}

#[test]
fn bad_selectors_are_config_errors() {
    let s = corpus("scenarios/s1_stale_mapping.json");
    for args in [
        vec!["run", "--scenario", s.as_str(), "--fault", "disk"],
        vec!["run", "--scenario", s.as_str(), "--agent", "gpt"],
        vec!["run", "--scenario", s.as_str(), "--backend", "ollama"],
        vec!["run", "--scenario", "/nonexistent.json"],
        vec!["run"],
    ] {
        let out = riva(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn http_backend_without_a_key_names_the_variable() {
    let out = riva(&[
        "run",
        "--scenario",
        &corpus("scenarios/s3_checkout_errors.json"),
        "--backend",
        "http:http://127.0.0.1:9/v1",
        "--api-key-env",
        "RIVA_TEST_KEY_THAT_IS_UNSET",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("RIVA_TEST_KEY_THAT_IS_UNSET"));
}

fn run_dir(out: &Path, task: &str, agent: &str, condition: &str) -> PathBuf {
    out.join("runs").join(task).join(agent).join(condition).join("0")
}

#[test]
fn run_writes_artifacts_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("first");
    let out = riva(&[
        "run",
        "--scenario",
        &corpus("scenarios/s1_stale_mapping.json"),
        "--agent",
        "riva",
        "--k",
        "2",
        "--fault",
        "get_logs",
        "--backend",
        &format!("scripted:{}", corpus("scripts/s1_reprompt.json")),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["success"], true);
    assert_eq!(report["agent"], "riva-k2");
    let first = run_dir(&out_dir, "s1-stale-mapping", "riva-k2", "get_logs");

    let replay_dir = dir.path().join("replay");
    let out = riva(&[
        "run",
        "--scenario",
        &corpus("scenarios/s1_stale_mapping.json"),
        "--fault",
        "get_logs",
        "--backend",
        &format!("replay:{}", first.join("trajectory.json").display()),
        "--out",
        replay_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let second = run_dir(&replay_dir, "s1-stale-mapping", "riva-k2", "get_logs");
    for f in ["trajectory.json", "history.json"] {
        assert_eq!(
            std::fs::read_to_string(first.join(f)).unwrap(),
            std::fs::read_to_string(second.join(f)).unwrap(),
            "{f}"
        );
    }

    let out = riva(&["inspect", first.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let shown = text(&out.stdout);
    assert!(shown.contains("success=true"));
    assert!(shown.contains("send_message"));
}

#[test]
fn strict_turns_a_scored_failure_into_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let args = |strict: bool| {
        let mut a = vec![
            "run".to_string(),
            "--scenario".into(),
            corpus("scenarios/s3_checkout_errors.json"),
            "--agent".into(),
            "react".into(),
            "--fault".into(),
            "get_logs".into(),
            "--out".into(),
            dir.path().display().to_string(),
        ];
        if strict {
            a.push("--strict".into());
        }
        a
    };
    let lax: Vec<String> = args(false);
    let out = riva(&lax.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(0));
    let strict: Vec<String> = args(true);
    let out = riva(&strict.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_export_and_list() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("suite");
    let out = riva(&[
        "eval",
        "--suite",
        &corpus("suites/default.json"),
        "--seeds",
        "7,8",
        "--workers",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let aggregate: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("aggregate.json")).unwrap()).unwrap();
    // 7 scenarios x 2 agents x 4 conditions x 2 seeds.
    assert_eq!(aggregate["runs"].as_array().unwrap().len(), 112);
    assert_eq!(aggregate["conditions"].as_array().unwrap().len(), 8);

    let cdf = dir.path().join("cdf.csv");
    let out = riva(&[
        "export",
        "--report",
        out_dir.join("aggregate.json").to_str().unwrap(),
        "--format",
        "cdf-csv",
        "--out",
        cdf.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&cdf).unwrap(), std::fs::read_to_string(out_dir.join("cdf.csv")).unwrap());

    let out = riva(&["list-tasks", "--suite", &corpus("suites/default.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout).lines().filter(|l| !l.starts_with(' ')).count(), 7);
}
