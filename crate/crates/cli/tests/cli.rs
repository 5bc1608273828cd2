use std::path::Path;
use std::process::{Command, Output};

fn objscan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_objscan"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn objscan")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn synth_build_run_eval_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = objscan(&["synth", "--out", ".", "--seed", "3", "--objects", "1", "--room", "3.5"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.join("scene.json").exists());

    let out = objscan(&["db", "build", "--catalog", "catalog/catalog.json", "--out", "db.bin"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = objscan(
        &[
            "run", "--scene", "scene.json", "--db", "db.bin", "--trace", "trace.jsonl", "--result", "result.json",
            "--svg", "top.svg", "--metrics", "--weights", "1.5,1,1",
        ],
        dir,
    );
    assert!(matches!(code(&out), 0 | 2), "{}", stderr(&out));
    let result: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("result.json")).unwrap()).unwrap();
    assert!(result["scans"].as_u64().unwrap() >= 1);
    assert!(!result["curves"].as_array().unwrap().is_empty());
    assert_eq!(result["partial"].as_bool().unwrap(), code(&out) == 2);
    let svg = std::fs::read_to_string(dir.join("top.svg")).unwrap();
    assert!(svg.starts_with("<svg"));

    let out = objscan(
        &["eval", "--scene", "scene.json", "--result", "result.json", "--trace", "trace.jsonl", "--out", "ev"],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("ev/metrics.json")).unwrap()).unwrap();
    assert!(metrics["recognition"]["all"]["recall"].is_number());
    let csv = std::fs::read_to_string(dir.join("ev/coverage.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("step,nbv_scans,r_cover,q_cover"));
    assert_eq!(csv.lines().count() as u64, result["scans"].as_u64().unwrap() + 1);
    assert!(dir.join("ev/rand_index.csv").exists());

    let out = objscan(&["replay", "--trace", "trace.jsonl"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["mismatches"].as_array().unwrap().len(), 0);

    let trace = std::fs::read_to_string(dir.join("trace.jsonl")).unwrap();
    let tampered: Vec<String> = trace
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            if v["event"] == "nbv_decision" {
                v["argmax"] = serde_json::json!(999);
            }
            if v["event"] == "nbo_decision" {
                v["chosen"] = serde_json::json!(999);
            }
            v.to_string()
        })
        .collect();
    assert_ne!(tampered, trace.lines().collect::<Vec<_>>());
    std::fs::write(dir.join("tampered.jsonl"), tampered.join("\n")).unwrap();
    let out = objscan(&["replay", "--trace", "tampered.jsonl"], dir);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_file_takes_precedence_over_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&objscan(&["synth", "--out", ".", "--objects", "1"], dir)), 0);
    std::fs::write(dir.join("bad.toml"), "n_v = 0\n").unwrap();
    std::fs::write(dir.join("db.bin"), b"not a database").unwrap();
    let out = objscan(
        &["run", "--scene", "scene.json", "--db", "db.bin", "--config", "bad.toml", "--n-v", "16"],
        dir,
    );
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("bad.toml"), "{}", stderr(&out));
    let out = objscan(&["run", "--scene", "scene.json", "--db", "db.bin", "--n-v", "16"], dir);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("db.bin"), "{}", stderr(&out));
}

#[test]
fn invalid_inputs_exit_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = objscan(&["run", "--scene", "missing.json", "--db", "missing.bin"], dir);
    assert_eq!(code(&out), 3);
    std::fs::write(dir.join("t.jsonl"), "{\"event\": \"nope\"}\n").unwrap();
    assert_eq!(code(&objscan(&["replay", "--trace", "t.jsonl"], dir)), 3);
    std::fs::write(dir.join("c.json"), "{\"n_p\": \"many\"}").unwrap();
    let out = objscan(&["db", "build", "--catalog", "x.json", "--out", "db.bin", "--config", "c.json"], dir);
    assert_eq!(code(&out), 3);
    assert_eq!(code(&objscan(&["run", "--bogus"], dir)), 3);
    let out = objscan(&["run", "--scene", "s.json", "--db", "d.bin", "--weights", "1,2"], dir);
    assert_eq!(code(&out), 3);
    assert_eq!(code(&objscan(&["--help"], dir)), 0);
}
