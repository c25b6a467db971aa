use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use morphwing::io::schema::{schedule_columns, trajectory_columns};
use morphwing::io::{read_manifest, verify_manifest, MANIFEST_NAME};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_morphwing"));
    c.env_remove("MORPHWING_WORKERS");
    c
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn files_on_disk(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out.sort();
    out
}

fn hashes(dir: &Path) -> BTreeMap<String, String> {
    read_manifest(dir).unwrap().files.into_iter().map(|f| (f.path, f.sha256)).collect()
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_2() {
    let (code, _, err) = run(&["take-off"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn invalid_morphing_switch_exits_2() {
    assert_eq!(run(&["trim", "--morphing", "sometimes"]).0, 2);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let out = blocker.join("run");
    let (code, _, err) = run(&["power-study", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn power_study_run_is_deterministic_and_fully_indexed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let (code, out, err) = run(&["power-study", "--workers", "1", "--out", dir.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        assert_eq!(out.trim(), dir.to_str().unwrap());
    }
    assert_eq!(hashes(&a), hashes(&b));
    let manifest = read_manifest(&a).unwrap();
    let mut listed: Vec<String> = manifest.files.iter().map(|f| f.path.clone()).collect();
    listed.push(MANIFEST_NAME.to_string());
    listed.sort();
    assert_eq!(files_on_disk(&a), listed);
    assert!(verify_manifest(&a, &manifest).is_empty());

    let text = std::fs::read_to_string(a.join("winglet/trajectory.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), trajectory_columns().join(","));
    let text = std::fs::read_to_string(a.join("winglet/schedule.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), schedule_columns().join(","));

    // replay from the snapshot
    let c = tmp.path().join("c");
    let snap = a.join("config.toml");
    let (code, _, err) = run(&["power-study", "--config", snap.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let (mut ha, mut hc) = (hashes(&a), hashes(&c));
    ha.remove("invocation.json");
    hc.remove("invocation.json");
    assert_eq!(ha, hc);
}

#[test]
fn simulate_follows_a_schedule_file_and_dumps_loads() {
    let tmp = tempfile::tempdir().unwrap();
    let sched = tmp.path().join("s.csv");
    // elevator pulse on a 3-point grid
    let names = schedule_columns();
    let row = |t: f64, e: f64| {
        let mut v = vec![t, e, 0.0, 0.0, 0.0, 0.0, 0.0, 4.085312049380685];
        v.truncate(names.len());
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    };
    let text = format!("{}\n{}\n{}\n{}\n", names.join(","), row(0.0, -0.0104), row(0.25, -0.03), row(0.5, -0.0104));
    std::fs::write(&sched, text).unwrap();
    let out = tmp.path().join("run");
    let (code, _, err) = run(&[
        "simulate",
        "--schedule",
        sched.to_str().unwrap(),
        "--dump-loads",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let loads = std::fs::read_to_string(out.join("loads.csv")).unwrap();
    assert_eq!(loads.lines().next().unwrap(), "t,panel_id,fx,fy,fz,gamma");
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["horizon"].as_f64().unwrap(), 0.5);
    assert!(summary["total_work"].as_f64().unwrap() > 0.0);
    let files = files_on_disk(&out);
    for f in ["input_schedule.csv", "schedule.csv", "trajectory.csv", "cost_breakdown.json", "config.toml"] {
        assert!(files.contains(&f.to_string()), "{f} missing from {files:?}");
    }
}

#[test]
fn malformed_scenario_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("bad.toml");
    std::fs::write(&s, "kind = \"barrel_roll\"\n").unwrap();
    let out = tmp.path().join("run");
    assert_eq!(run(&["optimize", "--scenario", s.to_str().unwrap(), "--out", out.to_str().unwrap()]).0, 1);
}
