use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_swimlab"));
    c.env("SWIMLAB_THREADS", "2");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn swimlab(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// The reference scenario with a shorter horizon and the given edits.
fn short_reference(dir: &Path, edit: impl Fn(&mut Value)) -> PathBuf {
    let mut v = read_json(&configs().join("reference.json"));
    v["t_end"] = json!(0.02);
    edit(&mut v);
    let p = dir.join("scenario.json");
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_reference(dir.path(), |v| v["output"] = json!({"snapshot_every": 2}));
    let out = dir.path().join("out");
    let o = swimlab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 5);
    assert!(traj.starts_with("t,z1x,z1y,z1z,z2x"));
    let diag = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().count(), 1 + 4);
    assert!(out.join("snapshot_000000.vtk").exists());
    assert!(out.join("snapshot_000004.vtk").exists());
    assert!(!out.join("violation.json").exists());
    let echoed = fs::read_to_string(out.join("config.json")).unwrap();
    let again = swimlab_core::config::parse_config(&out.join("config.json")).unwrap();
    assert_eq!(again.to_json(), echoed);
    assert!(read_json(&out.join("advisory.json"))["tstar_bound"].is_number());
}

#[test]
fn collision_exits_two_with_violation_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("collision.json");
    let o = swimlab(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let v = read_json(&dir.path().join("violation.json"));
    assert_eq!(v["violation"]["kind"], "Collision");
    assert!(v["step"].as_u64().unwrap() > 0);
}

#[test]
fn invalid_config_exits_one_with_all_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_reference(dir.path(), |v| {
        v["nu"] = json!(-1.0);
        v["swimmer"]["rest_lengths"][0] = json!(0.2);
    });
    let o = swimlab(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("nu must be positive"), "{err}");
    assert!(err.contains("l > 2r"), "{err}");
    let o = swimlab(&["run", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_has_one_row_per_cell_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let run = |values: Value, name: &str| {
        let cfg = short_reference(dir.path(), |v| {
            v["sweep"] = json!({"parameters": [{"path": "/swimmer/stiffness/0", "values": values}], "results": name});
        });
        let o = swimlab(&["sweep", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(dir.path().join(name)).unwrap()
    };
    let a = run(json!([1, 2, 4]), "a.csv");
    let rows: Vec<&str> = a.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    let k: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(k, ["1", "2", "4"]);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("ok")));
    // Permuting the list permutes rows but leaves their contents alone.
    let b = run(json!([4, 1, 2]), "b.csv");
    let tail = |s: &str| s.split_once(',').unwrap().1.to_string();
    let brows: Vec<String> = b.lines().skip(1).map(tail).collect();
    assert_eq!(brows[0], tail(rows[2]));
    assert_eq!(brows[1], tail(rows[0]));
    assert_eq!(brows[2], tail(rows[1]));
}

#[test]
fn sweep_isolates_failing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_reference(dir.path(), |v| {
        v["sweep"] = json!({"parameters": [{"path": "/swimmer/rest_lengths/0", "values": [0.25, 0.1]}]});
    });
    let o = swimlab(&["sweep", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let status: Vec<&str> = csv.lines().skip(1).map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(status, ["ok", "error"]);
}

#[test]
fn picard_and_estimate_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_reference(dir.path(), |_| {});
    let o = swimlab(&["picard", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let p = read_json(&dir.path().join("picard.json"));
    assert_eq!(p["converged"], true);

    let o = swimlab(&["estimate-tstar", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let t: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(t["estimate"]["tstar"]["value"].as_f64().unwrap() > 0.0);
    assert!(t["estimate"]["tstar"]["binding_clause"].is_string());
}

#[test]
fn experiments_write_reports_with_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_reference(dir.path(), |v| v["experiments"] = json!({"lipschitz_trials": 200, "force_bound_samples": 20}));
    for (name, file) in [("lipschitz", "lipschitz"), ("force-bound", "force_bound"), ("contraction", "contraction")] {
        let o = swimlab(&["experiment", name, cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let r = read_json(&dir.path().join(format!("{file}.json")));
        for k in ["experiment", "seed", "constants", "samples", "extremes"] {
            assert!(r.get(k).is_some(), "{name} lacks {k}");
        }
    }
    let o = swimlab(&["experiment", "nonsense", cfg.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn validate_mms_prints_errors_and_ratios() {
    let o = swimlab(&["validate-mms", "--cells", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("space 8^3 L2 error"));
    assert!(text.contains("space 16^3 L2 error"));
    assert!(text.contains("time ratio"));
}
