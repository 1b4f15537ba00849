use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn craneplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_craneplan")).args(args).output().unwrap()
}

fn plan_free(out: &Path) -> PathBuf {
    let cfg = configs().join("free.toml");
    let o = craneplan(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--ncoll", "30", "plan"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("plan.csv")
}

#[test]
fn obstacle_free_plan_has_header_and_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let plan = plan_free(dir.path());
    let text = std::fs::read_to_string(&plan).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# craneplan config_sha256="));
    assert!(lines.next().unwrap().starts_with("t,"));
    let times: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve_report.json")).unwrap()).unwrap();
    assert!(report["provenance"]["config_sha256"].is_string());
    let t_end = report["result"]["t_end"].as_f64().unwrap();
    let dt = 0.01;
    assert_eq!(times.len(), (t_end / dt - 1e-9).ceil() as usize + 1);
    assert_eq!(times[0], 0.0);
    for w in times.windows(2) {
        assert!((w[1] - w[0] - dt).abs() < 1e-9);
    }
}

#[test]
fn verify_reports_collision_with_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let plan = plan_free(dir.path());
    let clear = craneplan(&[
        "--config",
        configs().join("free.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "verify",
        "--plan",
        plan.to_str().unwrap(),
    ]);
    assert!(clear.status.success(), "{}", String::from_utf8_lossy(&clear.stderr));

    let blocked = dir.path().join("blocked.toml");
    std::fs::write(
        &blocked,
        "[scenario]\nname = \"blocked\"\nstart = [0.3, 0.3, -0.6]\ngoal = [0.7, 0.5, -0.5]\n\
         obstacles = [[0.48, 0.52, 0.0, 0.9, -0.9, -0.2]]\n",
    )
    .unwrap();
    let o = craneplan(&[
        "--config",
        blocked.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "verify",
        "--plan",
        plan.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("collision_report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["collided"], true);
    assert!(report["result"]["min_clearance"].as_f64().unwrap() < 0.0);
}

#[test]
fn malformed_config_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[planner]\nintervalz = 3\n").unwrap();
    let o = craneplan(&["--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "plan"]);
    assert_eq!(o.status.code(), Some(2));
    let o = craneplan(&["--config", "/nonexistent.toml", "--out", dir.path().to_str().unwrap(), "plan"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn goal_inside_obstacle_exits_with_infeasible_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("inside.toml");
    std::fs::write(
        &cfg,
        "[scenario]\nname = \"inside\"\nstart = [0.3, 0.3, -0.6]\ngoal = [0.7, 0.5, -0.5]\n\
         obstacles = [[0.6, 0.8, 0.4, 0.6, -0.9, -0.2]]\n",
    )
    .unwrap();
    let o = craneplan(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "plan"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
