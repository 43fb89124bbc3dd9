use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn simulate(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_simulate"));
    cmd.args(args).env("RUST_LOG", "off").env_remove("SIM_OUTPUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("SIM_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn taylor_green_reference_run_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "tg.json", r#"{"scenario": "taylor_green", "snapshots": true}"#);
    let out = dir.path().join("out");
    let o = simulate(&["run", &cfg, "--output", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS Taylor-Green analytic decay"));

    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,energy,weighted_energy,enstrophy,max_grad_v,smallness_integral,picard_iters,div_residual"
    );
    // t = 0 plus one row per 10 steps
    assert_eq!(lines.count(), 11);
    let last: Vec<f64> = traj.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let e0: f64 = traj.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let expected = e0 * (-4.0 * 0.1 * last[0]).exp();
    assert!((last[1] - expected).abs() / expected <= 1e-4);

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(out.join("report.csv").exists());
    assert!(!out.join("markers.csv").exists(), "no interface for constant density");
    let snap = out.join("snapshots");
    let v = lagflow::Snapshot::<f64>::load(snap.join("velocity_000100.txt")).unwrap();
    assert_eq!(v.kind(), "vector");
    let fm = lagflow::FlowMap::<f64>::load(&snap, "flow_map_000100").unwrap();
    assert!((fm.time() - 1.0).abs() < 1e-12);
}

#[test]
fn large_jump_surfaces_picard_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "disk.json",
        r#"{"scenario": "density_disk", "grid": {"n": 32},
            "physics": {"nu": 0.1, "density": {"kind": "disk", "m": 1.0, "jump": 2.0}},
            "snapshots": false}"#,
    );
    let out = dir.path().join("out");
    let o = simulate(&["run", &cfg, "--output", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("Picard iteration did not converge"), "{err}");
    assert!(err.contains("jump_ratio 2 exceeds jump_cap 0.5 — see smallness condition den-str"), "{err}");
}

#[test]
fn density_disk_writes_markers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "disk.json",
        r#"{"scenario": "density_disk", "grid": {"n": 32}, "time": {"dt": 0.02, "T": 0.2, "report_every": 5},
            "snapshots": false}"#,
    );
    let out = dir.path().join("out");
    let o = simulate(&["run", &cfg, "--output", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let markers = std::fs::read_to_string(out.join("markers.csv")).unwrap();
    assert_eq!(markers.lines().next(), Some("t,index,x1,x2"));
    // three report times, 256 markers each
    assert_eq!(markers.lines().count(), 1 + 3 * 256);
    assert!(!out.join("snapshots").exists());
}

#[test]
fn malformed_configs_exit_one() {
    let dir = TempDir::new().unwrap();
    let neg = write_config(&dir, "neg.json", r#"{"scenario": "taylor_green", "time": {"dt": -0.01, "T": 1}}"#);
    let o = simulate(&["run", &neg], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("time.dt"));

    let typo = write_config(&dir, "typo.json", "{\"scenario\": \"taylor_green\",\n \"grdi\": {}}");
    let o = simulate(&["validate", &typo], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = simulate(&["run", dir.path().join("missing.json").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(simulate(&["frobnicate"], None).status.code(), Some(1));
}

#[test]
fn validate_lists_citations() {
    let dir = TempDir::new().unwrap();
    let tg = write_config(&dir, "tg.json", r#"{"scenario": "taylor_green"}"#);
    let o = simulate(&["validate", &tg], None);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("energy equality (Lemma 1.1)"));
    assert!(s.contains("decay bound (eq. e2)"));

    let tw = write_config(&dir, "tw.json", r#"{"scenario": "twisted_divergence_demo"}"#);
    assert!(stdout(&simulate(&["validate", &tw], None)).contains("fixed point contraction (Lemma 7.3)"));
}

#[test]
fn custom_without_checks_warns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "custom.json",
        r#"{"scenario": "custom", "grid": {"n": 16}, "physics": {"nu": 0.5},
            "time": {"dt": 0.1, "T": 1, "report_every": 2},
            "initial_velocity": {"kind": "shear", "amplitude": 1}, "checks": []}"#,
    );
    let o = simulate(&["validate", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("  - "));
    assert!(stderr(&o).contains("warning: no checks enabled"));
}

#[test]
fn output_dir_falls_back_to_env() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "tg.json",
        r#"{"scenario": "taylor_green", "grid": {"n": 16}, "time": {"dt": 0.05, "T": 0.1, "report_every": 1},
            "checks": ["energy_equality"], "snapshots": false}"#,
    );
    let env_dir = dir.path().join("from_env");
    let o = simulate(&["run", &cfg], Some(&env_dir));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(env_dir.join("trajectory.csv").exists());
}

#[test]
fn single_thread_runs_are_bitwise_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "rand.json",
        r#"{"scenario": "custom", "grid": {"n": 32}, "physics": {"nu": 0.05,
              "density": {"kind": "rectangle", "m": 1.0, "jump": 0.2, "lo": [1.0, 1.0], "hi": [3.0, 2.5]}},
            "time": {"dt": 0.02, "T": 0.2, "report_every": 1}, "seed": 11,
            "initial_velocity": {"kind": "random", "amplitude": 0.3, "k_max": 4}, "snapshots": false}"#,
    );
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = simulate(&["run", &cfg, "--threads", "1", "--output", out.to_str().unwrap()], None);
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
        runs.push(std::fs::read(out.join("trajectory.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn stokes_scaling_probe_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "s.json",
        r#"{"scenario": "stokes_scaling", "grid": {"n": 16}, "time": {"dt": 0.02, "T": 0.4}, "samples": 3}"#,
    );
    let out = dir.path().join("out");
    let o = simulate(&["run", &cfg, "--output", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = std::fs::read_to_string(out.join("scaling.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 9);
}
