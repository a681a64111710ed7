use std::path::Path;
use std::process::{Command, Output};

fn crawler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crawler"))
        .args(args)
        .output()
        .unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_owned()
}

/// Minimal CSV reader kept separate from the library's writer.
fn read_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    let rows = lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    (header, rows)
}

#[test]
fn default_run_converges_and_summary_matches_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = crawler(&["--out-dir", &out_arg(dir.path()), "--seed", "7", "--plot"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let (header, rows) = read_rows(&dir.path().join("log.csv"));
    assert_eq!(
        header,
        "step,t_sim_s,x_cm,y_cm,theta_rad,goal_x_cm,goal_y_cm,action_id,cost_cm"
    );
    let num = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();

    let mut dist = 0.0;
    let mut dur = 0.0;
    let mut steps = 0;
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 9);
        assert_eq!(r[0].parse::<usize>().unwrap(), i);
        let cost = (num(r, 2) - num(r, 5)).hypot(num(r, 3) - num(r, 6));
        assert!((cost - num(r, 8)).abs() <= 1e-9);
        if !r[7].is_empty() {
            let next = &rows[i + 1];
            steps += 1;
            dist += (num(next, 2) - num(r, 2)).hypot(num(next, 3) - num(r, 3));
            dur += num(next, 1) - num(r, 1);
        }
    }
    let last = rows.last().unwrap();
    assert!(last[7].is_empty());

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["converged"], true);
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["steps"].as_u64().unwrap() as usize, steps);
    let close = |key: &str, want: f64| {
        let got = summary[key].as_f64().unwrap();
        assert!(
            (got - want).abs() <= 1e-9 * want.abs().max(1.0),
            "{key}: {got} vs {want}"
        );
    };
    close("sim_time_s", num(last, 1));
    close("final_cost_cm", num(last, 8));
    close("mean_step_distance_cm", dist / steps as f64);
    close("mean_step_duration_s", dur / steps as f64);
    assert!(num(last, 8) <= 12.0);

    let svg = std::fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn same_seed_gives_identical_logs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = crawler(&[
            "--scenario",
            "floating",
            "--seed",
            "3",
            "--out-dir",
            &out_arg(d.path()),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("log.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn step_budget_exhaustion_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = crawler(&["--max-steps", "2", "--out-dir", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let (_, rows) = read_rows(&dir.path().join("log.csv"));
    assert_eq!(rows.len(), 3);
}

#[test]
fn errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(
        crawler(&["--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"planner": {"tolerance_cm": -1}}"#).unwrap();
    let out = crawler(&[
        "--config",
        bad.to_str().unwrap(),
        "--out-dir",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tolerance"));

    // Output directory blocked by a plain file.
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = crawler(&["--out-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sub"));

    assert_eq!(crawler(&["--scenario", "orbit"]).status.code(), Some(1));
    assert_eq!(crawler(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let out = crawler(&["--print-config", "--scenario", "floating", "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0));
    let mut config: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(config["scenario"], "floating");
    assert_eq!(config["seed"], 11);

    config["planner"]["tolerance_cm"] = 15.0.into();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, config.to_string()).unwrap();
    let out_dir = dir.path().join("run");
    let out = crawler(&[
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "12",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = read_rows(&out_dir.join("log.csv"));
    assert!(rows.last().unwrap()[8].parse::<f64>().unwrap() <= 15.0);
    let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 12"));
}

#[test]
fn characterize_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = crawler(&[
        "--scenario",
        "characterize",
        "--out-dir",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = read_rows(&dir.path().join("characterization.csv"));
    assert!(header.starts_with("id,heading_offset_deg,samples,configured_mean_cm,mean_cm"));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[2] == "500"));
}

#[test]
fn sweep_writes_one_directory_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = crawler(&[
        "--sweep",
        "3",
        "--seed",
        "20",
        "--transcript",
        "--out-dir",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    for seed in 20..23 {
        let sub = dir.path().join(format!("seed-{seed}"));
        assert!(sub.join("log.csv").is_file());
        let transcript = std::fs::read_to_string(sub.join("transcript.log")).unwrap();
        assert!(transcript.starts_with("0.000 > SMA"));
    }
}
