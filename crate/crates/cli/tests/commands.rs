use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn slackpack(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slackpack")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn golden_run_reaches_t0_115() {
    let d = tempfile::tempdir().unwrap();
    let o = slackpack(&["run", "--kind", "square", "--n0", "34", "--gamma", "10/7", "--max", "83", "--layout", "--out", "g"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&d.path().join("g/summary.json"));
    assert_eq!(s["summary"]["t0"], 115);
    assert_eq!(s["summary"]["status"], "Completed");
    assert!(s["summary"]["sigma_hat"].is_number());
    assert!(d.path().join("g/layout.json").exists());
    let csv = fs::read_to_string(d.path().join("g/critical_events.csv")).unwrap();
    assert!(csv.starts_with("# critical_events v1\nt,s_lrp,s_norm1,s_norm2,s_ep1,s_ep2,s_com,ratio,max_w\n"));
    assert_eq!(csv.lines().count(), 2 + 13);
}

#[test]
fn gamma_must_be_rational_and_in_range() {
    let d = tempfile::tempdir().unwrap();
    let o = slackpack(&["run", "--gamma", "1.6", "--out", "a"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rational"));
    let o = slackpack(&["run", "--gamma", "8/5", "--out", "b"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("outside"));
    let o = slackpack(&["run", "--gamma", "8/5", "--allow-gamma-out-of-range", "--n0", "1000", "--max", "2000", "--out", "c"], d.path());
    assert_ne!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn step4_failure_exits_with_2() {
    let d = tempfile::tempdir().unwrap();
    let o = slackpack(&["run", "--n0", "10", "--max", "1000", "--out", "f"], d.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(json(&d.path().join("f/summary.json"))["summary"]["status"], "FailedStep4");
}

#[test]
fn size_guard_needs_big() {
    let d = tempfile::tempdir().unwrap();
    let o = slackpack(&["run", "--max", "300000000", "--out", "x"], d.path());
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("GiB") && e.contains("--big"));
    assert!(!d.path().join("x").exists());
}

#[test]
fn stop_and_resume_matches_uninterrupted_run() {
    let d = tempfile::tempdir().unwrap();
    let base = ["run", "--n0", "1000", "--max", "200000", "--stats-stride", "1000"];
    let full = slackpack(&[&base[..], &["--out", "full"]].concat(), d.path());
    assert_eq!(full.status.code(), Some(0));
    let part = slackpack(&[&base[..], &["--out", "part", "--stop-at", "77777"]].concat(), d.path());
    assert_eq!(part.status.code(), Some(0));
    assert_eq!(json(&d.path().join("part/summary.json"))["summary"]["status"], "BudgetExhausted");
    let rest = slackpack(&["run", "--resume", "--out", "part"], d.path());
    assert_eq!(rest.status.code(), Some(0), "{}", stderr(&rest));
    for f in ["critical_events.csv", "snapshots.csv", "summary.json"] {
        assert_eq!(fs::read(d.path().join("full").join(f)).unwrap(), fs::read(d.path().join("part").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn appendix_without_samples_has_empty_mc_columns() {
    let d = tempfile::tempdir().unwrap();
    let o = slackpack(&["appendix", "--gamma", "4/3", "--t", "1e4,1e6,1e8", "--samples", "0"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(2).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let mut prev = 0.0;
    for r in &rows {
        assert_eq!(r.len(), 8);
        assert!(r[4].is_empty() && r[5].is_empty());
        let ratio: f64 = r[6].parse().unwrap();
        assert!(ratio > prev && ratio < 7.0 / 9.0);
        prev = ratio;
        assert!(r[2].parse::<f64>().is_ok() && r[3].parse::<f64>().is_ok());
    }
}

#[test]
fn appendix_records_row_errors_and_continues() {
    let d = tempfile::tempdir().unwrap();
    let o = slackpack(&["appendix", "--gamma", "10/7", "--t", "0.5,1e6", "--samples", "2000", "--out", "a.csv"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(d.path().join("a.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[2].ends_with(|c: char| c.is_alphanumeric()) && lines[2].contains("t must exceed 1"));
    let cells: Vec<&str> = lines[3].split(',').collect();
    assert!(cells[4].parse::<f64>().is_ok() && cells[7].is_empty());
}

#[test]
fn sweep_isolates_failing_cells() {
    let d = tempfile::tempdir().unwrap();
    let o = slackpack(
        &["sweep", "--kinds", "rect,square", "--n0s", "500", "--gammas", "4/3,8/5", "--max", "5000", "--out", "s"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let index = json(&d.path().join("s/index.json"));
    let cells = index.as_array().unwrap();
    assert_eq!(cells.len(), 4);
    for c in cells {
        let ok = c["gamma"] == "4/3";
        assert_eq!(c["error"].is_null(), ok);
        assert_eq!(d.path().join("s").join(c["dir"].as_str().unwrap()).join("summary.json").exists(), ok);
    }
}

#[test]
fn sweep_is_deterministic_across_execution_modes() {
    let d = tempfile::tempdir().unwrap();
    let args = ["sweep", "--kinds", "rect,square", "--n0s", "300,400", "--max", "20000"];
    assert_eq!(slackpack(&[&args[..], &["--out", "p"]].concat(), d.path()).status.code(), Some(0));
    assert_eq!(slackpack(&[&args[..], &["--out", "q", "--sequential"]].concat(), d.path()).status.code(), Some(0));
    let index = json(&d.path().join("p/index.json"));
    assert_eq!(index.as_array().unwrap().len(), 4);
    for c in index.as_array().unwrap() {
        let name = c["dir"].as_str().unwrap();
        let a = fs::read(d.path().join("p").join(name).join("critical_events.csv")).unwrap();
        let b = fs::read(d.path().join("q").join(name).join("critical_events.csv")).unwrap();
        assert_eq!(a, b, "{name}");
    }
    assert_eq!(fs::read(d.path().join("p/index.json")).unwrap(), fs::read(d.path().join("q/index.json")).unwrap());
}

#[test]
fn render_and_verify_a_saved_layout() {
    let d = tempfile::tempdir().unwrap();
    let o = slackpack(&["run", "--kind", "square", "--n0", "34", "--gamma", "10/7", "--max", "83", "--layout", "--out", "g"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let o = slackpack(&["render", "--layout-file", "g/layout.json", "--out", "g.svg"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let svg = fs::read_to_string(d.path().join("g.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="detail""#).count(), 83);
    let o = slackpack(&["verify", "--layout-file", "g/layout.json", "--run-dir", "g", "--out", "v.json"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let v = json(&d.path().join("v.json"));
    assert_eq!(v["passed"], true);
    assert_eq!(v["layout"]["rect_count"], 83 + 96 + 1);
}

#[test]
fn verify_runs_each_algorithm() {
    let d = tempfile::tempdir().unwrap();
    for alg in ["slack", "paulhus", "stack"] {
        let o = slackpack(&["verify", "--algorithm", alg, "--n0", "200", "--max", "3000"], d.path());
        assert_eq!(o.status.code(), Some(0), "{alg}: {}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn stats_reads_a_run_directory() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(slackpack(&["run", "--n0", "1000", "--max", "100000", "--stats-stride", "1000", "--out", "r"], d.path()).status.code(), Some(0));
    let o = slackpack(&["stats", "r"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["summary"]["status"], "Completed");
    assert!(v["shape_bound"]["pass"].as_bool().unwrap());
    assert!((v["ep2_reference"].as_f64().unwrap() - 7.0 / 9.0).abs() < 1e-12);
}
