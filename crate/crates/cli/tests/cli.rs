use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BSC: &str = r#"{
  "channel": [[0.9, 0.1], [0.1, 0.9]],
  "input_dist": [0.48, 0.52],
  "rate_grid": {"start": 0.0, "stop": 0.6, "step": 0.025},
  "seed": 7
}"#;

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_softcover"));
    cmd.args(args).env_remove("SOFTCOVER_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parsed CSV: header and rows of fields.
fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn exponents_bsc_curve() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bsc.json", BSC);
    let out = dir.path().join("curve.csv");
    let o = run(&["exponents", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let (header, rows) = read_csv(&out);
    assert_eq!(header[..5], ["rate", "e_c", "e_a", "alpha_star", "s_star"]);
    assert_eq!(rows.len(), 25);
    let (rate, ec, ea) = (col(&rows, 0), col(&rows, 1), col(&rows, 2));
    for i in 0..rows.len() {
        assert!(ec[i] <= ea[i] + 1e-6);
        if rate[i] >= 0.55 {
            assert!(ec[i] <= 1e-3 && ea[i] <= 1e-3);
        }
        if rate[i] <= 0.45 {
            assert!(ec[i] > 1e-3 && ea[i] > 1e-3);
        }
    }
    assert!(ec.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    assert!(ea.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    // E_c(0.25) is positive and below E_a(0.25).
    assert!(ec[10] > 0.0 && ec[10] <= ea[10]);
}

#[test]
fn output_is_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "bsc.json",
        &BSC.replace("\"stop\": 0.6", "\"stop\": 0.3").replace("0.025", "0.1"),
    );
    let paths: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("c{i}.csv"))).collect();
    for (p, threads) in paths.iter().zip(["1", "2", "4"]) {
        let o = run(
            &["exponents", "--config", s(&cfg), "--out", s(p)],
            &[("SOFTCOVER_THREADS", threads)],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let first = std::fs::read(&paths[0]).unwrap();
    for p in &paths[1..] {
        assert_eq!(std::fs::read(p).unwrap(), first);
    }
}

#[test]
fn identity_channel_uniform_target() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "id.json",
        r#"{"channel": [[1, 0], [0, 1]], "target_output": [0.5, 0.5],
            "rate_grid": {"start": 0, "stop": 0, "step": 0.1}}"#,
    );
    let out = dir.path().join("id.csv");
    let o = run(&["exponents", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 1);
    assert!((col(&rows, 2)[0] - 1.0).abs() <= 5e-3);
}

#[test]
fn rates_above_information_give_zero_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "high.json",
        &BSC.replace("\"start\": 0.0, \"stop\": 0.6", "\"start\": 0.6, \"stop\": 0.8")
            .replace("0.025", "0.1"),
    );
    let out = dir.path().join("high.csv");
    let o = run(&["exponents", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 3);
    assert!(col(&rows, 1).iter().chain(&col(&rows, 2)).all(|&v| v == 0.0));
}

#[test]
fn config_errors_exit_2_with_field() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("never.csv");
    let cases = [
        (BSC.replace("[0.9, 0.1]", "[0.9, 0.2]"), "channel[0]"),
        (BSC.replace("\"step\": 0.025", "\"step\": -1"), "rate_grid.step"),
        (
            BSC.replace("\"seed\": 7", "\"seed\": 7, \"target_output\": [0.5, 0.5]"),
            "exactly one",
        ),
        (BSC.replace("\"seed\": 7", "\"seed\": \"seven\""), "line 5"),
        (BSC.replace("\"seed\": 7", "\"sed\": 7"), "sed"),
        (
            BSC.replace("\"seed\": 7", "\"resolutions\": {\"qx\": 4}"),
            "resolutions.qx",
        ),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write_config(&dir, &format!("bad{i}.json"), text);
        let o = run(&["exponents", "--config", s(&cfg), "--out", s(&out)], &[]);
        assert_eq!(code(&o), 2, "case {i}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "case {i}: {}", stderr(&o));
    }
    let o = run(&["exponents", "--config", "/nonexistent.json", "--out", s(&out)], &[]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn unreachable_target_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "inf.json",
        r#"{"channel": [[1, 0, 0], [0, 1, 0]], "target_output": [0.3, 0.3, 0.4],
            "rate_grid": {"start": 0, "stop": 0.2, "step": 0.1}}"#,
    );
    let out = dir.path().join("inf.csv");
    let o = run(&["exponents", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("not reachable"), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = run(&["verify", "--suite", "binomial"], &[("SOFTCOVER_THREADS", "zero")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("SOFTCOVER_THREADS"));
}

#[test]
fn simulate_disabled_is_a_no_op() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bsc.json", BSC);
    let out = dir.path().join("sim.csv");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("disabled"));
    assert!(!out.exists());
}

#[test]
fn simulate_writes_rows_per_blocklength() {
    let dir = TempDir::new().unwrap();
    let text = BSC
        .replace("\"start\": 0.0, \"stop\": 0.6", "\"start\": 0.25, \"stop\": 0.25")
        .replace(
            "\"seed\": 7",
            "\"seed\": 7, \"sim\": {\"n_list\": [4, 8], \"trials\": 6, \"enabled\": true}",
        );
    let cfg = write_config(&dir, "sim.json", &text);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["simulate", "--config", s(&cfg), "--out", s(p)], &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (header, rows) = read_csv(&a);
    assert_eq!(header[..5], ["rate", "e_c", "e_a", "alpha_star", "s_star"]);
    assert_eq!(rows.len(), 2);
    let n = header.iter().position(|h| h == "n").unwrap();
    let tv = header.iter().position(|h| h == "mean_tv").unwrap();
    assert_eq!(col(&rows, n), vec![4.0, 8.0]);
    assert!(col(&rows, tv).iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn simulate_over_budget_exits_3() {
    let dir = TempDir::new().unwrap();
    let text = BSC
        .replace("\"start\": 0.0, \"stop\": 0.6", "\"start\": 0.25, \"stop\": 0.25")
        .replace(
            "\"seed\": 7",
            "\"seed\": 7, \"sim\": {\"n_list\": [30], \"trials\": 1, \"enabled\": true}",
        );
    let cfg = write_config(&dir, "big.json", &text);
    let out = dir.path().join("big.csv");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("budget"));
}

#[test]
fn renyi_column_rises_to_mutual_information() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bsc.json", BSC);
    let out = dir.path().join("renyi.csv");
    let o = run(
        &["renyi", "--config", s(&cfg), "--alphas", "0.5:0.99:0.01", "--out", s(&out)],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["alpha", "renyi_mi"]);
    assert_eq!(rows.len(), 50);
    let v = col(&rows, 1);
    assert!(v.windows(2).all(|w| w[1] >= w[0]));
    assert!((v[49] - 0.5303).abs() < 5e-3, "{}", v[49]);

    let o = run(
        &["renyi", "--config", s(&cfg), "--alphas", "0.5-0.9", "--out", s(&out)],
        &[],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_single_suite() {
    let o = run(&["verify", "--suite", "binomial"], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS binomial"), "{}", stdout(&o));
    let o = run(&["verify", "--suite", "no_such_suite"], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn figure1_writes_csv_and_svg() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("fig");
    let o = run(&["figure1", "--out-dir", s(&target)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&target.join("figure1.csv"));
    assert_eq!(header[..5], ["rate", "e_c", "e_a", "alpha_star", "s_star"]);
    assert_eq!(rows.len(), 25);
    let svg = std::fs::read_to_string(target.join("figure1.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("R (bits)") && svg.contains("exponent (bits)"));
    assert_eq!(std::fs::read_dir(&target).unwrap().count(), 2);
}
