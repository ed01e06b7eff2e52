use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn pneumann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pneumann")).args(args).output().unwrap()
}

fn config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const Q50: &str = "# steep prototype\np = 2\nq = 50\nR1 = 0\nR2 = 1\nN = 1\n";

#[test]
fn solve_writes_one_profile_per_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "a.cfg", Q50);
    let out = dir.path().join("out");
    let run = pneumann(&["solve", "--config", s(&cfg), "--jmax", "2", "--out", s(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let mut names: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["solution_j1_unique.csv", "solution_j2_unique.csv", "solutions.csv"]);

    let summary = std::fs::read_to_string(out.join("solutions.csv")).unwrap();
    let mut lines = summary.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("# pneumann ") && head.contains("solve") && head.contains("q = 50"));
    assert!(lines.next().unwrap().starts_with("# C0 = "));
    assert_eq!(lines.next().unwrap(), "j,branch,d,u0,uR2,boundary_residual,min_u");
    assert_eq!(lines.count(), 2);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "a.cfg", Q50);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let run = pneumann(&["solve", "--threads", threads, "--config", s(&cfg), "--jmax", "2", "--out", s(out)]);
        assert!(run.status.success());
    }
    for name in ["solutions.csv", "solution_j1_unique.csv", "solution_j2_unique.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn below_onset_reports_no_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "a.cfg", Q50);
    let out = dir.path().join("out");
    let base = ["solve", "--config", s(&cfg), "--set", "q=10", "--jmax", "1", "--out", s(&out)];
    assert_eq!(pneumann(&base).status.code(), Some(0));
    let mut strict = base.to_vec();
    strict.push("--require-solution");
    let run = pneumann(&strict);
    assert_eq!(run.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&run.stderr).contains("no solution"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = config(&dir, "bad.cfg", "p = 2\nq = 5\nR1 = 1\nR2 = 0.5\n");
    let run = pneumann(&["solve", "--config", s(&bad), "--jmax", "1"]);
    assert_eq!(run.status.code(), Some(2));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("line 4") && err.contains("R2"), "{err}");

    let good = config(&dir, "good.cfg", Q50);
    for args in [
        vec!["solve", "--config", "/nonexistent/x.cfg", "--jmax", "1"],
        vec!["solve", "--config", s(&good), "--jmax", "1", "--set", "tol_rel=-1"],
        vec!["solve", "--config", s(&good), "--jmax", "1", "--set", "colour=blue"],
        vec!["shoot", "--config", s(&good), "--set", "q=1.5", "--d", "0.1"],
        vec!["solve", "--jmax"],
        vec!["frobnicate"],
    ] {
        assert_eq!(pneumann(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn shoot_writes_a_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "a.cfg", Q50);
    let out = dir.path().join("shot.csv");
    let run = pneumann(&["shoot", "--config", s(&cfg), "--d", "0.1", "--out", s(&out)]);
    assert!(run.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let csv = pneumann::io::Csv::parse(&text).unwrap();
    assert_eq!(csv.columns, ["r", "u", "v", "theta", "rho2", "H"]);
    let u0: f64 = csv.rows[0][1].parse().unwrap();
    assert!((u0 - 0.9).abs() < 1e-15);

    let by_u0 = dir.path().join("u0.csv");
    assert!(pneumann(&["shoot", "--config", s(&cfg), "--u0", "0.9", "--out", s(&by_u0)]).status.success());
    let other = pneumann::io::Csv::parse(&std::fs::read_to_string(&by_u0).unwrap()).unwrap();
    // 1 - 0.9 differs from 0.1 in the last bit, so the profiles agree only closely.
    let end = |c: &pneumann::io::Csv| c.rows.last().unwrap()[1].parse::<f64>().unwrap();
    assert!((end(&other) - end(&csv)).abs() < 1e-9);

    // Inadmissible input is a configuration error; failing to write is not.
    assert_eq!(pneumann(&["shoot", "--config", s(&cfg), "--d", "1.5"]).status.code(), Some(2));
    let blocked = dir.path().join("shot.csv").join("x.csv");
    assert_eq!(pneumann(&["shoot", "--config", s(&cfg), "--d", "0.1", "--out", s(&blocked)]).status.code(), Some(3));
}

#[test]
fn ptrig_point_and_table() {
    let run = pneumann(&["ptrig", "--p", "2", "--theta", "1"]);
    assert!(run.status.success());
    let text = String::from_utf8(run.stdout).unwrap();
    let csv = pneumann::io::Csv::parse(&text).unwrap();
    let c: f64 = csv.rows[0][1].parse().unwrap();
    assert!((c - 1f64.cos()).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    assert!(pneumann(&["ptrig", "--p", "3", "--table", "100", "--out", s(&out)]).status.success());
    let csv = pneumann::io::Csv::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(csv.rows.len(), 101);
    let worst = csv
        .rows
        .iter()
        .map(|r| r[3].parse::<f64>().unwrap().abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12);
    assert_eq!(pneumann(&["ptrig", "--p", "1"]).status.code(), Some(2));
}

#[test]
fn eigen_range_without_q() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "ball.cfg", "p = 2\nR1 = 0\nR2 = 1\nN = 3\n");
    let out = dir.path().join("eig.csv");
    let run = pneumann(&["eigen", "--config", s(&cfg), "--k", "1", "--kmax", "3", "--out", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = pneumann::io::Csv::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(csv.columns, ["k", "lambda", "theta_end", "residual"]);
    let ks: Vec<&str> = csv.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ks, ["1", "2", "3"]);
    let l2: f64 = csv.rows[1][1].parse().unwrap();
    assert!((l2 - 20.190728556).abs() < 1e-6);
}

#[test]
fn short_sweep_with_diagram() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "s.cfg", "p = 2\nR1 = 0\nR2 = 1\nN = 1\n");
    let out = dir.path().join("sweep");
    let run = pneumann(&[
        "sweep", "--config", s(&cfg), "--param", "q", "--from", "11.5", "--to", "12.5", "--step", "0.25", "--jmax",
        "1", "--out", s(&out), "--svg",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("onset j = 1 at q = 11.8"), "{stdout}");
    let text = std::fs::read_to_string(out.join("branches.csv")).unwrap();
    let points = pneumann::sweep::parse_branches(&text).unwrap();
    assert!(points.iter().all(|p| p.param_value >= 11.75 && p.j == 1));
    let svg = std::fs::read_to_string(out.join("diagram.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    // Sweeps only run over the prototype family.
    let plugin = config(&dir, "plugin.cfg", "p = 2\nnonlinearity = plugin:cubic\n");
    let run = pneumann(&["sweep", "--config", s(&plugin), "--from", "3", "--to", "4", "--step", "1", "--jmax", "1"]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("prototype"));
}
