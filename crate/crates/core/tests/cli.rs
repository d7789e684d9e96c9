use std::fs;
use std::process::{Command, Output};

use forest_escape::export::{check_mtz_text, read_solution_csv, MTZ_CHECK_TOL};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forest-escape"))
        .args(args)
        .env("ESCAPE_SOLVER_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_writes_every_requested_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["solve", "point_unit", "--n", "1", "--out", out, "--format", "csv,svg,mtz"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fields: Vec<String> = stdout(&o).trim().split(", ").map(str::to_string).collect();
    assert_eq!(fields.len(), 7, "{fields:?}");
    assert_eq!(&fields[..4], ["point_unit", "1", "1", "hint"]);
    assert!((fields[4].parse::<f64>().unwrap() - 1.0).abs() < 1e-9);

    let csv = fs::read_to_string(dir.path().join("point_unit_N1_M1.csv")).unwrap();
    let points = read_solution_csv(&csv).unwrap();
    assert_eq!(points.len(), 1);

    let svg = fs::read_to_string(dir.path().join("point_unit_N1_M1.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.contains("seed 0"));

    let mtz = fs::read_to_string(dir.path().join("point_unit_N1_M1.mtz")).unwrap();
    assert!(mtz.starts_with("# scenario point_unit N 1 M 1 strategy hint seed 0"));
    let check = check_mtz_text(&mtz, 1e-9).unwrap();
    assert_eq!(check.k, 1);
    assert!((check.objective - 1.0).abs() < MTZ_CHECK_TOL);
}

#[test]
fn identical_seed_gives_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run(&[
            "solve", "circle_wf2", "--n", "4", "--m", "2", "--strategy", "alternating", "--seed", "5", "--out",
            dir.path().to_str().unwrap(), "--format", "csv,svg,mtz",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for ext in ["csv", "svg", "mtz"] {
        let name = format!("circle_wf2_N4_M2.{ext}");
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn invalid_requests_exit_with_two() {
    assert_eq!(run(&["solve", "no_such_scenario"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "point_unit", "--n", "0"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "opaque_circle_tangent", "--closed"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "zalgaller_class2", "--strategy", "twoopt"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_forest-escape"))
        .args(["list"])
        .env("ESCAPE_SOLVER_THREADS", "none")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scenario_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bisector.json");
    fs::write(&path, r#"{"name": "bisector_angle", "N": 24, "params": {"theta": 1.0}}"#).unwrap();
    let o = run(&["solve", path.to_str().unwrap(), "--n", "36", "--out", dir.path().to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("bisector_angle, 36, 1, hint, "));
    assert!(dir.path().join("bisector_angle_N36_M1.csv").exists());
}

#[test]
fn theta_sweep_writes_csv_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "sweep", "bisector_angle", "--vary", "theta", "--values", "pi/6,pi/3,2pi/3,5pi/6", "--n", "24", "--out", out,
        "--format", "svg",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);
    let csv = fs::read_to_string(dir.path().join("bisector_angle_sweep_theta.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(csv.as_bytes());
    assert_eq!(rows.headers().unwrap(), vec!["theta", "length"]);
    let lengths: Vec<f64> = rows.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(lengths.len(), 4);
    // Wider wedges are escaped sooner.
    assert!(lengths.windows(2).all(|w| w[1] < w[0]), "{lengths:?}");
    for i in 0..4 {
        assert!(dir.path().join(format!("bisector_angle_sweep_theta_{i}.svg")).exists());
    }
}

#[test]
fn n_sweep_lengths_grow_with_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "sweep", "point_unit", "--vary", "n", "--values", "6,12,24", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let lengths: Vec<f64> =
        stdout(&o).lines().map(|l| l.split(", ").nth(4).unwrap().parse().unwrap()).collect();
    assert!(lengths.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{lengths:?}");
}

#[test]
fn closed_flag_adds_the_return_leg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let open = run(&["solve", "point_unit", "--n", "36", "--out", out, "--format", "csv"]);
    let closed = run(&["solve", "point_unit", "--n", "36", "--closed", "--out", out, "--format", "csv"]);
    let len = |o: &Output| stdout(o).split(", ").nth(4).unwrap().parse::<f64>().unwrap();
    assert!((len(&closed) - len(&open) - 1.0).abs() < 1e-7);
}

#[test]
fn verify_subset_passes() {
    let o = run(&["verify", "--only", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let line = stdout(&o);
    assert!(line.starts_with("PASS") && line.contains("order oracle equivalence"), "{line}");
    assert_eq!(run(&["verify", "--only", "nothing_matches_this"]).status.code(), Some(2));
}
