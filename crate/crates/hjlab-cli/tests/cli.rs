//! End-to-end tests driving the compiled binary: exit codes, artifact
//! round-trips, and byte-level determinism of repeated runs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hjlab::experiments::CounterexampleReport;
use hjlab::initial_data::localized_kink;
use hjlab::io;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hjlab"));
    cmd.env_remove("HJ_FRONT_THREADS");
    cmd
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hjlab-cli-{tag}-{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary launches")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(out),
        stderr(out)
    );
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn front_catalog_example_dumps_three_branches() {
    let dir = scratch("front3");
    let out = run(bin().args([
        "front",
        "--h",
        "cubic_wave",
        "--u0",
        "abs_kink_quad",
        "--t",
        "0.05",
        "--out",
        &out_arg(&dir),
    ]));
    assert_code(&out, 0);

    let dump = io::read_front_csv(&dir.join("front.csv")).unwrap();
    assert_eq!(dump.dim, 1);
    assert_eq!(dump.t, 0.05);
    io::verify_sidecar(&dir.join("front.csv")).unwrap();

    let meta: serde_json::Value = io::read_json(&dir.join("front_meta.json")).unwrap();
    assert_eq!(meta["branches"].as_array().unwrap().len(), 3);
    assert_eq!(meta["dim"], 1);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn front_at_time_zero_is_the_initial_graph() {
    let dir = scratch("front0");
    let out = run(bin().args([
        "front",
        "--h",
        "cubic_wave",
        "--u0",
        "abs_kink_quad",
        "--t",
        "0",
        "--out",
        &out_arg(&dir),
    ]));
    assert_code(&out, 0);

    let u0 = localized_kink(0.25).unwrap();
    let dump = io::read_front_csv(&dir.join("front.csv")).unwrap();
    assert!(!dump.points.is_empty());
    for pt in &dump.points {
        assert_eq!(pt.q[0], pt.q0[0]);
        assert!((pt.s - u0.eval(&pt.q)).abs() <= 1e-12);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_failures_exit_2() {
    let dir = scratch("cfg2");
    let o = &out_arg(&dir);

    let neg_t = run(bin().args([
        "front", "--h", "cubic_wave", "--u0", "abs_kink_quad", "--t", "-0.1", "--out", o,
    ]));
    assert_code(&neg_t, 2);

    let missing_u0 = run(bin().args([
        "solve", "--solver", "variational", "--h", "cubic_wave", "--t", "0.05", "--grid",
        "-0.3:0.3:51", "--out", o,
    ]));
    assert_code(&missing_u0, 2);

    let missing_grid = run(bin().args([
        "solve", "--solver", "variational", "--h", "cubic_wave", "--u0", "abs_kink_quad", "--t",
        "0.05", "--out", o,
    ]));
    assert_code(&missing_grid, 2);

    let missing_h = run(bin().args(["counterexample", "dim1", "--out", o]));
    assert_code(&missing_h, 2);

    let unknown_name = run(bin().args([
        "front", "--h", "sombrero", "--u0", "abs_kink_quad", "--t", "0.05", "--out", o,
    ]));
    assert_code(&unknown_name, 2);
    assert!(stderr(&unknown_name).contains("sombrero"));

    let bad_grid = run(bin().args([
        "solve", "--solver", "variational", "--h", "cubic_wave", "--u0", "abs_kink_quad", "--t",
        "0.05", "--grid", "0.3:-0.3:51", "--out", o,
    ]));
    assert_code(&bad_grid, 2);

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn computational_failures_exit_3_naming_the_error() {
    let dir = scratch("comp3");
    let o = &out_arg(&dir);

    let horizon = run(bin().args([
        "solve", "--solver", "variational", "--h", "cubic_wave", "--u0", "abs_kink_quad", "--t",
        "0.5", "--grid", "-0.3:0.3:51", "--out", o,
    ]));
    assert_code(&horizon, 3);
    assert!(stderr(&horizon).contains("HorizonExceeded"), "stderr: {}", stderr(&horizon));

    let degenerate = run(bin().args([
        "counterexample", "saddle", "--a", "1", "--b", "2", "--t", "0.1", "--out", o,
    ]));
    assert_code(&degenerate, 3);
    assert!(
        stderr(&degenerate).contains("EmptyViolationInterval"),
        "stderr: {}",
        stderr(&degenerate)
    );

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn solve_outputs_round_trip_and_rerun_identically() {
    let dir_a = scratch("solve-a");
    let dir_b = scratch("solve-b");
    for (solver, dir) in [("variational", &dir_a), ("variational", &dir_b)] {
        let out = run(bin().args([
            "solve", "--solver", solver, "--h", "half_square", "--u0", "abs_kink", "--t", "0.5",
            "--grid", "-1:1:201", "--out", &out_arg(dir),
        ]));
        assert_code(&out, 0);
    }
    let grid = io::read_grid_csv(&dir_a.join("solution.csv")).unwrap();
    assert_eq!(grid.axes.len(), 1);
    assert_eq!(grid.values.len(), 201);
    io::verify_sidecar(&dir_a.join("solution.csv")).unwrap();

    let bytes_a = std::fs::read(dir_a.join("solution.csv")).unwrap();
    let bytes_b = std::fs::read(dir_b.join("solution.csv")).unwrap();
    assert_eq!(bytes_a, bytes_b, "identical configs must produce identical bytes");

    let visc = run(bin().args([
        "solve", "--solver", "viscosity", "--h", "half_square", "--u0", "abs_kink", "--t", "0.5",
        "--grid", "-1:1:201", "--out", &out_arg(&dir_b),
    ]));
    assert_code(&visc, 0);
    let vgrid = io::read_grid_csv(&dir_b.join("solution.csv")).unwrap();
    let worst = grid
        .values
        .iter()
        .zip(&vgrid.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(worst <= 2e-2, "convex solvers disagree by {worst}");

    std::fs::remove_dir_all(&dir_a).unwrap();
    std::fs::remove_dir_all(&dir_b).unwrap();
}

#[test]
fn envelope_solver_matches_the_closed_form() {
    let dir = scratch("envelope");
    let out = run(bin().args([
        "solve", "--solver", "envelope", "--a", "0.75", "--b", "1", "--t", "0.1", "--grid",
        "-0.8:-0.2:11", "--grid", "-0.3:0.3:11", "--out", &out_arg(&dir),
    ]));
    assert_code(&out, 0);
    let grid = io::read_grid_csv(&dir.join("solution.csv")).unwrap();
    let mut worst = 0.0f64;
    for (i, q1) in grid.axes[0].coords().enumerate() {
        for (j, q2) in grid.axes[1].coords().enumerate() {
            let exact =
                hjlab::variational::saddle_closed_form(0.75, 1.0, 0.1, q1, q2).unwrap();
            worst = worst.max((grid.values[i * grid.axes[1].n + j] - exact).abs());
        }
    }
    assert!(worst <= 1e-6, "envelope misses the closed form by {worst}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn saddle_report_parses_and_validates() {
    let dir = scratch("saddle-report");
    let out = run(bin().args([
        "counterexample",
        "saddle",
        "--grid",
        "-0.35:-0.05:31",
        "--grid",
        "-0.12:0.06:19",
        "--out",
        &out_arg(&dir),
    ]));
    assert_code(&out, 0);

    let report: CounterexampleReport =
        io::read_json(&dir.join("saddle_t0.1_report.json")).unwrap();
    report.validate().unwrap();
    assert_eq!(report.scenario, "saddle");
    assert!(report.margins.lax < 0.0);
    assert!(report.margins.entropy < 0.0);
    assert!(report.witness.gap > 0.0);
    for artifact in &report.artifacts {
        io::verify_sidecar(artifact).unwrap();
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dim1_report_has_negative_lax_margin() {
    let dir = scratch("dim1-report");
    let out = run(bin().args([
        "counterexample",
        "dim1",
        "--h",
        "cubic_wave",
        "--t-list",
        "0.05",
        "--grid",
        "-0.4:0.25:326",
        "--out",
        &out_arg(&dir),
    ]));
    assert_code(&out, 0);

    let report: CounterexampleReport =
        io::read_json(&dir.join("dim1_t0.05_report.json")).unwrap();
    report.validate().unwrap();
    assert_eq!(report.scenario, "dim1");
    assert!(report.margins.lax < -1e-6);
    assert!(report.witness.gap > 0.0);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn check_suite_passes() {
    let out = run(bin().arg("check"));
    assert_code(&out, 0);
    assert!(stdout(&out).contains("all 6 checks passed"), "stdout: {}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn thread_cap_is_validated_and_respected() {
    let dir_capped = scratch("threads-capped");
    let out = run(bin()
        .env("HJ_FRONT_THREADS", "1")
        .args([
            "front", "--h", "cubic_wave", "--u0", "abs_kink_quad", "--t", "0.05", "--out",
            &out_arg(&dir_capped),
        ]));
    assert_code(&out, 0);

    let dir_free = scratch("threads-free");
    let out = run(bin().args([
        "front", "--h", "cubic_wave", "--u0", "abs_kink_quad", "--t", "0.05", "--out",
        &out_arg(&dir_free),
    ]));
    assert_code(&out, 0);
    let capped = std::fs::read(dir_capped.join("front.csv")).unwrap();
    let free = std::fs::read(dir_free.join("front.csv")).unwrap();
    assert_eq!(capped, free, "thread cap must not change the artifact bytes");

    let bad = run(bin().env("HJ_FRONT_THREADS", "zero").args([
        "front", "--h", "cubic_wave", "--u0", "abs_kink_quad", "--t", "0.05", "--out",
        &out_arg(&dir_free),
    ]));
    assert_code(&bad, 2);

    std::fs::remove_dir_all(&dir_capped).unwrap();
    std::fs::remove_dir_all(&dir_free).unwrap();
}

#[test]
fn inline_and_file_specs_are_accepted() {
    let dir = scratch("specs");
    let spec_path = dir.join("h.json");
    std::fs::write(&spec_path, r#"{"family": "cubic_wave"}"#).unwrap();
    let from_file = run(bin().args([
        "front",
        "--h",
        spec_path.to_str().unwrap(),
        "--u0",
        r#"{"kind": "abs_kink", "params": {"width": 0.25}}"#,
        "--t",
        "0.05",
        "--out",
        &out_arg(&dir),
    ]));
    assert_code(&from_file, 0);

    let missing = run(bin().args([
        "front",
        "--h",
        dir.join("absent.json").to_str().unwrap(),
        "--u0",
        "abs_kink_quad",
        "--t",
        "0.05",
        "--out",
        &out_arg(&dir),
    ]));
    assert_code(&missing, 2);
    std::fs::remove_dir_all(&dir).unwrap();
}
