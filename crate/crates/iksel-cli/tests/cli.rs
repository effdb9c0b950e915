//! End-to-end checks of the `iksel` binary: subcommand round trips, the
//! pinned CSV schema, environment-variable overrides, and the exit-code
//! contract (0 ok, 2 usage, 3 incompatible database, 4 I/O or format).

use iksel_cli::Report;
use once_cell::sync::Lazy;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_iksel"));
    // Keep the ambient environment from leaking configuration into tests.
    for (k, _) in std::env::vars() {
        if k.starts_with("IKSEL_") {
            c.env_remove(k);
        }
    }
    c
}

fn model_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// One shared planar database; building it per test would just repeat work.
static PLANAR_DB: Lazy<(TempDir, PathBuf)> = Lazy::new(|| {
    let dir = TempDir::new().unwrap();
    let db = dir.path().join("planar.db");
    let out = bin()
        .args(["build", "--out"])
        .arg(&db)
        .arg("--model")
        .arg(model_path("planar_2r.toml"))
        .args(["--divisions", "24,24"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (dir, db)
});

fn planar_db() -> &'static Path {
    &PLANAR_DB.1
}

fn bench_args(c: &mut Command) -> &mut Command {
    c.arg("--model")
        .arg(model_path("planar_2r.toml"))
        .arg("--db")
        .arg(planar_db())
        .args(["--trials", "40", "--rng-seed", "7"])
        .args(["--k-candidates", "40", "--reselect-pool", "10"])
}

#[test]
fn build_reports_record_count_and_writes_the_file() {
    let dir = TempDir::new().unwrap();
    let db = dir.path().join("out.db");
    let out = bin()
        .args(["build", "--out"])
        .arg(&db)
        .arg("--model")
        .arg(model_path("planar_2r.toml"))
        .args(["--divisions", "9,8"])
        .output()
        .unwrap();
    let text = stdout(&out);
    assert!(text.contains("built 72 records"), "{text}");
    assert!(db.is_file());
}

#[test]
fn build_rejects_scale_and_divisions_together() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args(["build", "--out"])
        .arg(dir.path().join("x.db"))
        .arg("--model")
        .arg(model_path("ur3_class.toml"))
        .args(["--scale", "small", "--divisions", "4,4,4,4,4,4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn build_requires_a_grid_specification() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args(["build", "--out"])
        .arg(dir.path().join("x.db"))
        .arg("--model")
        .arg(model_path("planar_2r.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_round_trips_a_reachable_pose() {
    // FK of q = (0.4, 0.9): links 1 m each, tool angle q1 + q2.
    let x = 0.4f64.cos() + 1.3f64.cos();
    let y = 0.4f64.sin() + 1.3f64.sin();
    let out = bin()
        .arg("solve")
        .arg("--model")
        .arg(model_path("planar_2r.toml"))
        .arg("--db")
        .arg(planar_db())
        .args(["--target", &format!("{x},{y},0,0,0,1.3")])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["status"], "success");
    let q = report["solution"].as_array().unwrap();
    assert_eq!(q.len(), 2);
    assert!((q[0].as_f64().unwrap() - 0.4).abs() < 1e-5);
    assert!((q[1].as_f64().unwrap() - 0.9).abs() < 1e-5);
}

#[test]
fn solve_accepts_a_row_major_rotation_matrix() {
    let x = 0.4f64.cos() + 1.3f64.cos();
    let y = 0.4f64.sin() + 1.3f64.sin();
    let (s, c) = 1.3f64.sin_cos();
    let target = format!("{x},{y},0,{c},{},0,{s},{c},0,0,0,1", -s);
    let out = bin()
        .arg("solve")
        .arg("--model")
        .arg(model_path("planar_2r.toml"))
        .arg("--db")
        .arg(planar_db())
        .args(["--target", &target])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["status"], "success");
}

#[test]
fn malformed_targets_are_usage_errors() {
    for target in ["1,2,3", "1,2,3,4,5,banana", "1,2,3,4,5,6,7"] {
        let out = bin()
            .arg("solve")
            .arg("--model")
            .arg(model_path("planar_2r.toml"))
            .arg("--db")
            .arg(planar_db())
            .args(["--target", target])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2), "target {target:?}");
    }
}

#[test]
fn bench_emits_the_pinned_csv_schema() {
    let out = bench_args(&mut bin().arg("bench")).output().unwrap();
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis_value,success_rate_pct,mean_ms,std_ms,min_ms,max_ms,trials,rng_seed"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 8);
    assert_eq!(row[0], "DLS");
    assert_eq!(row[6], "40");
    assert_eq!(row[7], "7");
    assert!(lines.next().is_none());
}

#[test]
fn bench_json_carries_per_trial_records() {
    let out = bench_args(&mut bin().arg("bench"))
        .args(["--format", "json"])
        .output()
        .unwrap();
    let report: Report = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(row.trials, 40);
    assert_eq!(row.records.len(), 40);
    assert_eq!(row.target_digest.len(), 64);
    for (i, rec) in row.records.iter().enumerate() {
        assert_eq!(rec.index, i);
        assert!(rec.solve_ms >= 0.0);
    }
}

#[test]
fn report_flag_writes_the_file_instead_of_stdout() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("report.csv");
    let out = bench_args(&mut bin().arg("bench"))
        .arg("--report")
        .arg(&path)
        .output()
        .unwrap();
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("axis_value,"));
}

#[test]
fn sweep_rows_are_frozen_to_one_target_set() {
    let out = bench_args(&mut bin().arg("sweep"))
        .args(["--axis", "attempts", "--values", "1,3,5", "--format", "json"])
        .output()
        .unwrap();
    let report: Report = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.rows.len(), 3);
    let digests: Vec<&str> = report.rows.iter().map(|r| r.target_digest.as_str()).collect();
    assert!(digests.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(report.rows[0].axis_value, "1");
    assert_eq!(report.rows[1].axis_value, "3");
    assert_eq!(report.rows[2].axis_value, "5");
}

#[test]
fn repeated_sweeps_agree_modulo_timing() {
    let run = || {
        let out = bench_args(&mut bin().arg("sweep"))
            .args(["--axis", "attempts", "--values", "1,3", "--format", "json"])
            .output()
            .unwrap();
        serde_json::from_str::<Report>(&stdout(&out)).unwrap()
    };
    let (a, b) = (run(), run());
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.axis_value, rb.axis_value);
        assert_eq!(ra.success_rate_pct, rb.success_rate_pct);
        assert_eq!(ra.target_digest, rb.target_digest);
        for (ta, tb) in ra.records.iter().zip(&rb.records) {
            assert_eq!(ta.target, tb.target);
            assert_eq!(ta.success, tb.success);
            assert_eq!(ta.attempts, tb.attempts);
            assert_eq!(ta.iterations, tb.iterations);
        }
    }
}

#[test]
fn single_value_solver_sweep_matches_plain_bench() {
    let bench = stdout(&bench_args(&mut bin().arg("bench")).output().unwrap());
    let sweep = stdout(
        &bench_args(&mut bin().arg("sweep"))
            .args(["--axis", "solver", "--values", "DLS"])
            .output()
            .unwrap(),
    );
    let strip_timing = |csv: &str| -> Vec<String> {
        csv.lines()
            .skip(1)
            .map(|line| {
                let f: Vec<&str> = line.split(',').collect();
                format!("{},{},{},{}", f[0], f[1], f[6], f[7])
            })
            .collect()
    };
    assert_eq!(strip_timing(&bench), strip_timing(&sweep));
}

#[test]
fn environment_variables_stand_in_for_flags() {
    let out = bin()
        .arg("bench")
        .env("IKSEL_MODEL", model_path("planar_2r.toml"))
        .env("IKSEL_DB", planar_db())
        .env("IKSEL_TRIALS", "10")
        .env("IKSEL_RNG_SEED", "7")
        .env("IKSEL_K_CANDIDATES", "40")
        .env("IKSEL_RESELECT_POOL", "10")
        .env("IKSEL_SOLVER", "CWLN")
        .output()
        .unwrap();
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("CWLN,"), "{row}");
    assert!(row.ends_with(",10,7"), "{row}");
}

#[test]
fn flags_override_the_environment() {
    let out = bench_args(&mut bin().arg("bench"))
        .env("IKSEL_SOLVER", "CWLN")
        .args(["--solver", "PINV"])
        .output()
        .unwrap();
    let text = stdout(&out);
    assert!(text.lines().nth(1).unwrap().starts_with("PINV,"));
}

#[test]
fn missing_rng_seed_is_a_usage_error() {
    let out = bin()
        .arg("bench")
        .arg("--model")
        .arg(model_path("planar_2r.toml"))
        .arg("--db")
        .arg(planar_db())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_solver_is_a_usage_error() {
    let out = bench_args(&mut bin().arg("bench"))
        .args(["--solver", "NEWTON"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn database_for_a_different_model_exits_3() {
    let out = bin()
        .arg("solve")
        .arg("--model")
        .arg(model_path("ur3_class.toml"))
        .arg("--db")
        .arg(planar_db())
        .args(["--target", "0.3,0.2,0.3,0,0,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn io_and_format_problems_exit_4() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.db");
    let out = bin()
        .arg("solve")
        .arg("--model")
        .arg(model_path("planar_2r.toml"))
        .arg("--db")
        .arg(&missing)
        .args(["--target", "1,0,0,0,0,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "missing file");

    let bytes = std::fs::read(planar_db()).unwrap();
    let trunc = dir.path().join("trunc.db");
    std::fs::write(&trunc, &bytes[..bytes.len() / 2]).unwrap();
    let out = bin()
        .arg("solve")
        .arg("--model")
        .arg(model_path("planar_2r.toml"))
        .arg("--db")
        .arg(&trunc)
        .args(["--target", "1,0,0,0,0,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "truncated file");

    let bad_model = dir.path().join("broken.toml");
    std::fs::write(&bad_model, "name = 3\n[[joint]]\n").unwrap();
    let out = bin()
        .arg("solve")
        .arg("--model")
        .arg(&bad_model)
        .arg("--db")
        .arg(planar_db())
        .args(["--target", "1,0,0,0,0,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "malformed model");
}

#[test]
fn unsolved_targets_still_exit_0() {
    // Position plus an inconsistent tool angle: no 2R solution exists.
    let out = bin()
        .arg("solve")
        .arg("--model")
        .arg(model_path("planar_2r.toml"))
        .arg("--db")
        .arg(planar_db())
        .args(["--target", "1.2,0.5,0,0,0,0.4"])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["status"], "failure");
}
