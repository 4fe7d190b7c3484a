//! End-to-end tests of the binary: generate, solve, bench, exit codes.

use std::path::Path;
use std::process::{Command, Output};

use chores_eq::{ChoresInstance, EquilibriumCandidate};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chores-eq"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn gen_fixture_writes_loadable_instance() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run_ok(bin().args(["gen", "--fixture", "single-chore", "--out"]).arg(dir.path()));
    let manifest = String::from_utf8(out.stdout).expect("utf8");
    let path = Path::new(manifest.trim());
    let inst = ChoresInstance::read_json(path).expect("written instance loads");
    assert_eq!((inst.n(), inst.m()), (2, 1));
    assert_eq!(inst.d(0, 0), 2.0);
    assert_eq!(inst.d(1, 0), 1.0);
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir_a = tempfile::tempdir().expect("tempdir");
    let dir_b = tempfile::tempdir().expect("tempdir");
    for dir in [&dir_a, &dir_b] {
        run_ok(
            bin()
                .args(["gen", "--dist", "lognormal", "--n", "5", "--count", "2", "--seed", "9"])
                .arg("--out")
                .arg(dir.path()),
        );
    }
    for name in ["lognormal-n5-seed9.json", "lognormal-n5-seed10.json"] {
        let a = std::fs::read(dir_a.path().join(name)).expect("file a");
        let b = std::fs::read(dir_b.path().join(name)).expect("file b");
        assert_eq!(a, b, "same spec and seed must produce identical bytes");
    }
}

#[test]
fn solve_gfw_exits_zero_with_expected_prices() {
    let dir = tempfile::tempdir().expect("tempdir");
    run_ok(bin().args(["gen", "--fixture", "single-chore", "--out"]).arg(dir.path()));
    let instance = dir.path().join("single-chore.json");
    let out = run_ok(
        bin().args(["solve", "--algo", "gfw"]).arg(&instance).arg("--out").arg(dir.path()),
    );
    let stdout = String::from_utf8(out.stdout).expect("utf8");
    assert!(stdout.contains("status=exact_kkt"), "stdout: {stdout}");

    let cand_text = std::fs::read_to_string(dir.path().join("single-chore.gfw.candidate.json"))
        .expect("candidate file");
    let cand = EquilibriumCandidate::from_json_str(&cand_text).expect("candidate parses");
    assert_eq!(cand.prices.len(), 1);
    assert!((cand.prices[0] - 2.0).abs() <= 1e-9, "price {:?}", cand.prices);

    let cert_text = std::fs::read_to_string(dir.path().join("single-chore.gfw.certificate.json"))
        .expect("certificate file");
    let cert: serde_json::Value = serde_json::from_str(&cert_text).expect("json");
    assert!(cert.get("eps_earning").is_some());

    let trace = std::fs::read_to_string(dir.path().join("single-chore.gfw.trace.csv"))
        .expect("trace file");
    assert!(trace.starts_with("t,objective,eps_estimate"));
}

#[test]
fn solve_epm_writes_projection_trace() {
    let dir = tempfile::tempdir().expect("tempdir");
    run_ok(bin().args(["gen", "--fixture", "single-chore", "--out"]).arg(dir.path()));
    run_ok(
        bin()
            .args(["solve", "--algo", "epm"])
            .arg(dir.path().join("single-chore.json"))
            .arg("--out")
            .arg(dir.path()),
    );
    let trace = std::fs::read_to_string(dir.path().join("single-chore.epm.trace.csv"))
        .expect("trace file");
    assert!(trace.starts_with("k,proj_dist,fw_gap,feasibility_margin"));
    assert!(trace.lines().count() >= 2, "at least one projection row");
}

#[test]
fn unsolved_run_exits_one() {
    let dir = tempfile::tempdir().expect("tempdir");
    run_ok(bin().args(["gen", "--fixture", "extreme-ratio", "--out"]).arg(dir.path()));
    let instance = dir.path().join("extreme-ratio-r100-eps0.01.json");
    let out = bin()
        .args(["solve", "--algo", "gfw", "--max-iters", "1"])
        .arg(&instance)
        .arg("--out")
        .arg(dir.path())
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(1), "iteration-capped run is not solved");
    let stdout = String::from_utf8(out.stdout).expect("utf8");
    assert!(stdout.contains("status=iter_cap"), "stdout: {stdout}");
}

#[test]
fn bench_sweep_produces_rows_and_summary() {
    let dir = tempfile::tempdir().expect("tempdir");
    let sweep = dir.path().join("sweep");
    run_ok(
        bin()
            .args(["gen", "--dist", "uniform01", "--n", "4", "--count", "2", "--seed", "3"])
            .arg("--out")
            .arg(&sweep),
    );
    run_ok(
        bin()
            .args(["bench"])
            .arg(&sweep)
            .args(["--algo", "gfw", "--jobs", "2", "--out"])
            .arg(dir.path()),
    );
    let rows = std::fs::read_to_string(dir.path().join("bench-rows.csv")).expect("rows");
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(lines.len(), 3, "header + one row per instance: {rows}");
    assert!(lines[0].starts_with("algo,n,dist,seed,status,iters,wall_ms"));
    for line in &lines[1..] {
        assert!(line.starts_with("gfw,4,uniform01,"), "row: {line}");
        assert!(line.ends_with("true,true"), "desk-scale uniform must solve exactly: {line}");
    }
    let summary = std::fs::read_to_string(dir.path().join("bench-summary.csv")).expect("summary");
    let sum_lines: Vec<&str> = summary.lines().collect();
    assert_eq!(sum_lines.len(), 2, "one aggregate group: {summary}");
    assert!(sum_lines[1].starts_with("gfw,uniform01,4,2,1,1,"), "summary: {summary}");
}

#[test]
fn bench_on_empty_directory_emits_headers_only() {
    let dir = tempfile::tempdir().expect("tempdir");
    let empty = dir.path().join("none");
    std::fs::create_dir(&empty).expect("mkdir");
    run_ok(bin().args(["bench"]).arg(&empty).arg("--out").arg(dir.path()));
    let rows = std::fs::read_to_string(dir.path().join("bench-rows.csv")).expect("rows");
    assert_eq!(rows.lines().count(), 1, "header only");
}

#[test]
fn usage_errors_exit_two() {
    let out = bin().args(["solve", "--no-such-flag"]).output().expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["gen"]).output().expect("binary runs");
    assert_eq!(out.status.code(), Some(2), "gen requires a source argument");
}
