//! End-to-end runs of the `cascade-sim` binary on small grids.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cascade_core::config::RunConfig;
use cascade_core::runner::{decode_correlation, Checkpoint, RunManifest, CHECKPOINT_FILE, CORRELATION_FILE, MANIFEST_FILE};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_cascade-sim");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn example() -> String {
    let out = run(&["example-config"]);
    assert_eq!(code(&out), 0);
    String::from_utf8(out.stdout).unwrap()
}

/// The bundled configuration on a coarse grid, written into `dir`.
fn small_config(dir: &Path, edit: impl FnOnce(&mut RunConfig)) -> PathBuf {
    let mut cfg = RunConfig::from_toml_str(&example()).unwrap();
    cfg.grid.time_points = 29;
    cfg.grid.space_points = 8;
    edit(&mut cfg);
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    path
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

fn simulate(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", config.to_str().unwrap(), "-o", out.to_str().unwrap(), "-q"];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn example_config_parses() {
    let cfg = RunConfig::from_toml_str(&example()).unwrap();
    assert_eq!(cfg.physical.density_cm3, 1e10);
    assert_eq!(cfg.grid.time_points, 101);
}

#[test]
fn bad_config_exits_with_2() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, example().replace("density_cm3 = 1.0e10", "density_cm3 = -1.0")).unwrap();
    let out = simulate(&path, &dir.path().join("out"), &["-r", "1"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(&path, "[ensemble]\nnot_a_field = 1\n").unwrap();
    assert_eq!(code(&simulate(&path, &dir.path().join("out"), &["-r", "1"])), 2);
}

#[test]
fn missing_config_exits_with_3() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir.path().join("absent.toml"), &dir.path().join("out"), &[]);
    assert_eq!(code(&out), 3);
}

#[test]
fn corrupt_checkpoint_exits_with_3() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let out_dir = dir.path().join("out");
    std::fs::create_dir_all(&out_dir).unwrap();
    std::fs::write(out_dir.join(CHECKPOINT_FILE), "{ not json").unwrap();
    assert_eq!(code(&simulate(&cfg, &out_dir, &["-r", "2", "-w", "1"])), 3);
}

#[test]
fn mass_divergence_exits_with_4() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), |c| c.control.divergence_bound = 1e-30);
    let out_dir = dir.path().join("out");
    let out = simulate(&cfg, &out_dir, &["-r", "3", "-w", "1"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&out_dir);
    assert_eq!(m.trajectories_discarded, 3);
}

#[test]
fn zero_trajectories_writes_only_the_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let out_dir = dir.path().join("out");
    assert_eq!(code(&simulate(&cfg, &out_dir, &["-r", "0"])), 0);
    let names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, vec![MANIFEST_FILE.to_string()]);
    assert_eq!(manifest(&out_dir).trajectories_completed, 0);
}

#[test]
fn results_do_not_depend_on_workers_or_checkpoints() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&simulate(&cfg, &a, &["-r", "6", "-w", "1", "-k", "0"])), 0);
    assert_eq!(code(&simulate(&cfg, &b, &["-r", "6", "-w", "3", "-k", "2"])), 0);
    let ga = std::fs::read(a.join(CORRELATION_FILE)).unwrap();
    let gb = std::fs::read(b.join(CORRELATION_FILE)).unwrap();
    assert_eq!(ga, gb);
    let decoded = decode_correlation(&ga).unwrap();
    assert_eq!(decoded.0, 29);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let whole = dir.path().join("whole");
    let split = dir.path().join("split");
    assert_eq!(code(&simulate(&cfg, &whole, &["-r", "6", "-w", "2", "-k", "3"])), 0);

    // stop after four trajectories, then extend the same directory to six
    assert_eq!(code(&simulate(&cfg, &split, &["-r", "4", "-w", "2", "-k", "2"])), 0);
    let cp: Checkpoint =
        serde_json::from_str(&std::fs::read_to_string(split.join(CHECKPOINT_FILE)).unwrap()).unwrap();
    assert_eq!(cp.next_index, 4);
    assert_eq!(code(&simulate(&cfg, &split, &["-r", "6", "-w", "1", "-k", "2"])), 0);
    assert_eq!(manifest(&split).resumed_from, Some(4));

    assert_eq!(
        std::fs::read(whole.join(CORRELATION_FILE)).unwrap(),
        std::fs::read(split.join(CORRELATION_FILE)).unwrap()
    );
}

#[test]
fn resuming_with_another_seed_is_refused() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let out_dir = dir.path().join("out");
    assert_eq!(code(&simulate(&cfg, &out_dir, &["-r", "2", "-k", "1"])), 0);
    let out = simulate(&cfg, &out_dir, &["-r", "4", "-s", "9"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn trajectory_dump_has_full_space_time_state() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let out_dir = dir.path().join("out");
    assert_eq!(code(&simulate(&cfg, &out_dir, &["-r", "1", "--dump-trajectory", "0"])), 0);
    let bytes = std::fs::read(out_dir.join("trajectory_0.bin")).unwrap();
    let header_end = bytes.windows(5).position(|w| w == b"\nend\n").unwrap() + 5;
    let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
    assert!(header.contains("time_points 29"));
    assert!(header.contains("space_points 8"));
    assert_eq!(bytes.len() - header_end, 29 * 8 * 19 * 16);
}

#[test]
fn sweep_writes_one_row_per_density() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--densities",
        "5e9,1e10",
        "-r",
        "2",
        "-o",
        out_dir.to_str().unwrap(),
        "-q",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(out_dir.join("sweep.tsv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn check_passes_and_reports_json() {
    let out = run(&["check", "--json"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["suites"].as_array().unwrap().len(), 5);
}

#[test]
fn injected_fault_fails_the_check() {
    let out = run(&["check", "--inject-fault", "diffusion"]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("factorization") && l.contains("FAIL")));
}
