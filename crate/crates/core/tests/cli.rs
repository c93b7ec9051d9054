use std::fs;
use std::path::Path;

use hetbench::bench::{expected_row_count, read_records_csv, SweepConfig};
use hetbench::cli::{run_with, EXIT_OK, EXIT_USAGE, OUT_ENV};

fn hetbench(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hetbench").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("grid.toml");
    fs::write(
        &path,
        r#"
models = ["box", "arm_with_rope"]
steps_list = [20]
repetitions = 2
workers = 1
output_dir = "ignored-by-tests"

[variants_per_model]
box = [8, 32, 128]
arm_with_rope = [4, 8, 16]

[device]
startup_s = 0.01
capacity = 16
step_wave_cost_s = 1e-4
"#,
    )
    .unwrap();
    path
}

#[test]
fn equal_speed_stub_splits_evenly() {
    let (code, out, _) = hetbench(&[
        "hybrid", "--model", "box", "--variants", "100", "--steps", "10", "--t-cpu", "2", "--t-accel", "2",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("cpu=50 accel=50"), "{out}");
    assert!(out.contains("wall_combined_s="));
}

#[test]
fn measured_hybrid_prints_times() {
    let (code, out, _) = hetbench(&["hybrid", "--model", "box", "--variants", "64", "--steps", "20", "--device", "ideal"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("naive_sum_s="));
    assert!(out.contains("degraded=false"));
}

#[test]
fn missing_config_is_a_usage_error_naming_the_path() {
    let (code, _, err) = hetbench(&["bench", "--config", "/definitely/not/here.toml"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("/definitely/not/here.toml"));
    assert!(err.contains("Usage"));
}

#[test]
fn bad_flags_print_the_flag_and_grammar() {
    let (code, _, err) = hetbench(&["hybrid", "--model", "box", "--variants", "ten", "--steps", "1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--variants"));
    assert!(err.contains("Usage: hetbench hybrid"));

    let (code, _, err) = hetbench(&["bench", "--config", "x.toml", "--frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--frobnicate"));

    let (code, _, err) = hetbench(&["teleport"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("hetbench knee"));

    let (code, _, _) = hetbench(&["hybrid", "--model", "box", "--variants", "1", "--steps", "1", "--t-cpu", "1"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "models = [\"box\"]\nwarp_drive = true\n").unwrap();
    let (code, _, err) = hetbench(&["bench", "--config", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("warp_drive"));
}

#[test]
fn bench_then_plot_then_knee() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path());
    let out_dir = dir.path().join("out");
    let (code, out, err) = hetbench(&[
        "bench",
        "--config",
        config_path.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--repetitions",
        "3",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("errors=0"));

    // the flag beats the file
    let mut config = SweepConfig::load(&config_path).unwrap();
    config.repetitions = 3;
    let rows = read_records_csv(&out_dir.join("results.csv")).unwrap();
    assert_eq!(rows.len(), expected_row_count(&config));
    assert!(rows.iter().all(|r| r.rep < 3));

    let (code, _, _) = hetbench(&[
        "bench",
        "--config",
        config_path.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--repetitions",
        "3",
        "--resume",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(read_records_csv(&out_dir.join("results.csv")).unwrap().len(), rows.len());

    let fig_dir = dir.path().join("figs");
    let input = out_dir.join("results.csv");
    let (code, out, err) = hetbench(&["plot", "--input", input.to_str().unwrap(), "--out", fig_dir.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("box_20_wall_vs_variants.svg"));
    assert!(fig_dir.join("arm_with_rope_20_hybrid_breakdown.csv").exists());

    let jsonl = out_dir.join("results.jsonl");
    let (code, _, _) = hetbench(&["plot", "--input", jsonl.to_str().unwrap(), "--out", fig_dir.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);

    // capacity 16: 8 and 16 variants share one wave, 32 needs two
    let (code, out, _) = hetbench(&["knee", "--input", input.to_str().unwrap(), "--model", "arm_with_rope"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("knee=16"), "{out}");
    let (code, out, _) = hetbench(&["knee", "--input", input.to_str().unwrap(), "--model", "box"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("knee=8"), "{out}");
}

#[test]
fn out_env_overrides_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path());
    let target = dir.path().join("from-env");
    // the only test in this binary that touches the variable
    std::env::set_var(OUT_ENV, &target);
    let (code, _, err) = hetbench(&["bench", "--config", config_path.to_str().unwrap(), "--no-figures"]);
    std::env::remove_var(OUT_ENV);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(target.join("results.csv").exists());
}

#[test]
fn ea_prints_phase_table() {
    let (code, out, _) = hetbench(&["ea", "--model", "box", "--pop", "8", "--gens", "2", "--steps", "50", "--workers", "1"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("phase"));
    assert!(out.contains("evaluation_fraction="));
    let (code, _, _) = hetbench(&["ea", "--model", "box", "--pop", "1", "--gens", "2"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn knee_on_missing_input() {
    let (code, _, err) = hetbench(&["knee", "--input", "/nope.csv", "--model", "box"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("/nope.csv"));
}
