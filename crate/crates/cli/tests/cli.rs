//! End-to-end runs of the `fibercav` binary: every subcommand, the
//! determinism guarantee, and the exit-2 diagnostics for broken input.

use std::path::Path;
use std::process::{Command, Output};

fn fibercav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fibercav"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary launches")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
}

/// Asserts the run failed with status 2 and that its diagnostic mentions
/// every given fragment.
fn assert_input_error(output: &Output, fragments: &[&str]) {
    assert_eq!(
        output.status.code(),
        Some(2),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    let stderr = String::from_utf8_lossy(&output.stderr);
    for fragment in fragments {
        assert!(
            stderr.contains(fragment),
            "missing '{fragment}' in: {stderr}"
        );
    }
}

fn json_file(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn quantity(value: &serde_json::Value, field: &str) -> f64 {
    value[field]["value"]
        .as_f64()
        .unwrap_or_else(|| panic!("missing {field}.value in {value}"))
}

fn unit(value: &serde_json::Value, field: &str) -> String {
    value[field]["unit"].as_str().unwrap().to_string()
}

#[test]
fn simulate_then_fit_recovers_the_design_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let run = fibercav(
        dir.path(),
        &[
            "simulate", "--min", "635", "--max", "645", "--points", "1201", "--out", "s.csv",
        ],
    );
    assert_success(&run);
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1202);
    assert!(csv.starts_with("wavelength_nm,reflectivity,transmittance\n"));

    let run = fibercav(
        dir.path(),
        &[
            "fit",
            "--in",
            "s.csv",
            "--out",
            "fit.json",
            "--no-timestamp",
        ],
    );
    assert_success(&run);
    let fit = json_file(&dir.path().join("fit.json"));
    assert!((quantity(&fit, "lambda0") - 639.969).abs() < 0.02);
    assert!((quantity(&fit, "kappa") - 275.9).abs() < 3.0);
    assert!((quantity(&fit, "r0") - 0.234).abs() < 0.02);
    assert_eq!(unit(&fit, "lambda0"), "nm");
    assert_eq!(unit(&fit, "kappa"), "GHz");
    assert_eq!(fit["converged"], serde_json::Value::Bool(true));
    assert!(fit["provenance"].get("unix_time_s").is_none());
}

#[test]
fn reruns_are_byte_identical_with_timestamps_suppressed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let run = fibercav(
            dir.path(),
            &[
                "simulate", "--min", "638", "--max", "642", "--points", "401", "--out", name,
            ],
        );
        assert_success(&run);
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);

    for name in ["a.json", "b.json"] {
        let run = fibercav(
            dir.path(),
            &["fit", "--in", "a.csv", "--out", name, "--no-timestamp"],
        );
        assert_success(&run);
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn coupling_pools_a_linewidth_reflectivity_triple() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("pts.csv"),
        "kappa_ghz,r0\n405,0.595\n122,0.095\n79,0.004\n",
    )
    .unwrap();
    let run = fibercav(
        dir.path(),
        &[
            "coupling",
            "--in",
            "pts.csv",
            "--out",
            "cpl.json",
            "--no-timestamp",
        ],
    );
    assert_success(&run);
    let report = json_file(&dir.path().join("cpl.json"));
    assert!((quantity(&report, "kappa_sc") - 43.59).abs() < 0.05);
    assert_eq!(unit(&report, "kappa_sc"), "GHz");
    let points = report["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    let regimes: Vec<&str> = points
        .iter()
        .map(|p| p["regime"].as_str().unwrap())
        .collect();
    assert_eq!(regimes, vec!["over", "over", "under"]);
}

#[test]
fn report_computes_figures_of_merit() {
    let dir = tempfile::tempdir().unwrap();
    let run = fibercav(
        dir.path(),
        &[
            "report",
            "--kappa-sc",
            "107",
            "--lambda0",
            "626.30",
            "--length",
            "22",
            "--out",
            "rep.json",
            "--no-timestamp",
        ],
    );
    assert_success(&run);
    let report = json_file(&dir.path().join("rep.json"));
    assert!((quantity(&report, "q_sc") - 4473.6).abs() < 0.5);
    assert!((quantity(&report, "finesse_sc") - 63.68).abs() < 0.05);
    assert!((quantity(&report, "loss_one_pass") - 0.04814).abs() < 5e-4);
    assert!(report.get("kappa").is_none());

    let run = fibercav(
        dir.path(),
        &[
            "report",
            "--kappa-sc",
            "107",
            "--lambda0",
            "626.30",
            "--delta-lambda",
            "0.83",
            "--length",
            "22",
            "--out",
            "rep2.json",
            "--no-timestamp",
        ],
    );
    assert_success(&run);
    let report = json_file(&dir.path().join("rep2.json"));
    assert!((quantity(&report, "kappa") - 634.9).abs() < 1.0);
    assert!((quantity(&report, "q") - 754.6).abs() < 1.0);
}

#[test]
fn report_chains_off_a_fit_file() {
    let dir = tempfile::tempdir().unwrap();
    let run = fibercav(
        dir.path(),
        &[
            "simulate", "--min", "635", "--max", "645", "--points", "1201", "--out", "s.csv",
        ],
    );
    assert_success(&run);
    let run = fibercav(
        dir.path(),
        &[
            "fit",
            "--in",
            "s.csv",
            "--out",
            "fit.json",
            "--no-timestamp",
        ],
    );
    assert_success(&run);
    let run = fibercav(
        dir.path(),
        &[
            "report",
            "--kappa-sc",
            "70",
            "--fit",
            "fit.json",
            "--length",
            "45",
            "--out",
            "rep.json",
            "--no-timestamp",
        ],
    );
    assert_success(&run);
    let report = json_file(&dir.path().join("rep.json"));
    assert!((quantity(&report, "lambda0") - 639.969).abs() < 0.02);
    assert!(quantity(&report, "kappa") > 0.0);
    assert_eq!(
        report["provenance"]["inputs"][0].as_str().unwrap(),
        "fit.json"
    );
}

#[test]
fn sweep_writes_the_row_table_and_pooled_rate() {
    let dir = tempfile::tempdir().unwrap();
    let run = fibercav(
        dir.path(),
        &[
            "sweep",
            "--start",
            "140",
            "--stop",
            "160",
            "--step",
            "10",
            "--out",
            "sweep.csv",
        ],
    );
    assert_success(&run);
    let stdout = String::from_utf8_lossy(&run.stdout).to_string();
    assert!(stdout.contains("pooled kappa_sc"), "stdout: {stdout}");
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("n_in,n_out,polarization"));
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 11);
        assert!(["over", "critical", "under", "none"].contains(&fields[9]));
        assert_eq!(fields[10], "true");
    }
    let first: f64 = lines[1].split(',').nth(7).unwrap().parse().unwrap();
    let last: f64 = lines[3].split(',').nth(7).unwrap().parse().unwrap();
    assert!(first > last, "linewidth should fall as the mirror grows");
}

#[test]
fn tuning_follows_the_design_files_chirp() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("chirped.conf"), "chirp_rate = 0.02\n").unwrap();
    let run = fibercav(
        dir.path(),
        &[
            "tune",
            "--design",
            "chirped.conf",
            "--start",
            "-200",
            "--stop",
            "200",
            "--count",
            "3",
            "--out",
            "tune.csv",
        ],
    );
    assert_success(&run);
    let csv = std::fs::read_to_string(dir.path().join("tune.csv")).unwrap();
    let centers: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(centers.len(), 3);
    assert!(
        centers[0] < centers[1] && centers[1] < centers[2],
        "{centers:?}"
    );
}

#[test]
fn power_noise_above_unity_is_clipped_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("wavelength_nm,reflectivity\n");
    for i in 0..201 {
        let lambda = 639.0 + 0.01 * i as f64;
        let half: f64 = 0.15;
        let detuning: f64 = lambda - 640.0;
        let mut r = 0.95 - (0.95 - 0.1) * half * half / (detuning * detuning + half * half);
        if i == 0 {
            r = 1.02;
        }
        csv.push_str(&format!("{lambda},{r}\n"));
    }
    std::fs::write(dir.path().join("noisy.csv"), csv).unwrap();
    let run = fibercav(
        dir.path(),
        &[
            "fit",
            "--in",
            "noisy.csv",
            "--out",
            "fit.json",
            "--no-timestamp",
        ],
    );
    assert_success(&run);
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("clipped 1"), "stderr: {stderr}");
    let fit = json_file(&dir.path().join("fit.json"));
    assert!((quantity(&fit, "lambda0") - 640.0).abs() < 0.01);
    assert!((quantity(&fit, "delta_lambda") - 0.3).abs() < 0.01);
}

#[test]
fn input_errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();

    let run = fibercav(
        dir.path(),
        &["simulate", "--design", "nope.conf", "--out", "x.csv"],
    );
    assert_input_error(&run, &["nope.conf"]);

    std::fs::write(dir.path().join("bad.conf"), "period = 252\nperoid = 252\n").unwrap();
    let run = fibercav(
        dir.path(),
        &["simulate", "--design", "bad.conf", "--out", "x.csv"],
    );
    assert_input_error(&run, &["bad.conf:2", "peroid"]);

    std::fs::write(dir.path().join("wide.conf"), "duty_cycle = 1.5\n").unwrap();
    let run = fibercav(
        dir.path(),
        &["simulate", "--design", "wide.conf", "--out", "x.csv"],
    );
    assert_input_error(&run, &["duty_cycle"]);

    std::fs::write(
        dir.path().join("jumbled.csv"),
        "wavelength_nm,reflectivity\n600,0.5\n601,0.5\n600.5,0.5\n",
    )
    .unwrap();
    let run = fibercav(
        dir.path(),
        &["fit", "--in", "jumbled.csv", "--out", "x.json"],
    );
    assert_input_error(&run, &["jumbled.csv:4"]);

    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let run = fibercav(dir.path(), &["fit", "--in", "empty.csv", "--out", "x.json"]);
    assert_input_error(&run, &["empty.csv", "empty"]);

    let run = fibercav(
        dir.path(),
        &[
            "report",
            "--kappa-sc",
            "107",
            "--lambda0",
            "626.3",
            "--fit",
            "f.json",
            "--length",
            "22",
            "--out",
            "x.json",
        ],
    );
    assert_input_error(&run, &["--fit", "--lambda0"]);

    let run = fibercav(
        dir.path(),
        &[
            "report",
            "--kappa-sc",
            "107",
            "--length",
            "22",
            "--out",
            "x.json",
        ],
    );
    assert_input_error(&run, &["--lambda0"]);
}
