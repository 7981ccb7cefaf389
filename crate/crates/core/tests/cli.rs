//! End-to-end checks of the `dgpinv` binary: outputs, determinism, exit
//! codes.

use std::path::Path;
use std::process::{Command, Output};

use dgp_inverse::exponents::{ExponentReport, PriorRegime};
use dgp_inverse::experiment::RateReport;
use dgp_inverse::grid::{Field, Grid};
use dgp_inverse::io;
use num_rational::Ratio;

fn dgpinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgpinv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_tiny_plan(path: &Path, seed: u64) {
    let plan = format!(
        r#"{{
  "problem": {{"problem": "identity"}},
  "truth": {{"kind": "smooth-bump", "alpha": 3.0, "radius": 1.0, "ambient_d": 1}},
  "priors": [{{"family": "baseline", "tau": 2.0, "beta": 1, "scaling": "canonical", "truncation": 8}}],
  "n_grid": [20, 40, 80],
  "replicates": 1,
  "schedule": {{"burn_in": 50, "length": 100, "thin": 2}},
  "seed": {seed},
  "points_per_axis": 65,
  "margin": 0.25
}}"#
    );
    std::fs::write(path, plan).unwrap();
}

#[test]
fn exponents_prints_the_exact_spot_values() {
    let out = dgpinv(&[
        "exponents",
        "--problem",
        "darcy",
        "--alpha",
        "3",
        "--beta",
        "2",
        "--d",
        "1",
    ]);
    assert!(out.status.success(), "stderr: {:?}", out.stderr);
    let text = stdout(&out);
    assert!(text.contains("1/7"), "missing DGP L2 exponent: {text}");
    assert!(text.contains("3/7"), "missing prediction exponent: {text}");
    assert!(text.contains("d >= 14"), "missing crossover: {text}");

    let json = dgpinv(&[
        "exponents",
        "--problem",
        "darcy",
        "--alpha",
        "3",
        "--beta",
        "2",
        "--d",
        "1",
        "--tau",
        "4",
        "--json",
    ]);
    assert!(json.status.success());
    let report: ExponentReport = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(report.small_ball, Ratio::new(4, 9));
    assert_eq!(report.baseline_lower, Ratio::new(1, 3));
    assert_eq!(report.dgp_l2_gam, Ratio::new(1, 7));
    assert_eq!(report.prediction, Ratio::new(3, 7));
    let (regime, bound) = report.tau_prior_lower.expect("tau rows requested");
    assert_eq!(regime, PriorRegime::Oversmoothed);
    assert_eq!(bound, Ratio::new(3, 10));
}

#[test]
fn inadmissible_exponent_parameters_exit_with_code_2() {
    let out = dgpinv(&[
        "exponents",
        "--problem",
        "darcy",
        "--alpha",
        "2",
        "--beta",
        "2",
        "--d",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn forward_solve_respects_the_maximum_principle() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::ambient(1, 65, 0.25).unwrap();
    let theta = Field::from_fn(grid, "cli theta", |x| 0.4 * (2.0 * x[0]).sin()).unwrap();
    let theta_path = dir.path().join("theta.json");
    io::save_field(&theta, &theta_path).unwrap();

    let out_path = dir.path().join("u.json");
    let out = dgpinv(&[
        "forward",
        "--problem",
        "schrodinger",
        "--theta",
        theta_path.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {:?}", out.stderr);
    let u = io::load_field(&out_path).unwrap();
    let max = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max <= 1.0 + 1e-10, "boundary data is 1 but |u| reached {max}");
}

#[test]
fn prior_sample_emits_loadable_draw_documents() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("prior.json");

    std::fs::write(
        &config,
        r#"{
  "prior": {"family": "dgp", "beta": 1, "alpha_plus": 3.0, "q_max": 1, "m0": 2.0},
  "ambient_d": 1, "points_per_axis": 65, "margin": 0.25, "n": 500
}"#,
    )
    .unwrap();
    let dgp_dir = dir.path().join("dgp");
    let out = dgpinv(&[
        "prior-sample",
        "--config",
        config.to_str().unwrap(),
        "--draws",
        "2",
        "--seed",
        "3",
        "--out",
        dgp_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {:?}", out.stderr);
    for r in 0..2 {
        let (_, _, composed) = io::load_deep_draw(&dgp_dir.join(format!("draw-{r}"))).unwrap();
        assert_eq!(composed.grid().points_per_axis(), 65);
    }

    std::fs::write(
        &config,
        r#"{
  "prior": {"family": "baseline", "tau": 2.0, "beta": 1, "scaling": "canonical", "truncation": 8},
  "ambient_d": 1, "points_per_axis": 65, "margin": 0.25, "n": 500
}"#,
    )
    .unwrap();
    let base_dir = dir.path().join("baseline");
    let out = dgpinv(&[
        "prior-sample",
        "--config",
        config.to_str().unwrap(),
        "--draws",
        "1",
        "--seed",
        "3",
        "--out",
        base_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {:?}", out.stderr);
    let draw = io::load_field(&base_dir.join("draw-0.json")).unwrap();
    assert!(draw.values().iter().any(|&v| v != 0.0));
}

#[test]
fn contract_runs_are_deterministic_and_write_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let plan_path = dir.path().join("plan.json");
    write_tiny_plan(&plan_path, 11);

    let run = |out_dir: &Path, jobs: &str| {
        let out = dgpinv(&[
            "contract",
            "--plan",
            plan_path.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert!(out.status.success(), "stderr: {:?}", out.stderr);
        stdout(&out)
    };
    let text_a = run(&dir.path().join("a"), "1");
    let text_b = run(&dir.path().join("b"), "2");
    assert!(text_a.contains("l2-median: slope"));
    assert!(text_b.contains("l2-median: slope"));

    let csv_a = std::fs::read(dir.path().join("a/cells.csv")).unwrap();
    let csv_b = std::fs::read(dir.path().join("b/cells.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "reruns must be byte-identical");
    assert!(dir.path().join("a/rates.svg").exists());

    let report: RateReport =
        io::load_json(&dir.path().join("a/report.json")).unwrap();
    assert_eq!(report.cells.len(), 3);
    assert!(report.failures.is_empty());
}

#[test]
fn lower_bound_preset_reports_the_spike_and_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("lb");
    let out = dgpinv(&[
        "lower-bound",
        "--alpha",
        "2",
        "--beta",
        "1",
        "--n-grid",
        "30,60,120",
        "--replicates",
        "1",
        "--burn-in",
        "60",
        "--length",
        "120",
        "--thin",
        "3",
        "--q-max",
        "0",
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {:?}", out.stderr);
    let text = stdout(&out);
    assert!(text.contains("spike truth: level"), "{text}");
    assert!(
        text.contains("regime Undersmoothed") && text.contains("2/7"),
        "{text}"
    );
    assert!(text.contains("baseline observed slope"), "{text}");
    assert!(out_dir.join("cells.csv").exists());
}

#[test]
fn missing_plan_files_exit_with_code_2() {
    let out = dgpinv(&[
        "contract",
        "--plan",
        "/nonexistent/plan.json",
        "--out",
        "/tmp/never-created",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
