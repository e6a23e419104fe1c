use std::path::Path;

use super::config::{apply_override, ExperimentConfig, Setting};
use super::*;

const BASE: &str = r#"
[manifold]
kind = "torus"
periods = [6.283185307179586]
resolution = [16]

[mu]
family = "uniform"

[nu]
family = "cosine_bump"
amplitude = 0.1

[ledger]
c_bar = "measured"
delta0 = "auto"
c12_mode = "analytic"
"#;

fn parse(overrides: &[&str]) -> Result<ExperimentConfig> {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::from_toml(BASE, &o, Path::new("."))
}

#[test]
fn overrides_parse_toml_values_and_fall_back_to_strings() {
    let mut t = toml::Table::new();
    apply_override(&mut t, "solver.newton_tol=1e-8").unwrap();
    apply_override(&mut t, "manifold.resolution=[32, 32]").unwrap();
    apply_override(&mut t, "output.dir=some/where").unwrap();
    apply_override(&mut t, "output.wasserstein = false").unwrap();
    assert_eq!(t["solver"]["newton_tol"].as_float(), Some(1e-8));
    assert_eq!(t["manifold"]["resolution"].as_array().map(Vec::len), Some(2));
    assert_eq!(t["output"]["dir"].as_str(), Some("some/where"));
    assert_eq!(t["output"]["wasserstein"].as_bool(), Some(false));
}

#[test]
fn malformed_overrides_are_config_errors() {
    let mut t = toml::Table::new();
    assert!(matches!(apply_override(&mut t, "no_equals_sign"), Err(Error::Config(_))));
    assert!(matches!(apply_override(&mut t, "a..b=1"), Err(Error::Config(_))));
    apply_override(&mut t, "a=1").unwrap();
    assert!(matches!(apply_override(&mut t, "a.b=1"), Err(Error::Config(_))));
}

#[test]
fn overrides_replace_file_values() {
    let cfg = parse(&["solver.max_newton=5", "ledger.delta0=0.01"]).unwrap();
    assert_eq!(cfg.solver.max_newton, 5);
    assert_eq!(cfg.ledger.delta0, Setting::Value(0.01));
    assert_eq!(cfg.ledger.inputs().unwrap().delta0, Some(0.01));
    assert_eq!(parse(&[]).unwrap().ledger.inputs().unwrap().delta0, None);
}

#[test]
fn unknown_keys_and_bad_keywords_are_rejected() {
    for bad in [
        "solver.newton_tolerance=1e-8",
        "ledger.delta0=\"automatic\"",
        "output.colour=true",
        "manifold.resolution=[4]",
        "manifold.resolution=[16, 16]",
        "wasserstein.path_times=[1.5]",
        "sweep.workers=0",
    ] {
        match parse(&[bad]) {
            Err(e @ Error::Config(_)) => assert_eq!(exit_code(&e), EXIT_CONFIG, "{bad}"),
            other => panic!("{bad}: expected a config error, got {other:?}"),
        }
    }
}

#[test]
fn random_families_take_the_top_level_seed() {
    let base = BASE.replace("family = \"cosine_bump\"\namplitude = 0.1", "family = \"random_fourier\"\namplitude = 0.1\nmodes = 2");
    assert!(matches!(ExperimentConfig::from_toml(&base, &[], Path::new(".")), Err(Error::Config(_))));
    let seeded = ExperimentConfig::from_toml(&format!("seed = 11\n{base}"), &[], Path::new(".")).unwrap();
    let grid = seeded.grid().unwrap();
    let (_, a) = seeded.densities(&grid).unwrap();
    let (_, b) = seeded.densities(&grid).unwrap();
    assert_eq!(a.log_density(), b.log_density());
    let other = ExperimentConfig::from_toml(&format!("seed = 12\n{base}"), &[], Path::new(".")).unwrap();
    let (_, c) = other.densities(&grid).unwrap();
    assert_ne!(a.log_density(), c.log_density());
}

#[test]
fn missing_csv_density_is_a_config_error() {
    let text = BASE.replace("family = \"uniform\"", "family = \"csv\"\npath = \"does_not_exist.csv\"");
    assert!(matches!(ExperimentConfig::from_toml(&text, &[], Path::new("/nonexistent")), Err(Error::Config(_))));
}

#[test]
fn exit_codes_follow_the_error_class() {
    assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
    assert_eq!(exit_code(&Error::MissingArtifacts("x".into())), EXIT_CONFIG);
    assert_eq!(exit_code(&Error::GridMismatch), EXIT_CONFIG);
    assert_eq!(exit_code(&Error::NotCConvex { count: 3, min_eig: -0.1 }), EXIT_SOLVER);
}

#[test]
fn report_is_a_pure_function_of_the_summary() {
    let cfg = parse(&[]).unwrap();
    let mut s = RunSummary::new("solve", &cfg);
    s.timings_ms.insert("solve".into(), 12.5);
    let a = render_report(&s);
    s.timings_ms.insert("solve".into(), 99.0);
    assert_eq!(a, render_report(&s));
    assert!(a.ends_with("NO CERTIFICATE: this command does not march the path\n"));
    s.error = Some("boom".into());
    s.status = Status::SolverFailed;
    assert!(render_report(&s).ends_with("FAILED: boom\n"));
}

#[test]
fn summaries_round_trip_and_reject_other_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse(&[]).unwrap();
    let s = RunSummary::new("solve", &cfg);
    s.write(dir.path()).unwrap();
    assert_eq!(RunSummary::read(dir.path()).unwrap(), s);
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    v["schema"] = serde_json::json!(SCHEMA + 1);
    std::fs::write(dir.path().join(SUMMARY_FILE), v.to_string()).unwrap();
    assert!(matches!(RunSummary::read(dir.path()), Err(Error::MissingArtifacts(_))));
    assert!(matches!(RunSummary::read(&dir.path().join("nope")), Err(Error::MissingArtifacts(_))));
}

#[test]
fn heatmap_is_well_formed_svg() {
    let cfg = ExperimentConfig::from_toml(&BASE.replace("[6.283185307179586]", "[1.0, 1.0]").replace("[16]", "[8, 8]"), &[], Path::new(".")).unwrap();
    let grid = cfg.grid().unwrap();
    let values: Vec<f64> = (0..grid.len()).map(|i| i as f64).collect();
    let svg = heatmap_svg(&grid, &values, "index").unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    // 64 cells plus a 21-step colour bar.
    assert_eq!(svg.matches("<rect").count(), 64 + 21);
}
