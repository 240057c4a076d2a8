use std::path::Path;
use std::process::Command;

fn stmap(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stmap")).args(args).output().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// Simulates a small bundle into `dir/bundle` and returns its config path.
fn small_bundle(dir: &Path, seed: u64) -> String {
    let sim = dir.join("sim.json");
    let cfg = format!(
        r#"{{"output_dir": "bundle", "simulate": {{"n_areas": 40, "weeks": 8, "seed": {seed}}}, "optimizer": {{"max_evals": 150}}}}"#
    );
    write(&sim, &cfg);
    let out = stmap(&["simulate", sim.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("bundle/config.json").to_str().unwrap().to_string()
}

#[test]
fn fit_writes_three_artifacts_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bundle(dir.path(), 5);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let r = stmap(&["fit", &cfg, "--output-dir", out.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    }
    for f in ["fit.json", "rates.csv", "mesh.json"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let rates = std::fs::read_to_string(a.join("rates.csv")).unwrap();
    assert_eq!(rates.lines().next().unwrap(), "area_id,week,theta_hat,rate,lo95,hi95,censored");
    assert_eq!(rates.lines().count(), 1 + 40 * 8);
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("fit.json")).unwrap()).unwrap();
    for row in fit["hyperparameters"].as_array().unwrap() {
        for key in ["mean", "sd", "0.025quant", "0.975quant", "mode"] {
            assert!(row[key].is_number(), "{key}");
        }
    }
}

#[test]
fn missing_cases_file_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bundle(dir.path(), 1);
    std::fs::remove_file(dir.path().join("bundle/cases.csv")).unwrap();
    let r = stmap(&["fit", &cfg]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("cases.csv"));
}

#[test]
fn missing_config_exits_2() {
    let r = stmap(&["fit", "/nonexistent/config.json"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("/nonexistent/config.json"));
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    write(&p, r#"{"weeks": 3, "no_such_field": 1}"#);
    assert_eq!(stmap(&["fit", p.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn pipeline_outputs_have_documented_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bundle(dir.path(), 2);
    let fit_dir = dir.path().join("bundle/fit");
    for cmd in [vec!["ingest"], vec!["diagnose"], vec!["fit"], vec!["compare"], vec!["regions"]] {
        let mut args = cmd.clone();
        args.push(&cfg);
        let r = stmap(&args);
        assert_eq!(r.status.code(), Some(0), "{cmd:?}: {}", String::from_utf8_lossy(&r.stderr));
    }
    let cmp = std::fs::read_to_string(fit_dir.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = cmp.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "model,rmse,mae");
    let models: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["bayesian", "ols", "gwr"]);
    assert!(lines.iter().all(|l| l.split(',').count() == 3));

    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit_dir.join("diagnostics.json")).unwrap()).unwrap();
    for key in ["morans", "ljung_box", "correlations", "vif", "dropped"] {
        assert!(!diag[key].is_null(), "{key}");
    }
    assert!(diag["morans"]["I"].is_number() && diag["ljung_box"]["Q"].is_number());

    let regions = std::fs::read_to_string(fit_dir.join("regions.csv")).unwrap();
    assert_eq!(regions.lines().next().unwrap(), "region_id,week,phi");
    assert_eq!(regions.lines().count(), 1 + 4 * 8);

    // Eight weeks make one interval when clustering over four.
    let r = stmap(&["cluster", &cfg, "--axis", "per-area"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let clusters = std::fs::read_to_string(fit_dir.join("clusters.csv")).unwrap();
    assert_eq!(clusters.lines().next().unwrap(), "interval,area_id,level");
    assert_eq!(clusters.lines().count(), 1 + 40);
}

#[test]
fn holdout_compare_scores_masked_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = small_bundle(dir.path(), 4);
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["holdout"] = serde_json::json!({"fraction": 0.2, "seed": 9});
    write(Path::new(&cfg_path), &cfg.to_string());
    let r = stmap(&["compare", &cfg_path]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let cmp = std::fs::read_to_string(dir.path().join("bundle/fit/comparison.csv")).unwrap();
    for line in cmp.lines().skip(1) {
        let rmse: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(rmse.is_finite() && rmse > 0.0);
    }
}

#[test]
fn unknown_flag_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bundle(dir.path(), 3);
    assert_eq!(stmap(&["diagnose", &cfg, "--weights", "hexagon"]).status.code(), Some(1));
    assert_eq!(stmap(&["fit", &cfg, "--sigma-convention", "other"]).status.code(), Some(1));
}

fn in_sample_rmse(dir: &Path, hyper: &str) -> Vec<(String, f64)> {
    let sim = dir.join("sim.json");
    let cfg = format!(
        r#"{{"output_dir": "bundle", "simulate": {{"n_areas": 60, "weeks": 8, "seed": 6, "hyper": {hyper}}}}}"#
    );
    write(&sim, &cfg);
    assert!(stmap(&["simulate", sim.to_str().unwrap()]).status.success());
    let r = stmap(&["compare", dir.join("bundle/config.json").to_str().unwrap(), "--fit"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    std::fs::read_to_string(dir.join("bundle/fit/comparison.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn pure_noise_makes_bayesian_match_ols() {
    let dir = tempfile::tempdir().unwrap();
    let rows = in_sample_rmse(dir.path(), r#"{"rho": 0.5, "sigma_omega": 1e-6, "alpha": 0.9, "sigma_e": 0.05}"#);
    let (b, o) = (rows[0].1, rows[1].1);
    assert!((b - o).abs() <= 0.1 * o, "bayesian {b} ols {o}");
}

#[test]
fn spatial_signal_puts_bayesian_first() {
    let dir = tempfile::tempdir().unwrap();
    let rows = in_sample_rmse(dir.path(), r#"{"rho": 0.5, "sigma_omega": 0.3, "alpha": 0.9, "sigma_e": 0.05}"#);
    assert!(rows[0].1 < rows[1].1 && rows[0].1 < rows[2].1, "{rows:?}");
}
