use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pairspec"))
}

fn source(theta: f64, pump: f64, pm: f64, shape: &str) -> Value {
    json!({
        "pump_center_wavelength_nm": 778.0,
        "pump_fwhm_nm": pump,
        "pm_fwhm_nm": pm,
        "theta_deg": theta,
        "signal_center_wavelength_nm": 1556.0,
        "idler_center_wavelength_nm": 1556.0,
        "phasematching_shape": shape
    })
}

fn write_config(dir: &TempDir, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Rows of a CSV as header-keyed maps.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, f64>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .filter_map(|(h, v)| v.parse::<f64>().ok().map(|v| (h.to_string(), v)))
                .collect()
        })
        .collect()
}

fn gaussian_filters(ws: f64, wi: f64) -> Value {
    json!({
        "source": source(60.5, 0.38, 1.5, "gaussian_approx"),
        "signal_filter": {"shape": "gaussian", "center_wavelength_nm": 1556.0, "fwhm_nm": ws},
        "idler_filter": {"shape": "gaussian", "center_wavelength_nm": 1556.0, "fwhm_nm": wi}
    })
}

#[test]
fn unfiltered_metrics_have_unit_heralding() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({"source": source(60.5, 0.38, 1.5, "gaussian_approx")}),
    );
    let m = stdout_json(&run(&["metrics"], &cfg));
    assert_eq!(m["eta_s"].as_f64().unwrap(), 1.0);
    assert_eq!(m["eta_i"].as_f64().unwrap(), 1.0);
    let p = m["purity"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0);
}

#[test]
fn analytic_engine_rejects_rectangular_filters() {
    let dir = TempDir::new().unwrap();
    let mut c = gaussian_filters(2.0, 2.0);
    c["signal_filter"]["shape"] = json!("rectangular");
    let cfg = write_config(&dir, "c.json", &c);
    let out = run(&["metrics", "--engine", "analytic"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported shape"));
}

#[test]
fn engines_agree_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &gaussian_filters(2.0, 2.5));
    let a = stdout_json(&run(&["metrics", "--engine", "analytic"], &cfg));
    let n = stdout_json(&run(
        &["metrics", "--engine", "numeric", "--grid", "256"],
        &cfg,
    ));
    for k in ["eta_s", "eta_i", "purity", "f_sym", "pef"] {
        let (x, y) = (a[k].as_f64().unwrap(), n[k].as_f64().unwrap());
        assert!((x - y).abs() < 1e-6, "{k}: {x} vs {y}");
    }
}

#[test]
fn narrow_flat_top_filters_give_high_purity() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({
            "source": source(60.5, 0.42, 0.46, "sinc"),
            "engine": "numeric",
            "grid": {"n_points": 128},
            "sweep": {"shape": "rectangular", "fwhm_nm": [0.2, 1.0, 5.0, 30.0]}
        }),
    );
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 4);
    assert!(rows[0]["purity"] >= 0.99, "{}", rows[0]["purity"]);
    assert!(rows[3]["eta_s"] > rows[0]["eta_s"]);
}

#[test]
fn heatmap_stays_below_the_bound() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({
            "source": source(60.5, 0.38, 1.5, "gaussian_approx"),
            "heatmap": {
                "shape": "gaussian",
                "signal_fwhm_nm": {"start": 0.1, "stop": 10.0, "points": 25},
                "idler_fwhm_nm": {"start": 0.1, "stop": 10.0, "points": 25}
            }
        }),
    );
    let csv = dir.path().join("heat.csv");
    let out = run(&["heatmap", "--out", csv.to_str().unwrap()], &cfg);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let rows = csv_rows(&fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 625);
    let max = rows.iter().map(|r| r["f_sym"]).fold(0.0, f64::max);
    assert!(max > 0.5 && max <= 0.58, "{max}");

    let manifest: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("heat.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "heatmap");
    assert_eq!(manifest["config"]["heatmap"]["shape"], "gaussian");
    assert!(manifest["tool_version"].is_string());
}

#[test]
fn bound_reaches_unity_only_on_the_engineered_side() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({
            "source": source(60.5, 1.0, 1.5, "gaussian_approx"),
            "bound": {"theta_deg": [60.5, 135.0]}
        }),
    );
    let out = run(&["bound"], &cfg);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert!(
        (rows[0]["f_max"] - 0.5728).abs() < 1e-3,
        "{}",
        rows[0]["f_max"]
    );
    assert!(rows[1]["f_max"] > 0.999);
}

#[test]
fn analyze_separable_jsi_and_reference_counts() {
    let dir = TempDir::new().unwrap();
    let s = [0.1, 0.5, 1.0, 0.4, 0.2];
    let i = [0.3, 1.0, 0.6, 0.1];
    let mut text = String::from("idler_nm\\signal_nm,1555.0,1555.5,1556.0,1556.5,1557.0\n");
    for (k, iv) in i.iter().enumerate() {
        text.push_str(&format!("{}", 1555.0 + 0.5 * k as f64));
        for sv in s {
            text.push_str(&format!(",{}", sv * iv));
        }
        text.push('\n');
    }
    fs::write(dir.path().join("jsi.csv"), text).unwrap();
    fs::write(
        dir.path().join("counts.csv"),
        "label,C,S_s,S_i\nreference,4000,20000,18000\nnarrow,2500,16000,12000\n",
    )
    .unwrap();
    // relative paths resolve against the config's directory
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({"analyze": {"jsi_path": "jsi.csv", "counts_path": "counts.csv"}}),
    );
    let r = stdout_json(&run(&["analyze"], &cfg));
    assert!((r["jsi"]["purity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["reference_label"], "reference");
    let reference = &r["settings"][0];
    assert_eq!(
        reference["filter_heralding"]["eta_s"]["value"].as_f64(),
        Some(1.0)
    );
    assert_eq!(
        reference["filter_heralding"]["eta_i"]["value"].as_f64(),
        Some(1.0)
    );
    let narrow = &r["settings"][1]["filter_heralding"];
    let expect_s = (2500.0 / 12000.0) / (4000.0 / 18000.0);
    assert!((narrow["eta_s"]["value"].as_f64().unwrap() - expect_s).abs() < 1e-12);
    assert!(r["config"]["analyze"].is_object());
}

#[test]
fn jitter_without_dispersion_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("jsi.csv"), "x,1,2\n1,1,1\n2,1,1\n").unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({"analyze": {"jsi_path": "jsi.csv", "jitter_fwhm_ps": 30.0}}),
    );
    let out = run(&["analyze"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dispersion_ps_per_nm"));
}

#[test]
fn rerunning_a_manifest_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({
            "source": source(60.5, 1.0, 1.5, "gaussian_approx"),
            "bound": {"theta_deg": [30.0, 60.5]},
            "optimizer": {"starts": 3}
        }),
    );
    let first = dir.path().join("a.csv");
    assert!(run(
        &["bound", "--seed", "7", "-o", first.to_str().unwrap()],
        &cfg
    )
    .status
    .success());
    let manifest = dir.path().join("a.csv.manifest.json");
    let second = dir.path().join("b.csv");
    assert!(run(&["bound", "-o", second.to_str().unwrap()], &manifest)
        .status
        .success());
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    let m: Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["config"]["optimizer"]["seed"], 7);
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = TempDir::new().unwrap();
    // an unfiltered spectrum on a far too narrow grid
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({
            "source": source(45.0, 0.38, 1.5, "gaussian_approx"),
            "engine": "numeric",
            "grid": {"n_points": 32, "fit_sigmas": 0.5}
        }),
    );
    let out = run(&["metrics"], &cfg);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["metrics"], &missing).status.code(), Some(1));
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let cfg = write_config(
        &dir,
        "bad.json",
        &json!({"source": source(60.5, 1.0, 1.5, "gaussian_approx"), "engin": "numeric"}),
    );
    assert_eq!(run(&["metrics"], &cfg).status.code(), Some(1));
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
