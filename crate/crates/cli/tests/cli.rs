use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ddlab(config: &Value, dir: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let cfg_path = dir.join("config.json");
    std::fs::write(&cfg_path, config.to_string()).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_ddlab"))
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn ok(config: &Value) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = ddlab(config, dir.path(), &[]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    (dir, out)
}

fn failing(config: &Value) -> (i32, Value) {
    let dir = tempfile::tempdir().unwrap();
    let (output, _) = ddlab(config, dir.path(), &[]);
    let err: Value = serde_json::from_slice(&output.stderr).expect("error JSON on stderr");
    (output.status.code().unwrap(), err)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn coin(p: f64) -> Value {
    serde_json::json!({"coin": {"win": 1.0, "loss": -1.0, "p": p}})
}

#[test]
fn idle_strategy_never_invests() {
    let (_d, out) = ok(&serde_json::json!({
        "distribution": coin(0.6),
        "simulation": {"v0": 1.0, "n": 20},
        "experiment": {"kind": "simulate", "strategy": {"markowitz": {"K": 0.0}}},
        "seed": 3
    }));
    let rows = csv_rows(&out.join("trajectory.csv"));
    assert_eq!(rows.len(), 21);
    for r in &rows[..20] {
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
    }
    let stats = read_json(&out.join("path_stats.json"));
    assert_eq!(stats["result"]["overall_return"], 0.0);
}

#[test]
fn modulated_rows_respect_the_cap() {
    let (_d, out) = ok(&serde_json::json!({
        "distribution": coin(0.6),
        "simulation": {"v0": 1.0, "n": 10},
        "experiment": {"kind": "simulate", "strategy": {"modulated": {"gamma": 1.0, "d_max": 0.5}}},
        "seed": 17
    }));
    for r in csv_rows(&out.join("trajectory.csv")) {
        assert!(r[3].parse::<f64>().unwrap() <= 0.5 + 1e-12);
    }
}

#[test]
fn kelly_all_loss_override() {
    let (_d, out) = ok(&serde_json::json!({
        "distribution": coin(0.6),
        "simulation": {"v0": 1.0, "n": 10},
        "experiment": {
            "kind": "simulate",
            "strategy": {"markowitz": {"K": 0.2}},
            "returns": vec![-1.0; 10]
        }
    }));
    let stats = read_json(&out.join("path_stats.json"));
    let d = stats["result"]["max_pct_drawdown"].as_f64().unwrap();
    assert!((d - (1.0 - 0.8f64.powi(10))).abs() < 1e-12);
    assert!((d - 0.89).abs() < 0.005);
}

#[test]
fn simulate_without_seed_is_a_config_error() {
    let (code, err) = failing(&serde_json::json!({
        "distribution": coin(0.6),
        "simulation": {"v0": 1.0, "n": 10},
        "experiment": {"kind": "simulate", "strategy": {"markowitz": {"K": 0.2}}}
    }));
    assert_eq!(code, 2);
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn inadmissible_strategy_is_rejected_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = ddlab(
        &serde_json::json!({
            "distribution": coin(0.6),
            "simulation": {"v0": 1.0, "n": 10},
            "experiment": {"kind": "simulate", "strategy": {"markowitz": {"K": 1.5}}},
            "seed": 1
        }),
        dir.path(),
        &[],
    );
    assert_eq!(output.status.code(), Some(2));
    assert!(!out.join("trajectory.csv").exists());
}

#[test]
fn markowitz_sweep_matches_two_stage_closed_forms() {
    let (_d, out) = ok(&serde_json::json!({
        "distribution": coin(0.6),
        "simulation": {"v0": 1.0, "n": 2},
        "experiment": {"kind": "sweep_markowitz", "k_grid": [0.0, 0.5, 1.0]},
        "backend": {"method": "exact"}
    }));
    let rows = csv_rows(&out.join("markowitz_curve.csv"));
    assert_eq!(rows.len(), 3);
    for r in rows {
        let k: f64 = r[0].parse().unwrap();
        let want_r = (1.0 + k * 0.2).powi(2) - 1.0;
        let want_d = k * 0.4 * (2.0 - k + k * 0.6);
        assert!((r[1].parse::<f64>().unwrap() - want_r).abs() < 1e-10);
        assert!((r[2].parse::<f64>().unwrap() - want_d).abs() < 1e-10);
    }
}

#[test]
fn empty_sweep_grid_is_rejected() {
    let (code, _) = failing(&serde_json::json!({
        "distribution": coin(0.6),
        "simulation": {"v0": 1.0, "n": 2},
        "experiment": {"kind": "sweep_markowitz", "k_grid": []},
        "backend": {"method": "exact"}
    }));
    assert_eq!(code, 2);
}

#[test]
fn frontier_flags_infeasible_targets_and_still_succeeds() {
    let (_d, out) = ok(&serde_json::json!({
        "distribution": coin(0.6),
        "simulation": {"v0": 1.0, "n": 2},
        "experiment": {
            "kind": "frontier",
            "targets": [0.36, 0.999],
            "tolerance": 1e-3,
            "gamma_grid": {"span": {"points": 21}},
            "dmax_grid": [0.5, 0.55, 0.5625, 0.575, 0.6]
        },
        "backend": {"method": "exact"}
    }));
    let opt = read_json(&out.join("frontier_optimum.json"));
    let res = opt["result"].as_array().unwrap();
    let best = res[0]["optimum"]["estimate"]["mean_return"]
        .as_f64()
        .unwrap();
    assert!(best >= 0.2179, "{best}");
    assert!(res[1]["optimum"].is_null());
    assert!(!res[1]["infeasible"]["nearest"]
        .as_array()
        .unwrap()
        .is_empty());

    let grid = csv_rows(&out.join("frontier_grid.csv"));
    assert_eq!(grid.len(), 21 * 5);
}

#[test]
fn certify_reports_the_two_stage_gap() {
    let (_d, out) = ok(&serde_json::json!({
        "distribution": coin(0.6),
        "simulation": {"v0": 1.0, "n": 2},
        "experiment": {
            "kind": "certify",
            "gains": [0.5],
            "gamma_grid": {"explicit": [1.0]},
            "dmax_grid": [0.5625]
        },
        "backend": {"method": "exact"}
    }));
    let report = &read_json(&out.join("certify.json"))["result"][0];
    assert!((report["return_gap"].as_f64().unwrap() - 0.00796875).abs() < 1e-12);
    assert_eq!(report["strict"], true);
}

#[test]
fn verify_n2_single_point_and_boundary() {
    let (_d, out) = ok(&serde_json::json!({
        "experiment": {"kind": "verify_n2", "k_grid": [0.5], "p_grid": [0.6]}
    }));
    let r = read_json(&out.join("verify_n2.json"));
    assert_eq!(r["result"]["passed"], true);
    assert!((r["result"]["min_gap"].as_f64().unwrap() - 0.00796875).abs() < 1e-15);

    let (code, err) = failing(&serde_json::json!({
        "experiment": {"kind": "verify_n2", "k_grid": [0.5], "p_grid": [0.5]}
    }));
    assert_eq!(code, 2);
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("p = 0.5"));
}

#[test]
fn outputs_embed_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "distribution": coin(0.55),
        "simulation": {"v0": 1.0, "n": 30},
        "experiment": {"kind": "sweep_markowitz", "k_grid": [0.25, 0.5]},
        "backend": {"method": "monte_carlo", "paths": 1000, "seed": 5}
    });
    let (output, out) = ddlab(&config, dir.path(), &["--seed", "99"]);
    assert!(output.status.success());
    let text = std::fs::read_to_string(out.join("markowitz_curve.csv")).unwrap();
    let first = text.lines().next().unwrap();
    let embedded: Value = serde_json::from_str(first.strip_prefix("# config=").unwrap()).unwrap();
    assert_eq!(embedded["seed"], 99);
    assert_eq!(embedded["backend"]["seed"], 99);
    assert_eq!(
        embedded["experiment"]["k_grid"],
        config["experiment"]["k_grid"]
    );
}

#[test]
fn unreadable_config_is_a_config_error() {
    let output = Command::new(env!("CARGO_BIN_EXE_ddlab"))
        .args(["--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}
