//! End-to-end runs of the `pbe` binary: exit codes, output files and
//! determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pbe_core::{delta_c, Mm1Cost, Mm1CostParams, TrafficEnvironment};
use serde_json::{json, Value};

fn etc_config() -> Value {
    json!({
        "schema_version": 1,
        "traffic": { "theta": 0.3, "lambda_total": 2400.0 },
        "cost_model": { "mm1": { "mu_h": 1700.0, "mu_l": 1700.0, "vot": 50.0 } },
        "game": { "p_t_l": 0.5, "p_d": 5.0, "f_l": 100.0 },
        "verify": {
            "checks": ["grid", "dynamics", "draws", "queue"],
            "draws": 8,
            "queue": { "arrival_rate": 720.0, "service_rate": 1700.0, "horizon": 200000, "rel_tol": 0.05 }
        },
        "sweep": { "axes": [
            { "variable": "p_t_l", "min": 0.01, "max": 3.0, "steps": 40 },
            { "variable": "p_d", "min": 0.01, "max": 100.0, "steps": 30, "scale": "log" }
        ]}
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    path
}

fn pbe(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbe"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .args(args)
        .output()
        .unwrap()
}

fn run(cfg: &Value, args: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), cfg);
    let out = pbe(&path, &dir.path().join("out"), args);
    (out, dir)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(dir: &tempfile::TempDir, name: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.path().join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn solve_reports_b2_for_the_toll_lane_example() {
    let (o, dir) = run(&etc_config(), &["solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&dir, "equilibrium.json");
    assert_eq!(doc["equilibrium"]["regime"]["label"], "B2");
    assert_eq!(doc["metadata"]["config_sha256"].as_str().unwrap().len(), 64);
    assert!(doc["equilibrium"]["derived"]["sigma_hat"].is_f64());
}

#[test]
fn solve_prints_json_unless_quiet() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &etc_config());
    let o = Command::new(env!("CARGO_BIN_EXE_pbe"))
        .args(["solve", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    let written: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("equilibrium.json")).unwrap())
            .unwrap();
    assert_eq!(printed, written);
}

#[test]
fn invalid_theta_is_a_config_error_naming_the_field() {
    let mut cfg = etc_config();
    cfg["traffic"]["theta"] = json!(1.2);
    let (o, _dir) = run(&cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("theta"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_rejected() {
    let mut cfg = etc_config();
    cfg["game"]["p_tl"] = json!(0.5);
    let (o, _dir) = run(&cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("p_tl"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pbe(&dir.path().join("absent.json"), dir.path(), &["solve"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn price_at_the_incentive_is_a_boundary() {
    let env = TrafficEnvironment::new(0.3, 2400.0).unwrap();
    let m = Mm1Cost::new(Mm1CostParams::new(1700.0, 1700.0, 50.0).unwrap());
    let dc0 = delta_c(&env, &m, 0.0).unwrap().as_f64();
    let mut cfg = etc_config();
    cfg["game"]["p_t_l"] = json!(dc0);
    for cmd in ["solve", "classify"] {
        let (o, _dir) = run(&cfg, &[cmd]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stderr(&o).contains("A/B boundary"), "{}", stderr(&o));
    }
}

#[test]
fn reversed_server_speeds_violate_assumptions() {
    let mut cfg = etc_config();
    cfg["cost_model"]["mm1"] = json!({ "mu_h": 1000.0, "mu_l": 3000.0, "vot": 50.0 });
    let (o, _dir) = run(&cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn verify_passes_with_defaults() {
    let (o, dir) = run(&etc_config(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&dir, "verify.json");
    assert_eq!(doc["passed"], true);
    let names: Vec<&str> = doc["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "solver_self_check",
            "grid_search",
            "best_response_dynamics",
            "oracle_equivalence",
            "queue_simulation"
        ]
    );
}

#[test]
fn corrupted_bisection_tolerance_fails_verification() {
    let mut cfg = etc_config();
    cfg["solver"] = json!({ "bisection_tol": 0.1 });
    cfg["verify"]["checks"] = json!(["draws"]);
    cfg["verify"]["draws"] = json!(20);
    let (o, dir) = run(&cfg, &["verify"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert_eq!(read_json(&dir, "verify.json")["passed"], false);
}

#[test]
fn regime_map_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &etc_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(pbe(&path, &a, &["regime-map"]).status.code(), Some(0));
    assert_eq!(pbe(&path, &b, &["regime-map"]).status.code(), Some(0));
    for f in ["regime_map.svg", "sweep.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let svg = std::fs::read_to_string(a.join("regime_map.svg")).unwrap();
    assert!(svg.contains("region-B2") && !svg.contains("region-B3"));
    assert!(svg.contains("(USD)"));
}

#[test]
fn regime_map_requires_price_and_cost_axes() {
    let mut cfg = etc_config();
    cfg["sweep"]["axes"] = json!([{ "variable": "p_t_l", "min": 0.1, "max": 3.0, "steps": 10 }]);
    let (o, _dir) = run(&cfg, &["regime-map"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_csv_has_the_documented_header() {
    let (o, dir) = run(&etc_config(), &["sweep"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p_t_l,p_d,theta,F_l,regime,sigma_l_star,sigma_dH_star,u_l,u_h,u_d,status"
    );
    assert_eq!(lines.count(), 40 * 30);
    let doc = read_json(&dir, "sweep.json");
    assert_eq!(doc["cells"], 1200);
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let (o, dir) = run(&etc_config(), &["simulate-queue", "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&dir, "queue.json");
    assert_eq!(doc["metadata"]["seed"], 99);
    assert_eq!(doc["result"]["rng_seed"], 99);
}

#[test]
fn identical_runs_give_identical_json() {
    for cmd in ["solve", "verify", "simulate-queue", "sweep"] {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), &etc_config());
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        pbe(&path, &a, &[cmd]);
        pbe(&path, &b, &[cmd]);
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                std::fs::read(a.join(&name)).unwrap(),
                std::fs::read(b.join(&name)).unwrap(),
                "{cmd}: {name:?}"
            );
        }
    }
}

fn assert_no_non_finite(v: &Value, at: &str) {
    match v {
        Value::Number(n) => assert!(n.as_f64().is_some_and(f64::is_finite), "{at}"),
        Value::Array(a) => a
            .iter()
            .enumerate()
            .for_each(|(i, x)| assert_no_non_finite(x, &format!("{at}[{i}]"))),
        Value::Object(o) => o
            .iter()
            .for_each(|(k, x)| assert_no_non_finite(x, &format!("{at}.{k}"))),
        _ => {}
    }
}

#[test]
fn json_outputs_hold_only_finite_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &etc_config());
    let out = dir.path().join("out");
    for cmd in ["solve", "classify", "sweep", "verify", "simulate-queue"] {
        pbe(&path, &out, &[cmd]);
    }
    for name in [
        "equilibrium.json",
        "classification.json",
        "sweep.json",
        "verify.json",
        "queue.json",
    ] {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        for token in ["NaN", "Infinity", "inf"] {
            assert!(!text.contains(token), "{name} contains {token}");
        }
        assert_no_non_finite(&serde_json::from_str(&text).unwrap(), name);
    }
}
