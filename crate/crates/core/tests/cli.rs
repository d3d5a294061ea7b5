use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn vqe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vqe")).args(args).output().expect("spawn vqe")
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    vqe(&args)
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn two_spin_problem() -> Value {
    serde_json::json!({
        "hamiltonian": {
            "n_qubits": 2,
            "terms": [
                { "coeff": -1.0, "paulis": "XX" },
                { "coeff": -1.0, "paulis": "YY" },
                { "coeff": 1.0, "paulis": "ZZ" },
                { "coeff": 1.0, "paulis": "ZI" },
                { "coeff": 1.0, "paulis": "IZ" }
            ]
        }
    })
}

#[test]
fn h2_exact_run_reaches_ground_energy() {
    let tmp = TempDir::new().unwrap();
    let out = run("vqe", &configs().join("h2_vqe.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(tmp.path().join("result.json"));
    let e = r["energy"].as_f64().unwrap();
    let exact = r["exact_ground_energy"].as_f64().unwrap();
    assert!((e - exact).abs() < 1e-6, "{e} vs {exact}");
    assert!(r["converged"].as_bool().unwrap());
    let (header, rows) = csv_rows(tmp.path().join("trace.csv"));
    assert_eq!(header, ["evaluation", "value"]);
    assert_eq!(rows.len() as u64, r["evaluations"].as_u64().unwrap());
}

#[test]
fn h2_sampled_runs_land_near_ground_energy() {
    let runs = 20;
    let mut hits = 0;
    for seed in 0..runs {
        let tmp = TempDir::new().unwrap();
        let seed = seed.to_string();
        let out = run("vqe", &configs().join("h2_vqe_sampled.json"), tmp.path(), &["--seed", &seed]);
        assert_ne!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
        let r = read_json(tmp.path().join("result.json"));
        assert!(r["total_preparations"].as_u64().unwrap() > 0);
        let err = (r["energy"].as_f64().unwrap() - r["exact_ground_energy"].as_f64().unwrap()).abs();
        if err <= 3e-2 {
            hits += 1;
        }
    }
    assert!(hits * 10 >= runs * 9, "{hits}/{runs}");
}

#[test]
fn exact_flag_bypasses_sampling() {
    let tmp = TempDir::new().unwrap();
    let out = run("vqe", &configs().join("h2_vqe_sampled.json"), tmp.path(), &["--exact"]);
    assert_eq!(out.status.code(), Some(0));
    let r = read_json(tmp.path().join("result.json"));
    assert_eq!(r["total_preparations"].as_u64(), Some(0));
    assert!((r["energy"].as_f64().unwrap() - r["exact_ground_energy"].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn missing_input_file_leaves_no_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &serde_json::json!({
            "problem": { "integrals_path": "absent.txt" },
            "ansatz": { "family": "fermionic_ucc", "order": 2, "occupied": [0, 1] },
            "seed": 1
        }),
    );
    let out_dir = tmp.path().join("out");
    let out = run("vqe", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!out_dir.exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &serde_json::json!({ "mean": 0.0, "variance": 0.1, "gap": 1.0, "gapp": 2.0 }),
    );
    let out = run("certify", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gapp"));
}

#[test]
fn seed_is_mandatory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &serde_json::json!({ "problem": two_spin_problem(), "state": { "index": 1 }, "epsilon": 0.1 }),
    );
    assert_eq!(run("estimate", &cfg, &tmp.path().join("out"), &[]).status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(vqe(&["--help"]).status.code(), Some(0));
    assert_eq!(vqe(&["launch"]).status.code(), Some(1));
    assert_eq!(vqe(&["vqe"]).status.code(), Some(1));
}

#[test]
fn adiabatic_spectrum_matches_two_level_oracle() {
    let tmp = TempDir::new().unwrap();
    let out = run("adiabatic", &configs().join("avoided_crossing.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(tmp.path().join("spectrum.csv"));
    assert_eq!(header, ["a", "e0", "e1", "gap"]);
    assert_eq!(rows.len(), 1001);
    // A*(I/2 - Z/2 + eps X) + (1 - A)*(I/2 + Z/2) has gap sqrt((1 - 2A)^2 + 4 eps^2 A^2).
    let eps = 0.1f64;
    let oracle = |a: f64| ((1.0 - 2.0 * a).powi(2) + 4.0 * eps * eps * a * a).sqrt();
    let mut best = (f64::INFINITY, 0.0);
    for row in &rows {
        let a: f64 = row[0].parse().unwrap();
        let gap: f64 = row[3].parse().unwrap();
        assert!((gap - oracle(a)).abs() < 1e-12, "a = {a}");
        if gap < best.0 {
            best = (gap, a);
        }
    }
    let (oracle_gap, oracle_a) = (0..=1000)
        .map(|k| (oracle(k as f64 / 1000.0), k as f64 / 1000.0))
        .fold((f64::INFINITY, 0.0), |m, x| if x.0 < m.0 { x } else { m });
    assert!((best.0 - oracle_gap).abs() < 1e-12);
    assert!((best.1 - oracle_a).abs() < 1e-12);
}

#[test]
fn adiabatic_optimized_column_beats_linear() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run("adiabatic", &configs().join("avoided_crossing.json"), tmp.path(), &[]).status.code(), Some(0));
    let (header, rows) = csv_rows(tmp.path().join("success.csv"));
    assert_eq!(header, ["tau", "linear_success", "optimized_success", "evaluations", "converged", "params"]);
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let linear: f64 = row[1].parse().unwrap();
        let optimized: f64 = row[2].parse().unwrap();
        assert!(optimized >= linear, "tau {}: {optimized} < {linear}", row[0]);
    }
    let (header, rows) = csv_rows(tmp.path().join("paths.csv"));
    assert_eq!(header, ["schedule", "tau", "s", "value", "target_overlap"]);
    assert!(rows.iter().any(|r| r[0] == "optimized"));
}

#[test]
fn single_tau_gives_single_row() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = read_json(configs().join("avoided_crossing.json"));
    cfg["taus"] = serde_json::json!([20.0]);
    let path = write_config(tmp.path(), "cfg.json", &cfg);
    assert_eq!(run("adiabatic", &path, &tmp.path().join("out"), &[]).status.code(), Some(0));
    let (_, rows) = csv_rows(tmp.path().join("out/success.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn estimate_prints_expected_costs_and_samples() {
    let tmp = TempDir::new().unwrap();
    let out = run("estimate", &configs().join("two_spin_estimate.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for (name, cost) in [("separate", "10.000000"), ("paired", "6.000000"), ("merged", "8.000000")] {
        assert!(stdout.contains(&format!("{name}: ")) && stdout.contains(cost), "{stdout}");
    }
    let (_, rows) = csv_rows(tmp.path().join("expected.csv"));
    let scaled: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!((scaled[0] - 10.0).abs() < 1e-12);
    assert!((scaled[1] - 6.0).abs() < 1e-12);
    assert!((scaled[2] - 8.0).abs() < 1e-12);
    let report = read_json(tmp.path().join("report.json"));
    assert!((report["value"].as_f64().unwrap() + 1.0).abs() <= 0.2);
    assert!(fs::read_to_string(tmp.path().join("plan.txt")).unwrap().contains("# paired"));
}

#[test]
fn estimate_of_empty_hamiltonian_is_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &serde_json::json!({
            "problem": { "hamiltonian": { "n_qubits": 2, "terms": [] } },
            "state": { "index": 0 },
            "epsilon": 0.1,
            "seed": 3
        }),
    );
    assert_eq!(run("estimate", &cfg, &tmp.path().join("out"), &[]).status.code(), Some(0));
    let report = read_json(tmp.path().join("out/report.json"));
    assert_eq!(report["value"].as_f64(), Some(0.0));
    assert_eq!(report["total_preparations"].as_u64(), Some(0));
}

#[test]
fn estimate_budget_exhaustion_exits_two() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = read_json(configs().join("two_spin_estimate.json"));
    cfg["max_preparations"] = serde_json::json!(500);
    let path = write_config(tmp.path(), "cfg.json", &cfg);
    assert_eq!(run("estimate", &path, &tmp.path().join("out"), &[]).status.code(), Some(2));
    assert!(!tmp.path().join("out/report.json").exists());
}

#[test]
fn estimate_exact_flag_skips_sampling() {
    let tmp = TempDir::new().unwrap();
    let out = run("estimate", &configs().join("two_spin_estimate.json"), tmp.path(), &["--exact"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("expected.csv").exists());
    assert!(!tmp.path().join("report.json").exists());
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        assert_eq!(run("estimate", &configs().join("two_spin_estimate.json"), dir.path(), &[]).status.code(), Some(0));
        assert_ne!(run("vqe", &configs().join("h2_vqe_sampled.json"), &dir.path().join("vqe"), &[]).status.code(), Some(1));
    }
    for file in ["report.json", "expected.csv", "plan.txt", "vqe/result.json", "vqe/trace.csv"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn certify_example_bounds() {
    let tmp = TempDir::new().unwrap();
    let out = run("certify", &configs().join("certify_example.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let c = read_json(tmp.path().join("certificate.json"));
    assert_eq!(c["ground_overlap"].as_f64(), Some(0.7));
    assert!((c["weinstein"][0].as_f64().unwrap() + 1.6).abs() < 1e-15);
    assert!((c["weinstein"][1].as_f64().unwrap() + 0.4).abs() < 1e-15);
}

#[test]
fn certify_from_state_uses_exact_moments() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &serde_json::json!({ "problem": two_spin_problem(), "state": { "index": 1 }, "gap": 1.0 }),
    );
    assert_eq!(run("certify", &cfg, &tmp.path().join("out"), &[]).status.code(), Some(0));
    let c = read_json(tmp.path().join("out/certificate.json"));
    // <01|H|01> = -1 and H|01> = -|01> - 2|10>, so the variance is 4.
    assert!((c["inputs"]["mean"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!((c["inputs"]["variance"].as_f64().unwrap() - 4.0).abs() < 1e-12);
}
