//! End-to-end tests of the `lfi` binary: exit codes, machine-parsable error
//! tags, byte-identical reruns (acceptance criterion 11), the SNPE-A
//! early-termination exit code (the CLI half of acceptance criterion 5),
//! and the bench command's comparison table.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lfi"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lfi-cli-test-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(body).unwrap()).unwrap();
    path
}

fn toy_sim() -> serde_json::Value {
    serde_json::json!({"name": "gaussian_toy", "dim": 1, "prior_mean": 0.0, "prior_var": 1.0, "noise_var": 1.0})
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn unknown_simulator_exits_2_with_tag() {
    let dir = tmp_dir("badsim");
    let cfg = write_config(
        &dir,
        "bad.json",
        &serde_json::json!({
            "schema": 1, "seed": 1, "x0": [1.0],
            "simulator": {"name": "warp_drive"},
            "algorithm": {"name": "rejection", "epsilon": 1.0, "n_accept": 5}
        }),
    );
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).starts_with("E_CONFIG_SIMULATOR"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn unknown_algorithm_exits_2_with_tag() {
    let dir = tmp_dir("badalgo");
    let cfg = write_config(
        &dir,
        "bad.json",
        &serde_json::json!({
            "schema": 1, "seed": 1, "x0": [1.0],
            "simulator": toy_sim(),
            "algorithm": {"name": "quantum-leap"}
        }),
    );
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).starts_with("E_CONFIG_ALGORITHM"));
}

#[test]
fn malformed_json_exits_2_with_parse_tag() {
    let dir = tmp_dir("badjson");
    let path = dir.join("broken.json");
    fs::write(&path, "{not json").unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).starts_with("E_CONFIG_PARSE"));
}

/// Acceptance criterion 11: identical (config, seed) produce byte-identical
/// posterior.csv and traces.jsonl; the manifest's hash matches the input.
#[test]
fn criterion_11_byte_identical_reruns() {
    let dir = tmp_dir("determinism");
    let cfg = write_config(
        &dir,
        "snl.json",
        &serde_json::json!({
            "schema": 1, "seed": 7, "x0": [1.0], "theta_true": [0.5],
            "simulator": toy_sim(),
            "algorithm": {"name": "snl", "rounds": 2, "sims_per_round": 120,
                          "model": {"kind": "maf", "layers": 1, "hidden": [10]},
                          "n_posterior_samples": 200,
                          "train": {"minibatch": 40, "max_epochs": 40, "patience": 10,
                                     "validation_fraction": 0.15, "learning_rate": 0.01}}
        }),
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let status = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let pa = fs::read(out_a.join("posterior.csv")).unwrap();
    let pb = fs::read(out_b.join("posterior.csv")).unwrap();
    let ta = fs::read(out_a.join("traces.jsonl")).unwrap();
    let tb = fs::read(out_b.join("traces.jsonl")).unwrap();
    let pass = pa == pb && ta == tb;

    // Manifests exist and agree on the config hash (timestamps may differ).
    let ma: serde_json::Value =
        serde_json::from_slice(&fs::read(out_a.join("manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value =
        serde_json::from_slice(&fs::read(out_b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["config_hash"], mb["config_hash"]);

    println!(
        "acceptance criterion 11 (cli determinism): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "reruns produced different bytes");
}

/// The CLI half of acceptance criterion 5: an engineered round-2 correction
/// failure exits with code 4 and still writes the previous round's results.
#[test]
fn criterion_5_early_termination_exit_code() {
    let dir = tmp_dir("earlyterm");
    let cfg = write_config(
        &dir,
        "fail.json",
        &serde_json::json!({
            "schema": 1, "seed": 7, "x0": [1.0], "theta_true": [0.5],
            "simulator": toy_sim(),
            "algorithm": {"name": "snpe-a", "rounds": 2, "sims_per_round": 600,
                          "components": 1, "trunk": [16], "prior": "uniform",
                          "warm_start": false, "round_epochs": [120, 0],
                          "train": {"minibatch": 100, "max_epochs": 120, "patience": 15,
                                     "validation_fraction": 0.15, "learning_rate": 0.01}}
        }),
    );
    let out_dir = dir.join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    let code4 = out.status.code() == Some(4);
    let tagged = stderr_of(&out).starts_with("E_SNPEA_EARLY_TERMINATION");
    let written = out_dir.join("posterior.csv").exists()
        && out_dir.join("traces.jsonl").exists()
        && out_dir.join("manifest.json").exists();
    let traces = fs::read_to_string(out_dir.join("traces.jsonl")).unwrap();
    let single_round = traces.lines().count() == 1;
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
    let flagged = metrics["early_terminated"] == serde_json::json!(true);
    let pass = code4 && tagged && written && single_round && flagged;
    println!(
        "acceptance criterion 5 (cli exit code 4): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(
        pass,
        "code4 {code4}, tagged {tagged}, written {written}, single_round {single_round}, flagged {flagged}"
    );
}

#[test]
fn numeric_nonsense_is_a_validation_error() {
    let dir = tmp_dir("numnonsense");
    let cases = vec![
        serde_json::json!({"schema": 1, "seed": 1, "x0": [1.0],
            "simulator": {"name": "gaussian_toy", "prior_var": -1.0},
            "algorithm": {"name": "rejection", "epsilon": 1.0, "n_accept": 5}}),
        serde_json::json!({"schema": 1, "seed": 1, "x0": [1.0],
            "simulator": toy_sim(),
            "algorithm": {"name": "snpe-a", "rounds": 0, "sims_per_round": 100}}),
        serde_json::json!({"schema": 1, "seed": 1, "x0": [1.0],
            "simulator": toy_sim(),
            "algorithm": {"name": "snl", "rounds": 1, "sims_per_round": 100,
                           "model": {"kind": "mdn", "components": 0, "trunk": [5]}}}),
    ];
    for (i, body) in cases.into_iter().enumerate() {
        let cfg = write_config(&dir, &format!("c{i}.json"), &body);
        let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", stderr_of(&out));
        assert!(
            stderr_of(&out).starts_with("E_CONFIG"),
            "case {i}: {}",
            stderr_of(&out)
        );
    }
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tmp_dir("seedover");
    let cfg = write_config(
        &dir,
        "rej.json",
        &serde_json::json!({
            "schema": 1, "seed": 7, "x0": [1.0],
            "simulator": toy_sim(),
            "algorithm": {"name": "rejection", "epsilon": 0.5, "n_accept": 50}
        }),
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    assert!(bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_a)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--seed", "8"])
        .arg("--out")
        .arg(&out_b)
        .status()
        .unwrap()
        .success());
    assert_ne!(
        fs::read(out_a.join("posterior.csv")).unwrap(),
        fs::read(out_b.join("posterior.csv")).unwrap()
    );
}

#[test]
fn every_algorithm_name_resolves_and_runs() {
    let dir = tmp_dir("allalgos");
    let train = serde_json::json!({"minibatch": 40, "max_epochs": 30, "patience": 8,
                                    "validation_fraction": 0.15, "learning_rate": 0.01});
    let algos = vec![
        serde_json::json!({"name": "rejection", "epsilon": 0.5, "n_accept": 40, "regression_adjust": true}),
        serde_json::json!({"name": "smooth", "epsilon": 0.5, "n": 200, "kernel": "gaussian"}),
        serde_json::json!({"name": "mcmc-abc", "epsilon": 0.5, "n_steps": 2000, "thin": 4}),
        serde_json::json!({"name": "is-abc", "epsilon": 0.5, "n": 40,
                           "proposal_mean": [0.5], "proposal_var": [1.0]}),
        serde_json::json!({"name": "smc-abc", "schedule": [2.0, 1.0], "population": 100}),
        serde_json::json!({"name": "snpe-a", "rounds": 1, "sims_per_round": 150,
                           "components": 1, "trunk": [10], "train": train,
                           "n_posterior_samples": 100}),
        serde_json::json!({"name": "snpe-b", "rounds": 1, "sims_per_round": 150,
                           "components": 1, "trunk": [10], "train": train,
                           "n_posterior_samples": 100}),
        serde_json::json!({"name": "snl", "rounds": 1, "sims_per_round": 120,
                           "model": {"kind": "mdn", "components": 1, "trunk": [10]},
                           "train": train, "n_posterior_samples": 100}),
        serde_json::json!({"name": "maxvar-snl", "rounds": 2, "sims_per_round": 60,
                           "model": {"kind": "mdn", "components": 1, "trunk": [8]},
                           "train": {"minibatch": 30, "max_epochs": 20, "patience": 6,
                                      "validation_fraction": 0.2, "learning_rate": 0.01},
                           "ensemble": 2, "n_posterior_samples": 60}),
    ];
    for (i, algo) in algos.into_iter().enumerate() {
        let name = algo["name"].as_str().unwrap().to_string();
        let cfg = write_config(
            &dir,
            &format!("a{i}.json"),
            &serde_json::json!({
                "schema": 1, "seed": 11, "x0": [1.0], "theta_true": [0.5],
                "simulator": toy_sim(),
                "algorithm": algo
            }),
        );
        let out_dir = dir.join(format!("out{i}"));
        let out = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "algorithm {name} failed: {}",
            stderr_of(&out)
        );
        let posterior = fs::read_to_string(out_dir.join("posterior.csv")).unwrap();
        assert!(posterior.lines().count() > 1, "{name} wrote no samples");
    }
}

/// Omitting x0 derives the observation by simulating once at theta_true;
/// exercised on both applied simulators through the registry.
#[test]
fn x0_derived_from_theta_true_on_applied_simulators() {
    let dir = tmp_dir("derivedx0");
    let cases = vec![
        (
            "mg1",
            serde_json::json!({"name": "mg1"}),
            serde_json::json!([1.0, 5.0, 0.2]),
        ),
        (
            "lotka_volterra",
            serde_json::json!({"name": "lotka_volterra", "event_cap": 60000}),
            serde_json::json!([-1.6, -5.0, -1.0, -4.0]),
        ),
    ];
    for (name, sim, theta_true) in cases {
        let cfg = write_config(
            &dir,
            &format!("{name}.json"),
            &serde_json::json!({
                "schema": 1, "seed": 3, "theta_true": theta_true,
                "simulator": sim,
                "algorithm": {"name": "rejection", "epsilon": 1e6, "n_accept": 20}
            }),
        );
        let out_dir = dir.join(format!("out-{name}"));
        let out = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr_of(&out));
        assert!(out_dir.join("posterior.csv").exists());
    }
}

#[test]
fn bench_writes_comparison_curves() {
    let dir = tmp_dir("bench");
    let configs = dir.join("configs");
    fs::create_dir_all(&configs).unwrap();
    write_config(
        &configs,
        "a_rejection.json",
        &serde_json::json!({
            "schema": 1, "seed": 5, "x0": [1.0], "theta_true": [0.5],
            "simulator": toy_sim(),
            "algorithm": {"name": "rejection", "epsilon": 0.3, "n_accept": 200}
        }),
    );
    write_config(
        &configs,
        "b_smc.json",
        &serde_json::json!({
            "schema": 1, "seed": 5, "x0": [1.0], "theta_true": [0.5],
            "simulator": toy_sim(),
            "algorithm": {"name": "smc-abc", "schedule": [2.0, 1.0, 0.5], "population": 200}
        }),
    );
    let out = bin()
        .args(["bench", "--configs"])
        .arg(&configs)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let curves = fs::read_to_string(configs.join("curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algorithm,seed,cumulative_sims,neg_log_true_params"
    );
    let body: Vec<&str> = lines.collect();
    assert!(body.iter().any(|l| l.starts_with("rejection,5,")));
    assert!(body.iter().any(|l| l.starts_with("smc-abc,5,")));
    // SMC contributes one row per round.
    assert_eq!(body.iter().filter(|l| l.starts_with("smc-abc,")).count(), 3);
}

#[test]
fn bench_rejects_mismatched_simulators() {
    let dir = tmp_dir("benchmismatch");
    let configs = dir.join("configs");
    fs::create_dir_all(&configs).unwrap();
    write_config(
        &configs,
        "a.json",
        &serde_json::json!({
            "schema": 1, "seed": 5, "x0": [1.0], "theta_true": [0.5],
            "simulator": toy_sim(),
            "algorithm": {"name": "rejection", "epsilon": 0.5, "n_accept": 20}
        }),
    );
    write_config(
        &configs,
        "b.json",
        &serde_json::json!({
            "schema": 1, "seed": 5, "x0": [1.0], "theta_true": [0.5],
            "simulator": {"name": "gaussian_toy", "dim": 1, "prior_mean": 0.0,
                           "prior_var": 4.0, "noise_var": 1.0},
            "algorithm": {"name": "rejection", "epsilon": 0.5, "n_accept": 20}
        }),
    );
    let out = bin()
        .args(["bench", "--configs"])
        .arg(&configs)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).starts_with("E_CONFIG_MISMATCH"));
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("all checks passed"));
}
