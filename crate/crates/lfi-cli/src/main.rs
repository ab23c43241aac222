//! Batch experiment runner: parse a config, execute a named algorithm on a
//! named simulator, write populations, traces and metrics, and run the
//! diagnostic suite.
//!
//! Exit codes: 0 success, 2 validation error, 3 runtime error, 4 SNPE-A
//! early termination (results still written). Errors print one
//! machine-parsable tag line on stderr.

mod config;
mod output;
mod runner;
mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use lfi_core::Error;

#[derive(Parser)]
#[command(
    name = "lfi",
    about = "Likelihood-free inference experiment runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every config in a directory and emit a comparison table.
    Bench {
        #[arg(long)]
        configs: PathBuf,
    },
    /// Run the built-in invariant suite.
    Selftest,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn fail(code: i32, tag: &str, message: String) -> ! {
    eprintln!("{tag}: {}", message.replace('\n', " "));
    std::process::exit(code);
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<&Path>) -> ExperimentConfig {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => fail(2, "E_CONFIG_READ", format!("{}: {e}", path.display())),
    };
    let mut cfg: ExperimentConfig = match serde_json::from_slice(&bytes) {
        Ok(c) => c,
        Err(e) => {
            let text = e.to_string();
            if text.contains("unknown variant") {
                fail(2, "E_CONFIG_ALGORITHM", text)
            }
            fail(2, "E_CONFIG_PARSE", text)
        }
    };
    if cfg.schema != 1 {
        fail(
            2,
            "E_CONFIG_SCHEMA",
            format!("unsupported schema {}", cfg.schema),
        );
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = Some(o.to_string_lossy().into_owned());
    }
    // Resolve the simulator early so bad names are validation errors.
    if let Err(e) = serde_json::from_value::<lfi_core::sim::SimulatorConfig>(cfg.simulator.clone())
    {
        fail(2, "E_CONFIG_SIMULATOR", e.to_string());
    }
    cfg
}

/// Canonical bytes for the manifest hash: the effective config after CLI
/// overrides, with the output location normalized out so the hash
/// identifies the experiment itself.
fn effective_config_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let mut canonical = cfg.clone();
    canonical.output_dir = None;
    serde_json::to_vec(&canonical).expect("config serializes")
}

fn run_one(cfg: &ExperimentConfig) -> (runner::RunOutcome, f64) {
    let start = std::time::Instant::now();
    match runner::run_algorithm(cfg) {
        Ok(out) => (out, start.elapsed().as_secs_f64()),
        Err(e) => {
            let msg = e.to_string();
            match e {
                Error::Numeric(ref m) if m.starts_with("E_CONFIG") => {
                    let tag = m
                        .split_whitespace()
                        .next()
                        .unwrap_or("E_CONFIG")
                        .to_string();
                    fail(2, &tag, msg)
                }
                Error::Shape { .. } => fail(2, "E_CONFIG_SHAPE", msg),
                _ => fail(3, "E_RUNTIME", msg),
            }
        }
    }
}

fn write_outputs(
    cfg: &ExperimentConfig,
    outcome: &runner::RunOutcome,
    wall: f64,
    started: u128,
) -> PathBuf {
    let dir = PathBuf::from(
        cfg.output_dir
            .clone()
            .unwrap_or_else(|| format!("lfi-out-{}", cfg.seed)),
    );
    if let Err(e) = fs::create_dir_all(&dir) {
        fail(
            3,
            "E_RUNTIME",
            format!("cannot create {}: {e}", dir.display()),
        );
    }
    let result: Result<(), Error> = (|| {
        output::write_posterior_csv(
            &dir.join("posterior.csv"),
            &outcome.posterior,
            &outcome.weights,
        )?;
        output::write_traces_jsonl(&dir.join("traces.jsonl"), &outcome.traces)?;
        output::write_metrics_json(
            &dir.join("metrics.json"),
            &output::Metrics {
                n_simulations: outcome.n_simulations,
                neg_log_true_params: outcome.neg_log_true_params,
                mmd: outcome.mmd,
                wall_clock_seconds: wall,
                early_terminated: outcome.early_terminated,
            },
        )?;
        output::write_manifest(
            &dir,
            &effective_config_bytes(cfg),
            &["posterior.csv", "traces.jsonl", "metrics.json"],
            started,
            now_ms(),
        )?;
        Ok(())
    })();
    if let Err(e) = result {
        fail(3, "E_RUNTIME", format!("writing outputs: {e}"));
    }
    dir
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<&Path>) -> i32 {
    let started = now_ms();
    let cfg = load_config(config, seed, out);
    let (outcome, wall) = run_one(&cfg);
    let dir = write_outputs(&cfg, &outcome, wall, started);
    if outcome.early_terminated {
        eprintln!(
            "E_SNPEA_EARLY_TERMINATION: returned previous round's estimate; results in {}",
            dir.display()
        );
        return 4;
    }
    println!("ok: results in {}", dir.display());
    0
}

fn cmd_bench(configs_dir: &Path) -> i32 {
    let mut entries: Vec<PathBuf> = match fs::read_dir(configs_dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => fail(
            2,
            "E_CONFIG_READ",
            format!("{}: {e}", configs_dir.display()),
        ),
    };
    entries.sort();
    if entries.is_empty() {
        fail(
            2,
            "E_CONFIG_READ",
            format!("no .json configs in {}", configs_dir.display()),
        );
    }
    let mut shared: Option<(serde_json::Value, Vec<f64>)> = None;
    let mut rows = String::from("algorithm,seed,cumulative_sims,neg_log_true_params\n");
    for path in &entries {
        let cfg = load_config(path, None, None);
        let theta_true = match &cfg.theta_true {
            Some(t) => t.clone(),
            None => fail(
                2,
                "E_CONFIG_THETA_TRUE",
                format!("{} lacks theta_true", path.display()),
            ),
        };
        match &shared {
            None => shared = Some((cfg.simulator.clone(), theta_true)),
            Some((sim, theta)) => {
                if *sim != cfg.simulator || *theta != theta_true {
                    fail(
                        2,
                        "E_CONFIG_MISMATCH",
                        format!("{} differs in simulator or theta_true", path.display()),
                    );
                }
            }
        }
        let (outcome, _) = run_one(&cfg);
        let name = cfg.algorithm.name();
        for t in &outcome.traces {
            let metric = t
                .neg_log_true_params
                .or(outcome.neg_log_true_params)
                .map_or(String::from("nan"), output::fmt_f64);
            rows.push_str(&format!(
                "{name},{},{},{metric}\n",
                cfg.seed, t.cumulative_simulations
            ));
        }
    }
    let out_path = configs_dir.join("curves.csv");
    if let Err(e) = fs::write(&out_path, rows) {
        fail(
            3,
            "E_RUNTIME",
            format!("writing {}: {e}", out_path.display()),
        );
    }
    println!("ok: wrote {}", out_path.display());
    0
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out.as_deref()),
        Command::Bench { configs } => cmd_bench(&configs),
        Command::Selftest => selftest::run_selftest(),
    };
    std::process::exit(code);
}
