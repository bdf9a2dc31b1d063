//! `verify`: run the invariant suite and serialize the outcome.

use hermflow_core::verify::{run_all, VerifyConfig};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::atomic_write;
use crate::manifest::{now_unix_ms, write_manifest};

pub const VERIFY_FILE: &str = "verify.json";

/// Sample counts for the CLI run; the full-size suite lives in the test
/// harness, this keeps the pipeline interactive.
const TRIALS: usize = 300;
const FLOW_TRIALS: usize = 2;

#[derive(Serialize)]
struct VerifyOutput {
    seed: u64,
    dims: Vec<usize>,
    trials: usize,
    flow_trials: usize,
    invariants: Vec<InvariantOutput>,
    all_pass: bool,
}

#[derive(Serialize)]
struct InvariantOutput {
    module: String,
    name: String,
    residual: f64,
    tolerance: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Runs every module's invariant checks at the configured dimension set and
/// writes `verify.json`. Exit is zero only when every invariant passes.
pub fn cmd_verify(config: &RunConfig) -> Result<(), CliError> {
    let started = now_unix_ms();
    let tol = config.tolerances()?;
    let mut dims = vec![2, 4, 6];
    if !dims.contains(&config.dim) {
        dims.push(config.dim);
    }
    dims.sort_unstable();

    let cfg = VerifyConfig {
        seed: config.seed,
        dims: dims.clone(),
        trials: TRIALS,
        flow_trials: FLOW_TRIALS,
        tol,
    };
    let reports = run_all(&cfg);
    let all_pass = reports.iter().all(|r| r.pass);
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{}::{}", r.module, r.name))
        .collect();

    let output = VerifyOutput {
        seed: config.seed,
        dims,
        trials: TRIALS,
        flow_trials: FLOW_TRIALS,
        invariants: reports
            .iter()
            .map(|r| InvariantOutput {
                module: r.module.to_string(),
                name: r.name.to_string(),
                residual: if r.residual.is_finite() { r.residual } else { -1.0 },
                tolerance: r.tolerance,
                pass: r.pass,
                error: r.error.clone(),
            })
            .collect(),
        all_pass,
    };
    let mut body = serde_json::to_string_pretty(&output)?;
    body.push('\n');
    atomic_write(&config.output_dir.join(VERIFY_FILE), body.as_bytes())?;

    let summary = serde_json::json!({
        "passed": reports.iter().filter(|r| r.pass).count(),
        "failed": failed,
    });
    write_manifest(
        &config.output_dir,
        "verify",
        config,
        started,
        &[VERIFY_FILE],
        Some(summary),
    )?;

    if all_pass {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{} invariant(s) failed: {}",
            failed.len(),
            failed.join(", ")
        )))
    }
}
