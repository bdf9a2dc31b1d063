//! `generate`: seeded field construction.

use hermflow_core::{random_pair, SplitMix64};

use super::FieldRecord;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{atomic_write, matrix_to_rows};
use crate::manifest::{now_unix_ms, write_manifest};

pub const FIELD_FILE: &str = "field.json";

/// Draws `num_points` compatible pairs by pulling the standard structure
/// back along seeded random frames and writes them to `field.json`.
/// Point seeds derive from the master seed and the point id, so the file is
/// byte-identical across runs with the same configuration.
pub fn cmd_generate(config: &RunConfig) -> Result<(), CliError> {
    let started = now_unix_ms();
    let tol = config.tolerances()?;
    let mut records = Vec::with_capacity(config.num_points);
    for i in 0..config.num_points {
        let point_seed = SplitMix64::derive(config.seed, i as u64).next_u64();
        let (pair, frame) = random_pair(point_seed, config.dim, config.spread, &tol)?;
        records.push(FieldRecord {
            point_id: i as u64,
            weight: 1.0,
            g: matrix_to_rows(pair.metric()),
            omega: matrix_to_rows(pair.form()),
            frame: matrix_to_rows(&frame),
        });
    }
    let mut body = serde_json::to_string_pretty(&records)?;
    body.push('\n');
    atomic_write(&config.output_dir.join(FIELD_FILE), body.as_bytes())?;
    write_manifest(&config.output_dir, "generate", config, started, &[FIELD_FILE], None)?;
    Ok(())
}
