//! Subcommand implementations shared by the binary and the test suites.

pub mod energy;
pub mod generate;
pub mod integrate;
pub mod verify;

pub use energy::cmd_energy;
pub use generate::cmd_generate;
pub use integrate::cmd_integrate;
pub use verify::cmd_verify;

use hermflow_core::{HermitianPair, Tolerances};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::rows_to_matrix;

/// One field sample point as stored in `field.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldRecord {
    pub point_id: u64,
    pub weight: f64,
    pub g: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub frame: Vec<Vec<f64>>,
}

pub(crate) fn load_field(
    path: &std::path::Path,
    tol: &Tolerances,
) -> Result<Vec<(FieldRecord, HermitianPair)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read field file {}: {e}", path.display()))
    })?;
    let records: Vec<FieldRecord> = serde_json::from_str(&text).map_err(|e| {
        CliError::Validation(format!("invalid field file {}: {e}", path.display()))
    })?;
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        let g = rows_to_matrix(&record.g)?;
        let omega = rows_to_matrix(&record.omega)?;
        let pair = HermitianPair::new_with(g, omega, tol).map_err(|e| {
            CliError::Validation(format!("field point {}: {e}", record.point_id))
        })?;
        out.push((record, pair));
    }
    Ok(out)
}
