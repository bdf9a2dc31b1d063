//! File IO helpers: round-trip float formatting, atomic writes, content
//! hashes, and matrix (de)serialization as nested row-major arrays.

use std::path::Path;

use hermflow_core::SquareMatrix;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Round-trip decimal rendering: one leading digit plus 16 fractional
/// digits in scientific notation, 17 significant digits total.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes via a temp file in the same directory followed by a rename, so a
/// crash never leaves a half-written data file behind.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| std::path::PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Validation(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".tmp-{}", file_name.to_string_lossy()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(contents: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(contents);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn matrix_to_rows(m: &SquareMatrix) -> Vec<Vec<f64>> {
    m.rows()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<SquareMatrix, CliError> {
    SquareMatrix::from_rows(rows).map_err(|e| CliError::Validation(e.to_string()))
}
