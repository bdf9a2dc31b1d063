//! Run manifest: config echo, version, timing, pass/fail summary, file
//! inventory with content hashes.
//!
//! The manifest is always written last, after every data file of the
//! command, with the usual atomic temp-then-rename. It carries wall-clock
//! timestamps, so it is run metadata: determinism guarantees apply to the
//! data files it inventories, not to the manifest itself.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{atomic_write, sha256_hex};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
    pub files: Vec<FileEntry>,
}

pub fn now_unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Hashes the named data files (already on disk) and writes the manifest.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    started_unix_ms: u128,
    data_files: &[&str],
    summary: Option<serde_json::Value>,
) -> Result<(), CliError> {
    let mut files = Vec::with_capacity(data_files.len());
    for name in data_files {
        let contents = std::fs::read(out_dir.join(name))?;
        files.push(FileEntry { name: (*name).to_string(), sha256: sha256_hex(&contents) });
    }
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        started_unix_ms,
        finished_unix_ms: now_unix_ms(),
        config,
        summary,
        files,
    };
    let mut body = serde_json::to_string_pretty(&manifest)?;
    body.push('\n');
    atomic_write(&out_dir.join(MANIFEST_FILE), body.as_bytes())
}
