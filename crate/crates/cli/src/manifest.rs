//! Run manifest: everything needed to reproduce a sweep and verify its outputs.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use kiosk_core::engine::CellFailure;
use kiosk_core::ConfigDocument;

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

impl OutputFile {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let data = std::fs::read(path)?;
        Ok(OutputFile {
            file: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(&data)),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct FailedCell {
    pub cell_index: u64,
    pub u: f64,
    pub pi: f64,
    pub d: f64,
    pub m: f64,
    pub error: String,
}

impl From<&CellFailure> for FailedCell {
    fn from(f: &CellFailure) -> Self {
        FailedCell {
            cell_index: f.cell_index,
            u: f.cell.u,
            pi: f.cell.pi,
            d: f.cell.d,
            m: f.cell.m,
            error: f.error.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ConfigDocument,
    pub started_at: String,
    pub finished_at: String,
    pub elapsed_seconds: f64,
    /// Worker threads requested; `null` means the machine default.
    pub parallelism: Option<usize>,
    pub cells: usize,
    pub customers: u64,
    pub outputs: Vec<OutputFile>,
    pub failed_cells: Vec<FailedCell>,
}
