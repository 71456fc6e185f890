//! JSON provenance sidecars.
//!
//! Every PGM the pipeline writes gets a `<file>.pgm.json` companion recording
//! shape, seed, the parameters that produced it, and hash links: `sha256` is
//! the digest of the PGM bytes themselves, `parent_sha256` points at the
//! input image, and `root_sha256` carries the original ground truth's digest
//! through the chain so `evaluate` can verify lineage end to end.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::AnnealSchedule;
use crate::samplers::Method;

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed sidecar: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// Sampled from the smoothing prior.
    Mrf { coupling_j: f64, schedule: AnnealSchedule },
    /// Gaussian degradation of a parent image.
    Degraded { sigma: f64, parent_sha256: String, root_sha256: String },
    /// Output of an annealed retrieval chain started from the parent.
    Restored {
        method: Method,
        sigma: f64,
        coupling_j: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        inertia_q: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        norm_exponent: Option<f64>,
        schedule: AnnealSchedule,
        initial: String,
        parent_sha256: String,
        root_sha256: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
    pub levels: u16,
    pub seed: u64,
    /// Digest of the companion PGM file's bytes, lowercase hex.
    pub sha256: String,
    pub provenance: Provenance,
}

impl Sidecar {
    /// Digest the original image carries through the chain: its own hash for
    /// a generated image, the recorded root otherwise.
    pub fn root_sha256(&self) -> &str {
        match &self.provenance {
            Provenance::Mrf { .. } => &self.sha256,
            Provenance::Degraded { root_sha256, .. } => root_sha256,
            Provenance::Restored { root_sha256, .. } => root_sha256,
        }
    }
}

/// Sidecar path convention: append `.json` to the PGM path.
pub fn sidecar_path(pgm_path: &Path) -> PathBuf {
    let mut os = pgm_path.as_os_str().to_os_string();
    os.push(".json");
    PathBuf::from(os)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_of_file(path: &Path) -> Result<String, SidecarError> {
    Ok(sha256_hex(&fs::read(path)?))
}

pub fn write_sidecar(pgm_path: &Path, sidecar: &Sidecar) -> Result<(), SidecarError> {
    let mut text = serde_json::to_string_pretty(sidecar)?;
    text.push('\n');
    fs::write(sidecar_path(pgm_path), text)?;
    Ok(())
}

pub fn read_sidecar(pgm_path: &Path) -> Result<Sidecar, SidecarError> {
    let text = fs::read_to_string(sidecar_path(pgm_path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads the sidecar if one exists next to the image.
pub fn try_read_sidecar(pgm_path: &Path) -> Result<Option<Sidecar>, SidecarError> {
    if sidecar_path(pgm_path).exists() {
        Ok(Some(read_sidecar(pgm_path)?))
    } else {
        Ok(None)
    }
}
