//! Deterministic artifact encoding: every file carries the software version
//! and the hash of the resolved config.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind};

pub const SOFTWARE: &str = concat!("holomera ", env!("CARGO_PKG_VERSION"));

/// Config with output location stripped; this is what gets hashed and embedded.
pub fn canonical(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { out: None, ..cfg.clone() }
}

/// SHA-256 of the canonical config JSON, lowercase hex.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(&canonical(cfg)).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    software: &'static str,
    config_hash: &'a str,
    experiment: ExperimentKind,
    config: &'a ExperimentConfig,
    result: &'a T,
}

/// Artifacts of one run, held in memory until written.
#[derive(Clone, Debug)]
pub struct ArtifactSet {
    pub kind: ExperimentKind,
    pub hash: String,
    config: ExperimentConfig,
    files: Vec<(String, Vec<u8>)>,
}

impl ArtifactSet {
    pub fn new(kind: ExperimentKind, cfg: &ExperimentConfig) -> Self {
        Self { kind, hash: config_hash(cfg), config: canonical(cfg), files: Vec::new() }
    }

    /// JSON document wrapping `result`, pretty printed with a trailing newline.
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> crate::Result<()> {
        let doc = Document { software: SOFTWARE, config_hash: &self.hash, experiment: self.kind, config: &self.config, result };
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// CSV body (header first) behind one `#` provenance line.
    pub fn csv(&mut self, name: &str, body: &str) {
        let mut text = format!("# software={SOFTWARE} config_hash={} experiment={}\n", self.hash, self.kind);
        text.push_str(body);
        if !text.ends_with('\n') {
            text.push('\n');
        }
        self.files.push((name.to_string(), text.into_bytes()));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.0.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }

    /// Write every file under `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> crate::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes)?;
            out.push(path);
        }
        Ok(out)
    }
}

/// Float formatting used in every CSV column.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}
