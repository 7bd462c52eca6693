//! Batch front end: config handling, experiment dispatch and artifact output.
//!
//! Exit codes: 0 success, 2 invalid config, 3 numerical failure, 1 I/O
//! failure while writing artifacts. Failures are reported as one JSON object.

pub mod artifact;
pub mod config;
pub mod experiments;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use artifact::{config_hash, ArtifactSet, SOFTWARE};
pub use config::{validate, ExperimentConfig, ExperimentKind, ValidationReport, Violation};

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Default output directory.
pub const DEFAULT_OUT: &str = "out";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CliError {
    pub exit_code: i32,
    /// `invalid-config`, `numerical-failure` or `io`.
    pub kind: &'static str,
    /// Module that raised a numerical failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub module: Option<&'static str>,
    /// Library error variant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<&'static str>,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl CliError {
    pub fn invalid(violations: Vec<Violation>) -> Self {
        let message = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        Self { exit_code: EXIT_CONFIG, kind: "invalid-config", module: None, variant: None, message, violations }
    }

    pub fn config(key: &str, message: impl Into<String>) -> Self {
        Self::invalid(vec![Violation { key: key.into(), message: message.into() }])
    }

    pub fn numerical(module: &'static str, e: crate::Error) -> Self {
        if let crate::Error::Io(_) = e {
            return Self::io(e.to_string());
        }
        Self {
            exit_code: EXIT_NUMERICAL,
            kind: "numerical-failure",
            module: Some(module),
            variant: Some(e.code()),
            message: e.to_string(),
            violations: Vec::new(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { exit_code: EXIT_IO, kind: "io", module: None, variant: None, message: message.into(), violations: Vec::new() }
    }

    /// `{"error": {...}}` on one line.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wrap<'a> {
            software: &'static str,
            error: &'a CliError,
        }
        serde_json::to_string(&Wrap { software: SOFTWARE, error: self }).expect("error serializes")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

/// What a successful run produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub software: &'static str,
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub out_dir: String,
    pub artifacts: Vec<String>,
}

/// Parse, apply the seed override and range-check.
pub fn load(kind: ExperimentKind, text: &str, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let (cfg, errors) = config::parse(text, Some(kind));
    match cfg {
        Some(mut cfg) if errors.is_empty() => {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            Ok(cfg)
        }
        _ => Err(CliError::invalid(errors)),
    }
}

/// Run an experiment in memory.
pub fn compute(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ArtifactSet, CliError> {
    experiments::run(kind, cfg)
}

/// Full run: load, compute, then write artifacts to `out` (or the config's
/// `out`, or [`DEFAULT_OUT`]).
pub fn execute(kind: ExperimentKind, text: &str, out: Option<&Path>, seed: Option<u64>) -> Result<RunSummary, CliError> {
    let cfg = load(kind, text, seed)?;
    let dir: PathBuf = match (out, &cfg.out) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => PathBuf::from(DEFAULT_OUT),
    };
    let art = compute(kind, &cfg)?;
    art.write(&dir).map_err(|e| CliError::io(e.to_string()))?;
    Ok(RunSummary {
        software: SOFTWARE,
        experiment: kind,
        config_hash: art.hash.clone(),
        out_dir: dir.display().to_string(),
        artifacts: art.names().into_iter().map(String::from).collect(),
    })
}
