//! Stage orchestration. Each stage reads the manifest (and the files it references)
//! from the output root, does its work on a bounded worker pool and writes its
//! columns and artifacts back. Results are collected in manifest order, so outputs
//! do not depend on the worker count.
//!
//! Column ownership:
//!
//! | stage      | writes                                                               |
//! |------------|----------------------------------------------------------------------|
//! | ingest     | image_uid, session_id, patient_id, covid_label, source_path          |
//! | triage     | view; status and status_reason for non-frontal rows                  |
//! | preprocess | status (frontal rows), output_image_path, mask_path, processing_flags |
//!
//! A stage clears the columns of every later stage, so rerunning it reproduces its
//! own output exactly.

mod config;
mod labels;
mod report;
mod schema;
mod stages;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::RunConfig;
pub use labels::{LabelTable, LABEL_COLUMNS};
pub use report::{read_metrics, write_metrics, MetricsRow, METRICS_COLUMNS};
pub use schema::schema_text;
pub use stages::{evaluate, ingest, preprocess, report, run, split, triage, FrameMeta, SKIP_LOG_COLUMNS, STEP_ORDER};

use crate::dicom::ScanError;
use crate::lung::MaskError;
use crate::manifest::ManifestError;
use crate::metrics::{MetricsError, PredictionFileError};
use crate::splits::{FoldFileError, SplitError};
use crate::triage::RuleSetError;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const META_FILE: &str = "manifest.meta.toml";
pub const SKIP_LOG_FILE: &str = "skipped.csv";
pub const IMAGES_DIR: &str = "images";
pub const MASKS_DIR: &str = "masks";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";

/// A stage ran before the stage that produces one of its inputs.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{stage} needs column {missing} ({detail}); run {producer} first")]
pub struct StageOrderError {
    pub stage: &'static str,
    pub missing: &'static str,
    pub producer: &'static str,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    StageOrder(#[from] StageOrderError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("rule table: {0}")]
    Rules(#[from] RuleSetError),
    #[error("mask backend: {0}")]
    Mask(MaskError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Folds(#[from] FoldFileError),
    #[error(transparent)]
    Predictions(#[from] PredictionFileError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl PipelineError {
    pub(crate) fn output(path: &Path, message: impl ToString) -> Self {
        PipelineError::Output { path: path.to_path_buf(), message: message.to_string() }
    }
}

/// What a stage did. Any warning makes the run partial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub processed: usize,
    pub warnings: Vec<String>,
}

impl StageOutcome {
    pub fn is_partial(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Process exit status: 0 success, 1 partial (something was skipped), 2 fatal.
pub fn exit_code(result: &Result<Vec<StageOutcome>, PipelineError>) -> i32 {
    match result {
        Err(_) => 2,
        Ok(outcomes) if outcomes.iter().any(StageOutcome::is_partial) => 1,
        Ok(_) => 0,
    }
}
