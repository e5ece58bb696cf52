//! Curation of chest-radiograph DICOM collections into a standardized image dataset
//! with an audit manifest, patient-grouped cross-validation folds and evaluation
//! reports.
//!
//! Stages communicate only through the manifest (see [`manifest`]) and the files it
//! references; [`pipeline`] wires them together.

pub mod dicom;
pub mod identity;
pub mod image_ops;
pub mod lung;
pub mod manifest;
pub mod metrics;
pub mod onnx;
pub mod phantom;
pub mod raster;
pub mod splits;
pub mod stats;
pub mod triage;
pub mod fixtures;
pub mod pipeline;
