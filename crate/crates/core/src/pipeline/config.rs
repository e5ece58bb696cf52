use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::dicom::{DEFAULT_HI_PCT, DEFAULT_LO_PCT};
use crate::image_ops::{FRAME_HEIGHT, FRAME_WIDTH};
use crate::lung::{ClassicalParams, MaskBackend, DEFAULT_MARGIN};
use crate::metrics::{Aggregate, DEFAULT_THRESHOLD};
use crate::splits::Grouping;

/// Settings for every stage. Loaded from TOML; the CLI overrides individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input_root: Option<PathBuf>,
    pub output_root: Option<PathBuf>,
    /// Rule table file; the built-in table when absent.
    pub rules: Option<PathBuf>,
    /// CSV `patient_id,sop_instance_uid,covid_label`.
    pub labels: Option<PathBuf>,
    pub mask: MaskBackend,
    pub frame_width: usize,
    pub frame_height: usize,
    pub letterbox: bool,
    pub window_lo: f64,
    pub window_hi: f64,
    pub crop_margin: usize,
    pub k: usize,
    pub seed: u64,
    pub grouping: Grouping,
    pub threshold: f64,
    pub aggregate: Aggregate,
    pub predictions: Vec<PathBuf>,
    pub workers: usize,
    pub follow_symlinks: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_root: None,
            output_root: None,
            rules: None,
            labels: None,
            mask: MaskBackend::Classical(ClassicalParams::default()),
            frame_width: FRAME_WIDTH,
            frame_height: FRAME_HEIGHT,
            letterbox: false,
            window_lo: DEFAULT_LO_PCT,
            window_hi: DEFAULT_HI_PCT,
            crop_margin: DEFAULT_MARGIN,
            k: 5,
            seed: 0,
            grouping: Grouping::Patient,
            threshold: DEFAULT_THRESHOLD,
            aggregate: Aggregate::Mean,
            predictions: vec![],
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            follow_symlinks: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn output_root(&self) -> Result<&Path, PipelineError> {
        self.output_root.as_deref().ok_or_else(|| PipelineError::Config("output_root is required".into()))
    }

    pub fn input_root(&self) -> Result<&Path, PipelineError> {
        self.input_root.as_deref().ok_or_else(|| PipelineError::Config("input_root is required".into()))
    }

    /// Checks the invariants shared by all stages.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let out = self.output_root()?;
        if let Some(input) = &self.input_root {
            let (a, b) = (absolute(input), absolute(out));
            if a == b {
                return bad("output_root must differ from input_root".into());
            }
            if b.starts_with(&a) {
                return bad("output_root must not lie inside input_root".into());
            }
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.workers < 1 {
            return bad("workers must be at least 1".into());
        }
        if self.frame_width < 1 || self.frame_height < 1 {
            return bad("frame dimensions must be positive".into());
        }
        if !(0.0 <= self.window_lo && self.window_lo < self.window_hi && self.window_hi <= 1.0) {
            return bad(format!("window percentiles must satisfy 0 <= lo < hi <= 1, got {} and {}", self.window_lo, self.window_hi));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if let MaskBackend::Neural { threshold, .. } = &self.mask {
            if !(0.0..=1.0).contains(threshold) {
                return bad(format!("mask threshold must lie in [0, 1], got {threshold}"));
            }
        }
        Ok(())
    }
}

/// Lexically absolute form of `p`, with `.` and `..` resolved where possible.
fn absolute(p: &Path) -> PathBuf {
    let base = std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    base.canonicalize().unwrap_or(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(input: &str, output: &str) -> RunConfig {
        RunConfig { input_root: Some(input.into()), output_root: Some(output.into()), ..RunConfig::default() }
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = RunConfig::from_toml("output_root = \"out\"\nk = 3\n[mask]\nkind = \"classical\"\ndisk_radius = 5\n").unwrap();
        assert_eq!(c.k, 3);
        assert_eq!(c.frame_width, 512);
        assert_eq!(c.frame_height, 640);
        match &c.mask {
            MaskBackend::Classical(p) => assert_eq!((p.disk_radius, p.blur_size), (5, 5)),
            other => panic!("{other:?}"),
        }
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        let n = RunConfig::from_toml("[mask]\nkind = \"neural\"\nmodel = \"m.onnx\"\nthreshold = 0.5\n").unwrap();
        assert_eq!(n.mask, MaskBackend::Neural { model: "m.onnx".into(), threshold: 0.5 });
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn invariants() {
        assert!(cfg("/data/in", "/data/out").validate().is_ok());
        assert!(cfg("/data/in", "/data/in").validate().is_err());
        assert!(cfg("/data/in", "/data/in/../in").validate().is_err());
        assert!(cfg("/data/in", "/data/in/out").validate().is_err());
        assert!(RunConfig { k: 1, ..cfg("/a", "/b") }.validate().is_err());
        assert!(RunConfig { workers: 0, ..cfg("/a", "/b") }.validate().is_err());
        assert!(RunConfig { window_lo: 0.5, window_hi: 0.5, ..cfg("/a", "/b") }.validate().is_err());
        assert!(RunConfig { output_root: None, ..cfg("/a", "/b") }.validate().is_err());
    }
}
