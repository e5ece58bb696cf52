//! Lung masks: acquisition from one of three backends, background blanking, and
//! cropping to a lung-centred frame.

mod classical;
mod neural;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image_ops::resize_bilinear;
use crate::onnx::OnnxModel;
use crate::raster::GrayImage;

pub use classical::{classical_segment, ClassicalParams};
pub use neural::{neural_segment, DEFAULT_THRESHOLD};

pub const DEFAULT_MARGIN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("no mask file at {0}")]
    MaskNotFound(PathBuf),
    #[error("mask is {found_w}x{found_h} but the image is {expected_w}x{expected_h}")]
    MaskDimensionMismatch { expected_w: usize, expected_h: usize, found_w: usize, found_h: usize },
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("unreadable mask {path}: {message}")]
    MaskUnreadable { path: PathBuf, message: String },
    #[error("segmentation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("segmentation model contract violated: {0}")]
    ModelContractViolation(String),
}

impl MaskError {
    /// Short stable code for manifests and logs.
    pub fn code(&self) -> &'static str {
        match self {
            MaskError::MaskNotFound(_) => "MaskNotFound",
            MaskError::MaskDimensionMismatch { .. } => "MaskDimensionMismatch",
            MaskError::EmptyMask => "EmptyMask",
            MaskError::MaskUnreadable { .. } => "MaskUnreadable",
            MaskError::BackendUnavailable(_) => "BackendUnavailable",
            MaskError::ModelContractViolation(_) => "ModelContractViolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LungMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl LungMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be positive");
        assert_eq!(data.len(), width * height, "mask data length must equal width*height");
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// 0/255 rendering for persistence.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::new(self.width, self.height, self.data.iter().map(|&b| if b { 255 } else { 0 }).collect())
            .expect("mask dimensions are positive")
    }

    /// Any nonzero sample is foreground.
    pub fn from_image(img: &GrayImage) -> Self {
        Self::new(img.width(), img.height(), img.data().iter().map(|&v| v != 0).collect())
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    /// Grows by `margin` on every side, clamped to a `w` x `h` frame.
    pub fn expand(&self, margin: usize, w: usize, h: usize) -> Self {
        Self {
            x0: self.x0.saturating_sub(margin),
            y0: self.y0.saturating_sub(margin),
            x1: (self.x1 + margin).min(w - 1),
            y1: (self.y1 + margin).min(h - 1),
        }
    }
}

/// Tight box around the foreground, or `None` for an empty mask.
pub fn mask_bounding_box(mask: &LungMask) -> Option<BoundingBox> {
    let mut b: Option<BoundingBox> = None;
    for y in 0..mask.height {
        let row = &mask.data[y * mask.width..(y + 1) * mask.width];
        let (Some(first), Some(last)) = (row.iter().position(|&v| v), row.iter().rposition(|&v| v)) else {
            continue;
        };
        b = Some(match b {
            None => BoundingBox { x0: first, y0: y, x1: last, y1: y },
            Some(b) => BoundingBox { x0: b.x0.min(first), y0: b.y0, x1: b.x1.max(last), y1: y },
        });
    }
    b
}

fn check_dims(img: &GrayImage, mask: &LungMask) -> Result<(), MaskError> {
    if img.dimensions() != mask.dimensions() {
        return Err(MaskError::MaskDimensionMismatch {
            expected_w: img.width(),
            expected_h: img.height(),
            found_w: mask.width,
            found_h: mask.height,
        });
    }
    Ok(())
}

/// Zeroes every pixel outside the mask.
pub fn apply_mask(img: &GrayImage, mask: &LungMask) -> Result<GrayImage, MaskError> {
    check_dims(img, mask)?;
    let data = img.data().iter().zip(&mask.data).map(|(&v, &m)| if m { v } else { 0 }).collect();
    Ok(GrayImage::new(img.width(), img.height(), data).expect("same shape"))
}

/// Crops to the mask's bounding box grown by `margin`, then resizes to `out_w` x `out_h`.
pub fn crop_to_mask(
    img: &GrayImage,
    mask: &LungMask,
    margin: usize,
    out_w: usize,
    out_h: usize,
) -> Result<GrayImage, MaskError> {
    check_dims(img, mask)?;
    let bbox = mask_bounding_box(mask).ok_or(MaskError::EmptyMask)?.expand(margin, img.width(), img.height());
    let cropped = img.crop(bbox.x0, bbox.y0, bbox.x1, bbox.y1);
    Ok(resize_bilinear(&cropped, out_w, out_h))
}

/// Reads `<image_uid>.png` from `dir`; it must already be at the expected frame size.
pub fn load_external_mask(
    image_uid: &str,
    dir: &Path,
    expected_w: usize,
    expected_h: usize,
) -> Result<LungMask, MaskError> {
    let path = dir.join(format!("{image_uid}.png"));
    if !path.is_file() {
        return Err(MaskError::MaskNotFound(path));
    }
    let img = GrayImage::load_png(&path).map_err(|e| MaskError::MaskUnreadable { path: path.clone(), message: e.to_string() })?;
    if img.dimensions() != (expected_w, expected_h) {
        return Err(MaskError::MaskDimensionMismatch {
            expected_w,
            expected_h,
            found_w: img.width(),
            found_h: img.height(),
        });
    }
    Ok(LungMask::from_image(&img))
}

/// Which segmentation source a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskBackend {
    External { dir: PathBuf },
    Classical(ClassicalParams),
    Neural { model: PathBuf, threshold: f32 },
}

impl Default for MaskBackend {
    fn default() -> Self {
        MaskBackend::Classical(ClassicalParams::default())
    }
}

impl MaskBackend {
    pub fn name(&self) -> &'static str {
        match self {
            MaskBackend::External { .. } => "external",
            MaskBackend::Classical(_) => "classical",
            MaskBackend::Neural { .. } => "neural",
        }
    }
}

/// A backend ready to produce masks. Neural models are decoded once and shared
/// read-only between workers.
#[derive(Debug)]
pub enum Segmenter {
    External(PathBuf),
    Classical(ClassicalParams),
    Neural { model: OnnxModel, threshold: f32 },
}

impl Segmenter {
    pub fn open(backend: &MaskBackend) -> Result<Self, MaskError> {
        Ok(match backend {
            MaskBackend::External { dir } => {
                if !dir.is_dir() {
                    return Err(MaskError::BackendUnavailable(format!("mask directory {} does not exist", dir.display())));
                }
                Segmenter::External(dir.clone())
            }
            MaskBackend::Classical(p) => Segmenter::Classical(p.clone()),
            MaskBackend::Neural { model, threshold } => {
                let m = OnnxModel::load(model).map_err(|e| MaskError::BackendUnavailable(e.to_string()))?;
                Segmenter::Neural { model: m, threshold: *threshold }
            }
        })
    }

    pub fn segment(&self, image_uid: &str, img: &GrayImage) -> Result<LungMask, MaskError> {
        match self {
            Segmenter::External(dir) => load_external_mask(image_uid, dir, img.width(), img.height()),
            Segmenter::Classical(p) => classical_segment(img, p),
            Segmenter::Neural { model, threshold } => neural_segment(model, img, *threshold),
        }
    }
}
