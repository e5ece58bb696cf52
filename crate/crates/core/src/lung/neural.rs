use super::{LungMask, MaskError};
use crate::image_ops::resample_plane;
use crate::onnx::{Dim, OnnxModel, Tensor};
use crate::raster::GrayImage;

pub const DEFAULT_THRESHOLD: f32 = 0.5;

/// Runs a `1x1xHxW` probability model on `img` scaled to `[0, 1]`. Models with a fixed
/// spatial input size get a bilinearly resampled input, and outputs at a different
/// resolution are resampled back to the image frame before the inclusive threshold.
pub fn neural_segment(model: &OnnxModel, img: &GrayImage, threshold: f32) -> Result<LungMask, MaskError> {
    let (w, h) = img.dimensions();
    let input = model
        .inputs()
        .next()
        .ok_or_else(|| MaskError::ModelContractViolation("model declares no input".into()))?;
    let (in_w, in_h) = match input.dims[..] {
        [ref n, ref c, ref dh, ref dw] => {
            for (d, what) in [(n, "batch"), (c, "channel")] {
                if let Dim::Fixed(v) = d {
                    if *v != 1 {
                        return Err(MaskError::ModelContractViolation(format!("input {what} dimension is {v}, expected 1")));
                    }
                }
            }
            let fixed = |d: &Dim, own: usize| if let Dim::Fixed(v) = d { *v } else { own };
            (fixed(dw, w), fixed(dh, h))
        }
        // untyped inputs are assumed to follow the contract
        [] => (w, h),
        _ => {
            return Err(MaskError::ModelContractViolation(format!(
                "input must be rank 4 (1x1xHxW), declared rank {}",
                input.dims.len()
            )))
        }
    };
    let plane: Vec<f32> = img.data().iter().map(|&v| f32::from(v) / 255.0).collect();
    let plane = if (in_w, in_h) == (w, h) { plane } else { resample_plane(&plane, w, h, in_w, in_h) };
    let out = model
        .run(Tensor::from_f32(vec![1, 1, in_h, in_w], plane))
        .map_err(|e| MaskError::ModelContractViolation(e.to_string()))?;
    let (oh, ow) = match out.shape() {
        &[1, 1, oh, ow] if oh > 0 && ow > 0 => (oh, ow),
        other => return Err(MaskError::ModelContractViolation(format!("output shape {other:?}, expected 1x1xHxW"))),
    };
    let probs = out.to_f32();
    let probs = if (ow, oh) == (w, h) { probs } else { resample_plane(&probs, ow, oh, w, h) };
    let mask = LungMask::new(w, h, probs.iter().map(|&p| p >= threshold).collect());
    if mask.is_empty() {
        return Err(MaskError::EmptyMask);
    }
    Ok(mask)
}
