use super::{DicomError, DicomRecord, Photometric};
use crate::raster::{GrayImage, GrayImage16};

pub const DEFAULT_LO_PCT: f64 = 0.005;
pub const DEFAULT_HI_PCT: f64 = 0.995;

/// Widens the stored samples to 16 bits so that higher values are always brighter.
///
/// Signed data is offset by `2^(bits_stored-1)` into the unsigned range and
/// MONOCHROME1 data is inverted within `[0, 2^bits_stored - 1]`.
pub fn decode_pixels(rec: &DicomRecord) -> Result<GrayImage16, DicomError> {
    if rec.photometric == Photometric::Other {
        return Err(DicomError::UnsupportedPhotometric(rec.photometric.code().into()));
    }
    if !matches!(rec.bits_allocated, 8 | 16) || rec.bits_stored == 0 || rec.bits_stored > rec.bits_allocated {
        return Err(DicomError::malformed(format!(
            "bits stored/allocated {}/{} unsupported",
            rec.bits_stored, rec.bits_allocated
        )));
    }
    let n = usize::from(rec.rows) * usize::from(rec.cols);
    let needed = rec.expected_pixel_bytes();
    if n == 0 || rec.pixel_data.len() < needed {
        return Err(DicomError::malformed(format!(
            "pixel buffer has {} bytes, needs {needed}",
            rec.pixel_data.len()
        )));
    }

    let bits = u32::from(rec.bits_stored);
    let mask: u32 = (1u32 << bits) - 1;
    let signed = rec.pixel_representation == 1;
    let invert = rec.photometric == Photometric::Monochrome1;
    let raw = |i: usize| -> u32 {
        match rec.bits_allocated {
            8 => u32::from(rec.pixel_data[i]),
            _ => u32::from(u16::from_le_bytes([rec.pixel_data[2 * i], rec.pixel_data[2 * i + 1]])),
        }
    };

    let data = (0..n)
        .map(|i| {
            let stored = raw(i) & mask;
            let mut v = if signed {
                // Flip the sign bit: two's complement -> offset binary.
                stored ^ (1u32 << (bits - 1))
            } else {
                stored
            };
            if invert {
                v = mask - v;
            }
            v as u16
        })
        .collect();
    Ok(GrayImage16::new(usize::from(rec.cols), usize::from(rec.rows), data).expect("shape checked above"))
}

/// Nearest-rank (lower) percentile of a 16-bit histogram.
fn percentile(hist: &[u64], total: u64, q: f64) -> u16 {
    let rank = ((q * (total - 1) as f64).floor() as u64).min(total - 1);
    let mut seen = 0u64;
    for (value, &count) in hist.iter().enumerate() {
        seen += count;
        if seen > rank {
            return value as u16;
        }
    }
    u16::MAX
}

/// Percentile-windowed linear map to 8 bits.
///
/// `P_lo`/`P_hi` are the samples at sorted index `floor(q * (N - 1))`; values are mapped
/// linearly onto `[0, 255]`, clamped, and rounded half away from zero. A degenerate window
/// produces an all-zero image.
pub fn to_8bit(img: &GrayImage16, lo_pct: f64, hi_pct: f64) -> GrayImage {
    assert!(
        (0.0..=1.0).contains(&lo_pct) && (0.0..=1.0).contains(&hi_pct) && lo_pct < hi_pct,
        "percentile window must satisfy 0 <= lo < hi <= 1"
    );
    let mut hist = vec![0u64; 1 << 16];
    for &v in img.data() {
        hist[usize::from(v)] += 1;
    }
    let total = img.data().len() as u64;
    let lo = percentile(&hist, total, lo_pct);
    let hi = percentile(&hist, total, hi_pct);
    let (w, h) = img.dimensions();
    if lo >= hi {
        return GrayImage::filled(w, h, 0);
    }
    let span = u32::from(hi - lo);
    let lut: Vec<u8> = (0..=u16::MAX)
        .map(|v| {
            if v <= lo {
                0
            } else if v >= hi {
                255
            } else {
                // round(d * 255 / span), half up, in exact integer arithmetic
                ((2 * u32::from(v - lo) * 255 + span) / (2 * span)) as u8
            }
        })
        .collect();
    let data = img.data().iter().map(|&v| lut[usize::from(v)]).collect();
    GrayImage::new(w, h, data).expect("same shape as input")
}
