//! Grayscale raster types and PNG persistence.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster dimensions {width}x{height} do not match {len} samples")]
    Shape { width: usize, height: usize, len: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("png decode error on {path}: {message}")]
    PngDecode { path: String, message: String },
    #[error("png encode error on {path}: {message}")]
    PngEncode { path: String, message: String },
    #[error("unsupported png layout in {path}: {message}")]
    PngLayout { path: String, message: String },
}

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

/// Row-major 16-bit grayscale raster as produced by pixel decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage16 {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

macro_rules! raster_impl {
    ($name:ident, $sample:ty) => {
        impl $name {
            pub fn new(width: usize, height: usize, data: Vec<$sample>) -> Result<Self, RasterError> {
                if width == 0 || height == 0 || data.len() != width * height {
                    return Err(RasterError::Shape { width, height, len: data.len() });
                }
                Ok(Self { width, height, data })
            }

            pub fn filled(width: usize, height: usize, value: $sample) -> Self {
                assert!(width > 0 && height > 0, "raster must be non-empty");
                Self { width, height, data: vec![value; width * height] }
            }

            pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> $sample) -> Self {
                assert!(width > 0 && height > 0, "raster must be non-empty");
                let mut data = Vec::with_capacity(width * height);
                for y in 0..height {
                    for x in 0..width {
                        data.push(f(x, y));
                    }
                }
                Self { width, height, data }
            }

            #[inline]
            pub fn width(&self) -> usize {
                self.width
            }

            #[inline]
            pub fn height(&self) -> usize {
                self.height
            }

            #[inline]
            pub fn dimensions(&self) -> (usize, usize) {
                (self.width, self.height)
            }

            #[inline]
            pub fn data(&self) -> &[$sample] {
                &self.data
            }

            #[inline]
            pub fn data_mut(&mut self) -> &mut [$sample] {
                &mut self.data
            }

            pub fn into_data(self) -> Vec<$sample> {
                self.data
            }

            #[inline]
            pub fn get(&self, x: usize, y: usize) -> $sample {
                self.data[y * self.width + x]
            }

            #[inline]
            pub fn set(&mut self, x: usize, y: usize, v: $sample) {
                self.data[y * self.width + x] = v;
            }

            /// Copies the inclusive rectangle `[x0..=x1] x [y0..=y1]`.
            pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
                assert!(x0 <= x1 && x1 < self.width && y0 <= y1 && y1 < self.height);
                let w = x1 - x0 + 1;
                let h = y1 - y0 + 1;
                let mut data = Vec::with_capacity(w * h);
                for y in y0..=y1 {
                    let row = y * self.width;
                    data.extend_from_slice(&self.data[row + x0..=row + x1]);
                }
                Self { width: w, height: h, data }
            }
        }
    };
}

raster_impl!(GrayImage, u8);
raster_impl!(GrayImage16, u16);

impl GrayImage {
    pub fn min_max(&self) -> (u8, u8) {
        self.data
            .iter()
            .fold((u8::MAX, u8::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let file = File::create(path).map_err(|source| RasterError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let encode_err = |e: png::EncodingError| RasterError::PngEncode {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut writer = encoder.write_header().map_err(encode_err)?;
        writer.write_image_data(&self.data).map_err(encode_err)?;
        writer.finish().map_err(encode_err)
    }

    /// Loads an 8-bit grayscale PNG. Palette and low-bit-depth files are expanded; colour
    /// files are rejected.
    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let path_str = || path.display().to_string();
        let file = File::open(path).map_err(|source| RasterError::Io { path: path_str(), source })?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| RasterError::PngDecode {
            path: path_str(),
            message: e.to_string(),
        })?;
        let size = reader.output_buffer_size().ok_or_else(|| RasterError::PngLayout {
            path: path_str(),
            message: "image too large".into(),
        })?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf).map_err(|e| RasterError::PngDecode {
            path: path_str(),
            message: e.to_string(),
        })?;
        let (w, h) = (info.width as usize, info.height as usize);
        let channels = match info.color_type {
            png::ColorType::Grayscale => 1,
            png::ColorType::GrayscaleAlpha => 2,
            other => {
                return Err(RasterError::PngLayout {
                    path: path_str(),
                    message: format!("expected grayscale, found {other:?}"),
                })
            }
        };
        let stride = info.line_size;
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            let row = &buf[y * stride..y * stride + w * channels];
            data.extend(row.iter().step_by(channels));
        }
        GrayImage::new(w, h, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_shape() {
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
        assert!(GrayImage::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn crop_is_inclusive() {
        let img = GrayImage::from_fn(4, 3, |x, y| (y * 4 + x) as u8);
        let c = img.crop(1, 1, 2, 2);
        assert_eq!(c.dimensions(), (2, 2));
        assert_eq!(c.data(), &[5, 6, 9, 10]);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = GrayImage::from_fn(7, 5, |x, y| (x * 31 + y * 7) as u8);
        img.save_png(&path).unwrap();
        assert_eq!(GrayImage::load_png(&path).unwrap(), img);
    }
}
