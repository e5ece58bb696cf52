//! Synthetic chest phantoms with known lung geometry, and burned-in text stamping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image_ops::{FRAME_HEIGHT, FRAME_WIDTH};
use crate::lung::BoundingBox;
use crate::raster::GrayImage;

/// Geometry in fractions of the frame so the same phantom renders at any size.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// Ellipse centres as (x, y) fractions of width/height.
    pub centres: [(f64, f64); 2],
    /// Semi-axes as (x, y) fractions of width/height.
    pub semi_axes: (f64, f64),
    pub lung_level: u8,
    pub body_level: u8,
    /// Uniform noise amplitude added to every pixel.
    pub noise: u8,
    /// Adds a dark disk covering 0.5% of the frame below the lungs.
    pub speck: bool,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: FRAME_WIDTH,
            height: FRAME_HEIGHT,
            centres: [(150.0 / 512.0, 0.5), (362.0 / 512.0, 0.5)],
            semi_axes: (80.0 / 512.0, 130.0 / 640.0),
            lung_level: 60,
            body_level: 200,
            noise: 20,
            speck: false,
        }
    }
}

pub const SPECK_FRACTION: f64 = 0.005;

#[derive(Debug, Clone)]
pub struct LungPhantom {
    pub image: GrayImage,
    /// Row-major ground truth: true inside either ellipse.
    pub truth: Vec<bool>,
    /// Pixel indices of the speck, empty when disabled.
    pub speck: Vec<usize>,
}

impl LungPhantom {
    pub fn generate(spec: &PhantomSpec, seed: u64) -> Self {
        let (w, h) = (spec.width, spec.height);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ax, ay) = (spec.semi_axes.0 * w as f64, spec.semi_axes.1 * h as f64);
        let centres: Vec<(f64, f64)> = spec.centres.iter().map(|&(cx, cy)| (cx * w as f64, cy * h as f64)).collect();
        let speck_r = (SPECK_FRACTION * (w * h) as f64 / std::f64::consts::PI).sqrt();
        let speck_c = (0.5 * w as f64, 0.86 * h as f64);
        let mut truth = vec![false; w * h];
        let mut speck = vec![];
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let inside = centres.iter().any(|&(cx, cy)| {
                    let (dx, dy) = ((px - cx) / ax, (py - cy) / ay);
                    dx * dx + dy * dy <= 1.0
                });
                let in_speck = spec.speck && (px - speck_c.0).hypot(py - speck_c.1) <= speck_r;
                let base = if inside || in_speck { spec.lung_level } else { spec.body_level };
                let n = i16::from(spec.noise);
                let jitter = if n > 0 { rng.random_range(-n..=n) } else { 0 };
                data.push((i16::from(base) + jitter).clamp(0, 255) as u8);
                truth[y * w + x] = inside;
                if in_speck {
                    speck.push(y * w + x);
                }
            }
        }
        Self { image: GrayImage::new(w, h, data).expect("positive size"), truth, speck }
    }
}

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

/// 5x7 glyph rows, most significant of the low five bits leftmost.
fn glyph(c: char) -> [u8; GLYPH_H] {
    match c.to_ascii_uppercase() {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        _ => [0; GLYPH_H],
    }
}

/// Region a stamp of `text` at `(x, y)` would cover before clipping.
pub fn text_extent(text: &str, x: usize, y: usize, scale: usize) -> BoundingBox {
    let n = text.chars().count().max(1);
    let advance = (GLYPH_W + 1) * scale;
    BoundingBox { x0: x, y0: y, x1: x + n * advance - scale - 1, y1: y + GLYPH_H * scale - 1 }
}

/// Burns `text` into `img` with solid `value` pixels, clipped to the frame. Returns
/// the covered region.
pub fn stamp_text(img: &mut GrayImage, text: &str, x: usize, y: usize, scale: usize, value: u8) -> BoundingBox {
    let scale = scale.max(1);
    let (w, h) = img.dimensions();
    for (i, c) in text.chars().enumerate() {
        let rows = glyph(c);
        let gx = x + i * (GLYPH_W + 1) * scale;
        for (ry, bits) in rows.iter().enumerate() {
            for rx in 0..GLYPH_W {
                if bits & (0x10 >> rx) == 0 {
                    continue;
                }
                for sy in 0..scale {
                    for sx in 0..scale {
                        let (px, py) = (gx + rx * scale + sx, y + ry * scale + sy);
                        if px < w && py < h {
                            img.set(px, py, value);
                        }
                    }
                }
            }
        }
    }
    text_extent(text, x, y, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipses_are_about_ten_percent_each() {
        let p = LungPhantom::generate(&PhantomSpec { noise: 0, ..PhantomSpec::default() }, 0);
        let frac = p.truth.iter().filter(|&&b| b).count() as f64 / (512.0 * 640.0);
        assert!((frac - 0.2).abs() < 0.005, "lung fraction {frac}");
        assert!(p.image.data().iter().all(|&v| v == 60 || v == 200));
    }

    #[test]
    fn speck_area_and_placement() {
        let p = LungPhantom::generate(&PhantomSpec { speck: true, ..PhantomSpec::default() }, 0);
        let frac = p.speck.len() as f64 / (512.0 * 640.0);
        assert!((frac - SPECK_FRACTION).abs() < 0.0005, "speck fraction {frac}");
        assert!(p.speck.iter().all(|&i| !p.truth[i]));
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let s = PhantomSpec::default();
        assert_eq!(LungPhantom::generate(&s, 9).image, LungPhantom::generate(&s, 9).image);
        assert_ne!(LungPhantom::generate(&s, 9).image, LungPhantom::generate(&s, 10).image);
    }

    #[test]
    fn stamp_stays_inside_extent() {
        let mut img = GrayImage::filled(100, 40, 0);
        let b = stamp_text(&mut img, "L AP", 3, 4, 2, 255);
        assert_eq!(b, text_extent("L AP", 3, 4, 2));
        let mut touched = 0;
        for y in 0..40 {
            for x in 0..100 {
                if img.get(x, y) != 0 {
                    touched += 1;
                    assert!(b.contains(x, y));
                }
            }
        }
        // the L glyph alone has 11 lit cells, each 2x2
        assert!(touched > 44);
    }
}
