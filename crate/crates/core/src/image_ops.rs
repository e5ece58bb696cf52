//! Resampling and intensity normalization kernels.

use crate::raster::GrayImage;

/// Standard frame: portrait, 512 wide by 640 high.
pub const FRAME_WIDTH: usize = 512;
pub const FRAME_HEIGHT: usize = 640;

/// Source sample positions and weights along one axis for half-pixel-centre bilinear
/// resampling: `src = (dst + 0.5) * in / out - 0.5`, clamped to `[0, in - 1]`.
fn axis_taps(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    let max = (in_len - 1) as f64;
    (0..out_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Bilinear resample of an `f32` plane with the same coordinate convention as
/// [`resize_bilinear`], without rounding.
pub fn resample_plane(src: &[f32], in_w: usize, in_h: usize, out_w: usize, out_h: usize) -> Vec<f32> {
    assert_eq!(src.len(), in_w * in_h);
    let xs = axis_taps(in_w, out_w);
    let ys = axis_taps(in_h, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        let (r0, r1) = (&src[y0 * in_w..(y0 + 1) * in_w], &src[y1 * in_w..(y1 + 1) * in_w]);
        for &(x0, x1, fx) in &xs {
            let top = f64::from(r0[x0]) * (1.0 - fx) + f64::from(r0[x1]) * fx;
            let bottom = f64::from(r1[x0]) * (1.0 - fx) + f64::from(r1[x1]) * fx;
            out.push((top * (1.0 - fy) + bottom * fy) as f32);
        }
    }
    out
}

/// Anisotropic bilinear resize with half-pixel centres, rounded half away from zero.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> GrayImage {
    assert!(out_w >= 1 && out_h >= 1, "output dimensions must be positive");
    let (in_w, in_h) = img.dimensions();
    if (in_w, in_h) == (out_w, out_h) {
        return img.clone();
    }
    let xs = axis_taps(in_w, out_w);
    let ys = axis_taps(in_h, out_h);
    let src = img.data();
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        let (r0, r1) = (&src[y0 * in_w..(y0 + 1) * in_w], &src[y1 * in_w..(y1 + 1) * in_w]);
        for &(x0, x1, fx) in &xs {
            let top = f64::from(r0[x0]) * (1.0 - fx) + f64::from(r0[x1]) * fx;
            let bottom = f64::from(r1[x0]) * (1.0 - fx) + f64::from(r1[x1]) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(out_w, out_h, out).expect("dimensions are positive")
}

/// Aspect-preserving resize into an `out_w` x `out_h` canvas, centred and zero padded.
pub fn resize_letterbox(img: &GrayImage, out_w: usize, out_h: usize) -> GrayImage {
    let (in_w, in_h) = img.dimensions();
    // Fit the limiting axis exactly; integer arithmetic keeps this deterministic.
    let (fit_w, fit_h) = if in_w * out_h >= in_h * out_w {
        (out_w, ((in_h * out_w + in_w / 2) / in_w).clamp(1, out_h))
    } else {
        (((in_w * out_h + in_h / 2) / in_h).clamp(1, out_w), out_h)
    };
    let scaled = resize_bilinear(img, fit_w, fit_h);
    let (ox, oy) = ((out_w - fit_w) / 2, (out_h - fit_h) / 2);
    let mut canvas = GrayImage::filled(out_w, out_h, 0);
    for y in 0..fit_h {
        let dst = (oy + y) * out_w + ox;
        canvas.data_mut()[dst..dst + fit_w].copy_from_slice(&scaled.data()[y * fit_w..(y + 1) * fit_w]);
    }
    canvas
}

/// Classic global histogram equalization.
///
/// With `N` samples, `cdf(v)` the count of samples `<= v` and `cdf_min` the smallest
/// nonzero cdf value, each level maps to `round(255 * (cdf(v) - cdf_min) / (N - cdf_min))`.
/// A single-level image is returned unchanged.
pub fn hist_equalize(img: &GrayImage) -> GrayImage {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[usize::from(v)] += 1;
    }
    let n = img.data().len() as u64;
    let mut cdf = [0u64; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if n == cdf_min {
        return img.clone();
    }
    let den = n - cdf_min;
    let lut: Vec<u8> = cdf
        .iter()
        .map(|&c| {
            let num = c.saturating_sub(cdf_min) * 255;
            // round half up on nonnegative rationals
            ((2 * num + den) / (2 * den)) as u8
        })
        .collect();
    let data = img.data().iter().map(|&v| lut[usize::from(v)]).collect();
    GrayImage::new(img.width(), img.height(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct evaluation of the bilinear formula for one output pixel.
    fn bilinear_oracle(img: &GrayImage, out_w: usize, out_h: usize, dx: usize, dy: usize) -> f64 {
        let (w, h) = img.dimensions();
        let sx = ((dx as f64 + 0.5) * w as f64 / out_w as f64 - 0.5).max(0.0).min((w - 1) as f64);
        let sy = ((dy as f64 + 0.5) * h as f64 / out_h as f64 - 0.5).max(0.0).min((h - 1) as f64);
        let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (ax, ay) = (sx - x0 as f64, sy - y0 as f64);
        let p = |x, y| f64::from(img.get(x, y));
        p(x0, y0) * (1.0 - ax) * (1.0 - ay) + p(x1, y0) * ax * (1.0 - ay) + p(x0, y1) * (1.0 - ax) * ay + p(x1, y1) * ax * ay
    }

    #[test]
    fn constant_stays_constant() {
        let img = GrayImage::filled(37, 23, 37);
        let out = resize_bilinear(&img, FRAME_WIDTH, FRAME_HEIGHT);
        assert_eq!(out.dimensions(), (512, 640));
        assert!(out.data().iter().all(|&v| v == 37));
    }

    #[test]
    fn identity_at_frame_size() {
        let img = GrayImage::from_fn(FRAME_WIDTH, FRAME_HEIGHT, |x, y| ((x * 7 + y * 13) % 256) as u8);
        assert_eq!(resize_bilinear(&img, FRAME_WIDTH, FRAME_HEIGHT), img);
        // also through the general path: identical taps produce zero fractional weights
        let taps = axis_taps(17, 17);
        assert!(taps.iter().enumerate().all(|(i, &(a, _, f))| a == i && f == 0.0));
    }

    #[test]
    fn checkerboard_upscale() {
        let img = GrayImage::new(2, 2, vec![0, 255, 255, 0]).unwrap();
        let out = resize_bilinear(&img, 4, 4);
        for y in 0..4 {
            for x in 0..4 {
                let expect = bilinear_oracle(&img, 4, 4, x, y);
                assert_eq!(out.get(x, y), (expect + 0.5).floor() as u8, "({x},{y})");
            }
        }
        for (x, y) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            let v = out.get(x, y);
            assert!(v > 0 && v < 255, "centre sample ({x},{y}) = {v}");
        }
        // corners clamp onto source pixels
        assert_eq!(out.get(0, 0), 0);
        assert_eq!(out.get(3, 0), 255);
    }

    #[test]
    fn letterbox_pads_with_zeros() {
        let img = GrayImage::filled(100, 100, 200);
        let out = resize_letterbox(&img, 512, 640);
        assert_eq!(out.dimensions(), (512, 640));
        // square fits 512x512, centred vertically with 64 rows of padding each side
        assert_eq!(out.get(256, 10), 0);
        assert_eq!(out.get(256, 320), 200);
        assert_eq!(out.get(256, 63), 0);
        assert_eq!(out.get(256, 64), 200);
        assert_eq!(out.get(256, 575), 200);
        assert_eq!(out.get(256, 576), 0);
    }

    #[test]
    fn equalize_uniform_histogram_is_identity() {
        let img = GrayImage::from_fn(256, 256, |x, _| x as u8);
        assert_eq!(hist_equalize(&img), img);
    }

    #[test]
    fn equalize_constant_unchanged() {
        let img = GrayImage::filled(9, 4, 93);
        assert_eq!(hist_equalize(&img), img);
    }

    #[test]
    fn equalize_two_levels() {
        let img = GrayImage::new(4, 1, vec![10, 10, 200, 200]).unwrap();
        assert_eq!(hist_equalize(&img).data(), &[0, 0, 255, 255]);
    }

    proptest! {
        #[test]
        fn resize_output_within_input_range(
            w in 1usize..12, h in 1usize..12, ow in 1usize..30, oh in 1usize..30, seed in any::<u64>()
        ) {
            let img = GrayImage::from_fn(w, h, |x, y| (seed.wrapping_mul(2654435761).wrapping_add((x * 31 + y * 17) as u64 * 97) >> 7) as u8);
            let (lo, hi) = img.min_max();
            let out = resize_bilinear(&img, ow, oh);
            prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
            for y in 0..oh {
                for x in 0..ow {
                    let expect = bilinear_oracle(&img, ow, oh, x, y);
                    prop_assert!((f64::from(out.get(x, y)) - expect).abs() <= 0.5 + 1e-9);
                }
            }
        }

        #[test]
        fn equalize_rank_order_and_extremes(data in prop::collection::vec(any::<u8>(), 2..300)) {
            let img = GrayImage::new(data.len(), 1, data.clone()).unwrap();
            let out = hist_equalize(&img);
            let mut pairs: Vec<(u8, u8)> = data.iter().copied().zip(out.data().iter().copied()).collect();
            pairs.sort();
            prop_assert!(pairs.windows(2).all(|p| p[0].1 <= p[1].1));
            let (lo, hi) = img.min_max();
            if lo != hi {
                let (olo, ohi) = out.min_max();
                prop_assert_eq!((olo, ohi), (0, 255));
            }
        }
    }
}
