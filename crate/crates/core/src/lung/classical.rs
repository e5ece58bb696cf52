//! Deterministic threshold-and-morphology lung segmenter.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{LungMask, MaskError};
use crate::raster::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalParams {
    /// Side of the square box-blur window (odd).
    pub blur_size: usize,
    pub disk_radius: usize,
    pub min_area_fraction: f64,
    pub max_area_fraction: f64,
    pub max_components: usize,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        Self { blur_size: 5, disk_radius: 7, min_area_fraction: 0.02, max_area_fraction: 0.40, max_components: 2 }
    }
}

/// blur → Otsu dark class → border clearing → opening, closing → area-filtered
/// largest components → hole filling.
pub fn classical_segment(img: &GrayImage, params: &ClassicalParams) -> Result<LungMask, MaskError> {
    let (w, h) = img.dimensions();
    let blurred = box_blur(img, params.blur_size / 2);
    let Some(t) = otsu_threshold(&blurred) else {
        return Err(MaskError::EmptyMask);
    };
    let mut mask: Vec<bool> = blurred.iter().map(|&v| v <= t).collect();
    clear_border(&mut mask, w, h);
    let disk = disk_offsets(params.disk_radius);
    let mask = erode(&dilate(&dilate(&erode(&mask, w, h, &disk), w, h, &disk), w, h, &disk), w, h, &disk);

    let frame = (w * h) as f64;
    let mut comps: Vec<Vec<usize>> = components(&mask, w, h)
        .into_iter()
        .filter(|c| {
            let a = c.len() as f64;
            a >= params.min_area_fraction * frame && a <= params.max_area_fraction * frame
        })
        .collect();
    // Components come out in raster order of their first pixel; the stable sort keeps
    // that as the tie-breaker.
    comps.sort_by(|a, b| b.len().cmp(&a.len()));
    comps.truncate(params.max_components);
    if comps.is_empty() {
        return Err(MaskError::EmptyMask);
    }
    let mut out = vec![false; w * h];
    for c in &comps {
        for &i in c {
            out[i] = true;
        }
    }
    fill_holes(&mut out, w, h);
    Ok(LungMask::new(w, h, out))
}

/// Mean over the in-bounds part of a `(2r+1)^2` window, rounded half up.
fn box_blur(img: &GrayImage, r: usize) -> Vec<u8> {
    let (w, h) = img.dimensions();
    let src = img.data();
    let iw = w + 1;
    let mut integral = vec![0u64; iw * (h + 1)];
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            row += u64::from(src[y * w + x]);
            integral[(y + 1) * iw + x + 1] = integral[y * iw + x + 1] + row;
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let sum = integral[y1 * iw + x1] + integral[y0 * iw + x0] - integral[y0 * iw + x1] - integral[y1 * iw + x0];
            let n = ((y1 - y0) * (x1 - x0)) as u64;
            out.push(((2 * sum + n) / (2 * n)) as u8);
        }
    }
    out
}

/// Otsu's threshold `t`; the dark class is `v <= t`. `None` when fewer than two
/// levels occur.
pub(crate) fn otsu_threshold(samples: &[u8]) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &v in samples {
        hist[usize::from(v)] += 1;
    }
    let total = samples.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0f64, 0f64);
    let mut best: Option<(f64, u8)> = None;
    for t in 0..255usize {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if best.is_none_or(|(b, _)| between > b) {
            best = Some((between, t as u8));
        }
    }
    best.map(|(_, t)| t)
}

/// Row offsets and half-widths of a digital disk.
fn disk_offsets(r: usize) -> Vec<(isize, usize)> {
    let r = r as isize;
    (-r..=r)
        .map(|dy| (dy, (((r * r - dy * dy) as f64).sqrt().floor()) as usize))
        .collect()
}

fn row_prefix(mask: &[bool], w: usize, h: usize) -> Vec<u32> {
    let mut p = vec![0u32; (w + 1) * h];
    for y in 0..h {
        for x in 0..w {
            p[y * (w + 1) + x + 1] = p[y * (w + 1) + x] + u32::from(mask[y * w + x]);
        }
    }
    p
}

/// Count of set pixels in row `y`, columns `[x - hw, x + hw]` clipped to the frame, and
/// the number of in-frame columns in that span.
fn span(p: &[u32], w: usize, y: usize, x: usize, hw: usize) -> (u32, usize) {
    let (a, b) = (x.saturating_sub(hw), (x + hw + 1).min(w));
    (p[y * (w + 1) + b] - p[y * (w + 1) + a], b - a)
}

/// Pixels outside the frame count as background for both operations.
fn erode(mask: &[bool], w: usize, h: usize, disk: &[(isize, usize)]) -> Vec<bool> {
    let p = row_prefix(mask, w, h);
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                continue;
            }
            out[y * w + x] = disk.iter().all(|&(dy, hw)| {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h as isize || x < hw || x + hw >= w {
                    return false;
                }
                let (c, n) = span(&p, w, yy as usize, x, hw);
                c as usize == n
            });
        }
    }
    out
}

fn dilate(mask: &[bool], w: usize, h: usize, disk: &[(isize, usize)]) -> Vec<bool> {
    let p = row_prefix(mask, w, h);
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = mask[y * w + x]
                || disk.iter().any(|&(dy, hw)| {
                    let yy = y as isize + dy;
                    yy >= 0 && yy < h as isize && span(&p, w, yy as usize, x, hw).0 > 0
                });
        }
    }
    out
}

const N8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
const N4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

fn flood(mask: &[bool], w: usize, h: usize, seeds: impl IntoIterator<Item = usize>, nbrs: &[(isize, isize)], seen: &mut [bool]) -> Vec<usize> {
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut out = vec![];
    for s in seeds {
        if mask[s] && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        out.push(i);
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for &(dx, dy) in nbrs {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if mask[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    out
}

fn border_indices(w: usize, h: usize) -> impl Iterator<Item = usize> {
    (0..w).flat_map(move |x| [x, (h - 1) * w + x]).chain((0..h).flat_map(move |y| [y * w, y * w + w - 1]))
}

fn clear_border(mask: &mut [bool], w: usize, h: usize) {
    let mut seen = vec![false; w * h];
    for i in flood(mask, w, h, border_indices(w, h), &N8, &mut seen) {
        mask[i] = false;
    }
}

/// 8-connected components in raster order of their first pixel.
fn components(mask: &[bool], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; w * h];
    let mut out = vec![];
    for i in 0..w * h {
        if mask[i] && !seen[i] {
            out.push(flood(mask, w, h, [i], &N8, &mut seen));
        }
    }
    out
}

/// Background not 4-connected to the border becomes foreground.
fn fill_holes(mask: &mut [bool], w: usize, h: usize) {
    let background: Vec<bool> = mask.iter().map(|&m| !m).collect();
    let mut seen = vec![false; w * h];
    flood(&background, w, h, border_indices(w, h), &N4, &mut seen);
    for (m, reached) in mask.iter_mut().zip(seen) {
        if !reached {
            *m = true;
        }
    }
}
