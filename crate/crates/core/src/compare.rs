//! Similarity scoring between per-sample templates: windowed correlation
//! of binary vein patterns, mean histogram intersection of texture
//! features, and ratio-test keypoint matching.

use crate::extract::{BinaryVeinPattern, Feature, KeypointFeature, TextureFeature, LBP_BINS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CompareError {
    #[error("pattern dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("match window exceeds the pattern size")]
    WindowTooLarge,
    #[error("texture layouts differ (grid/scales)")]
    LayoutMismatch,
    #[error("cannot compare {0} with {1}")]
    MixedFeatureTypes(&'static str, &'static str),
}

/// Shift/rotation search window for binary-pattern matching.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchWindow {
    pub max_shift_x: usize,
    pub max_shift_y: usize,
    /// Degrees; must include 0.
    pub rotations: Vec<f64>,
}

impl Default for MatchWindow {
    fn default() -> Self {
        Self { max_shift_x: 20, max_shift_y: 10, rotations: vec![-4.0, -2.0, 0.0, 2.0, 4.0] }
    }
}

/// Correlation match between binary vein patterns.
///
/// The probe is cropped centrally by the window margins into a template.
/// For each rotation and integer shift, the overlap count against the
/// corresponding reference window is maximized; ties prefer the sparser
/// reference window, then scan order, keeping the result independent of
/// evaluation order. The score is `C / (|T| + |R_window|)`, bounded by
/// 0.5, taken at that argmax.
pub fn miura_match(
    probe: &BinaryVeinPattern,
    reference: &BinaryVeinPattern,
    window: &MatchWindow,
) -> Result<f64, CompareError> {
    if probe.width != reference.width || probe.height != reference.height {
        return Err(CompareError::DimensionMismatch(
            probe.width,
            probe.height,
            reference.width,
            reference.height,
        ));
    }
    debug_assert!(window.rotations.contains(&0.0), "rotation set must include 0");
    let (w, h) = (probe.width, probe.height);
    let (msx, msy) = (window.max_shift_x, window.max_shift_y);
    if 2 * msx >= w || 2 * msy >= h {
        return Err(CompareError::WindowTooLarge);
    }
    let (tw, th) = (w - 2 * msx, h - 2 * msy);

    // template: central crop of the probe, bit-packed
    let twords = tw.div_ceil(64);
    let mut template = vec![0u64; th * twords];
    let mut template_count = 0u64;
    for r in 0..th {
        for x in 0..tw {
            if probe.get(msx + x, msy + r) {
                template[r * twords + x / 64] |= 1u64 << (x % 64);
                template_count += 1;
            }
        }
    }
    if template_count == 0 {
        return Ok(0.0);
    }

    // best = (overlap desc, window popcount asc, scan order)
    let mut best: Option<(u64, u64)> = None;
    for &rot_deg in &window.rotations {
        let rotated;
        let reference = if rot_deg == 0.0 {
            reference
        } else {
            rotated = rotate_nearest(reference, rot_deg.to_radians());
            &rotated
        };
        let rows = pack_rows(reference);

        for dx in 0..=2 * msx {
            // reference rows shifted so bits [dx, dx+tw) align with the template
            let mut shifted = vec![0u64; h * twords];
            let mut row_counts = vec![0u64; h + 1]; // prefix sums over rows
            let word_off = dx / 64;
            let bit_off = (dx % 64) as u32;
            let wwords = w.div_ceil(64);
            for y in 0..h {
                let src = &rows[y * wwords..(y + 1) * wwords];
                let dst = &mut shifted[y * twords..(y + 1) * twords];
                for k in 0..twords {
                    let lo = src.get(word_off + k).copied().unwrap_or(0) >> bit_off;
                    let hi = if bit_off == 0 {
                        0
                    } else {
                        src.get(word_off + k + 1).copied().unwrap_or(0) << (64 - bit_off)
                    };
                    dst[k] = lo | hi;
                }
                // mask bits beyond the template width
                let tail = tw % 64;
                if tail != 0 {
                    dst[twords - 1] &= (1u64 << tail) - 1;
                }
                row_counts[y + 1] =
                    row_counts[y] + dst.iter().map(|v| v.count_ones() as u64).sum::<u64>();
            }

            for dy in 0..=2 * msy {
                let mut overlap = 0u64;
                for r in 0..th {
                    let t = &template[r * twords..(r + 1) * twords];
                    let s = &shifted[(dy + r) * twords..(dy + r + 1) * twords];
                    for k in 0..twords {
                        overlap += (t[k] & s[k]).count_ones() as u64;
                    }
                }
                let window_count = row_counts[dy + th] - row_counts[dy];
                let better = match best {
                    None => true,
                    Some((bc, bw)) => overlap > bc || (overlap == bc && window_count < bw),
                };
                if better {
                    best = Some((overlap, window_count));
                }
            }
        }
    }

    let (overlap, window_count) = best.expect("window loop ran at least once");
    if overlap == 0 || window_count == 0 {
        return Ok(0.0);
    }
    Ok(overlap as f64 / (template_count + window_count) as f64)
}

fn pack_rows(pattern: &BinaryVeinPattern) -> Vec<u64> {
    let wwords = pattern.width.div_ceil(64);
    let mut rows = vec![0u64; pattern.height * wwords];
    for y in 0..pattern.height {
        for x in 0..pattern.width {
            if pattern.get(x, y) {
                rows[y * wwords + x / 64] |= 1u64 << (x % 64);
            }
        }
    }
    rows
}

/// Nearest-neighbor rotation about the raster center; out-of-frame
/// pixels are false.
fn rotate_nearest(pattern: &BinaryVeinPattern, angle_rad: f64) -> BinaryVeinPattern {
    let (w, h) = (pattern.width, pattern.height);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (sin, cos) = (-angle_rad).sin_cos();
    let mut out = BinaryVeinPattern::new(w, h);
    out.source_sample_id = pattern.source_sample_id.clone();
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = (cx + cos * dx - sin * dy).round();
            let sy = (cy + sin * dx + cos * dy).round();
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < w && (sy as usize) < h {
                out.set(x, y, pattern.get(sx as usize, sy as usize));
            }
        }
    }
    out
}

/// Mean per-block histogram intersection over all scales and blocks.
pub fn histogram_similarity(a: &TextureFeature, b: &TextureFeature) -> Result<f64, CompareError> {
    if !a.same_layout(b) || a.histograms.len() != b.histograms.len() {
        return Err(CompareError::LayoutMismatch);
    }
    let blocks = a.histograms.len() / LBP_BINS;
    if blocks == 0 {
        return Ok(0.0);
    }
    let total: f64 = a
        .histograms
        .iter()
        .zip(&b.histograms)
        .map(|(x, y)| x.min(*y))
        .sum();
    Ok(total / blocks as f64)
}

/// Lowe-style ratio-test matching with greedy one-to-one assignment in
/// ascending nearest-distance order; score is accepted matches over
/// `min(|a|, |b|)`.
pub fn keypoint_match(a: &KeypointFeature, b: &KeypointFeature, ratio: f64) -> f64 {
    assert!(ratio > 0.0 && ratio <= 1.0);
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (ai, da) in a.descriptors.iter().enumerate() {
        let mut best = (f64::INFINITY, usize::MAX);
        let mut second = f64::INFINITY;
        for (bi, db) in b.descriptors.iter().enumerate() {
            let mut dist = 0f64;
            for k in 0..da.len() {
                let d = da[k] as f64 - db[k] as f64;
                dist += d * d;
            }
            if dist < best.0 {
                second = best.0;
                best = (dist, bi);
            } else if dist < second {
                second = dist;
            }
        }
        // d1 < ratio * d2 on squared distances; a lone candidate passes
        if best.1 != usize::MAX && (second.is_infinite() || best.0 < ratio * ratio * second) {
            candidates.push((best.0, ai, best.1));
        }
    }
    candidates.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
    let mut b_used = vec![false; b.len()];
    let mut accepted = 0usize;
    for (_, _, bi) in candidates {
        if !b_used[bi] {
            b_used[bi] = true;
            accepted += 1;
        }
    }
    accepted as f64 / a.len().min(b.len()) as f64
}

/// Method-appropriate comparison of two features of the same variant.
#[derive(Clone, Debug)]
pub struct Comparator {
    pub window: MatchWindow,
    pub ratio: f64,
}

impl Default for Comparator {
    fn default() -> Self {
        Self { window: MatchWindow::default(), ratio: 0.8 }
    }
}

impl Comparator {
    pub fn compare(&self, probe: &Feature, reference: &Feature) -> Result<f64, CompareError> {
        match (probe, reference) {
            (Feature::BinaryVeinPattern(a), Feature::BinaryVeinPattern(b)) => {
                miura_match(a, b, &self.window)
            }
            (Feature::Texture(a), Feature::Texture(b)) => histogram_similarity(a, b),
            (Feature::Keypoints(a), Feature::Keypoints(b)) => Ok(keypoint_match(a, b, self.ratio)),
            (a, b) => Err(CompareError::MixedFeatureTypes(variant_name(a), variant_name(b))),
        }
    }
}

fn variant_name(f: &Feature) -> &'static str {
    match f {
        Feature::BinaryVeinPattern(_) => "binary pattern",
        Feature::Texture(_) => "texture",
        Feature::Keypoints(_) => "keypoints",
    }
}
