//! Finger region detection, rotational alignment and ROI cropping.
//!
//! Per column, the finger's upper edge is the strongest dark-to-bright
//! transition of an 8-tap vertical edge kernel and the lower edge the
//! strongest bright-to-dark transition; boundaries are median-smoothed
//! across columns and the midline drives a least-squares alignment
//! rotation before the tight band box is cropped and resized.

use crate::imgcore::{self, GrayImage};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum RoiError {
    #[error("image {0}x{1} too small for finger detection (need 40x40)")]
    ImageTooSmall(usize, usize),
    #[error("no finger region found ({present} of {total} columns confident)")]
    FingerNotFound { present: usize, total: usize },
    #[error("finger box {0}x{1} smaller than the {2}x{2} minimum")]
    DegenerateRoi(usize, usize, usize),
}

/// Per-column finger boundaries plus the derived pixel mask.
#[derive(Clone, Debug)]
pub struct FingerMask {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    /// Columns where a finger edge pair was confidently detected.
    pub present: Vec<bool>,
    pub upper_boundary: Vec<f64>,
    pub lower_boundary: Vec<f64>,
    pub midline: Vec<f64>,
}

impl FingerMask {
    pub fn present_columns(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(move |&x| self.present[x])
    }
}

/// Aligned, cropped finger region with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiImage {
    pub image: GrayImage,
    pub mask: Vec<bool>,
    pub source_sample_id: String,
    pub rotation_applied_deg: f64,
}

impl RoiImage {
    pub fn full(image: GrayImage) -> Self {
        let mask = vec![true; image.width() * image.height()];
        Self { image, mask, source_sample_id: String::new(), rotation_applied_deg: 0.0 }
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn with_image(&self, image: GrayImage) -> Self {
        debug_assert_eq!(image.width(), self.image.width());
        debug_assert_eq!(image.height(), self.image.height());
        Self {
            image,
            mask: self.mask.clone(),
            source_sample_id: self.source_sample_id.clone(),
            rotation_applied_deg: self.rotation_applied_deg,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RoiParams {
    pub out_width: usize,
    pub out_height: usize,
}

impl Default for RoiParams {
    fn default() -> Self {
        Self { out_width: 192, out_height: 96 }
    }
}

const EDGE_HALF: usize = 4; // 8-tap edge kernel: 4 dark taps then 4 bright taps
const MEDIAN_WINDOW: usize = 11;
const CONFIDENCE_FRACTION: f64 = 0.1;
const MIN_PRESENT_FRACTION: f64 = 0.5;
const MIN_BOX: usize = 16;

/// Detect per-column finger boundaries.
pub fn detect_finger_region(img: &GrayImage) -> Result<FingerMask, RoiError> {
    let (w, h) = (img.width(), img.height());
    if w < 40 || h < 40 {
        return Err(RoiError::ImageTooSmall(w, h));
    }

    let mut upper_raw = vec![0f64; w];
    let mut lower_raw = vec![0f64; w];
    let mut confidence = vec![0f64; w];
    let mut valid = vec![false; w];

    for x in 0..w {
        // prefix sums of the column for O(1) edge responses
        let mut prefix = vec![0.0; h + 1];
        for y in 0..h {
            prefix[y + 1] = prefix[y] + img.get(x, y);
        }
        let window = |a: usize, b: usize| prefix[b] - prefix[a]; // sum over [a, b)

        let mut best_up = (f64::NEG_INFINITY, 0usize);
        let mut best_down = (f64::NEG_INFINITY, 0usize);
        for y in EDGE_HALF..=(h - EDGE_HALF) {
            // response: brighter below minus brighter above around row y
            let r = window(y, y + EDGE_HALF) - window(y - EDGE_HALF, y);
            if r > best_up.0 {
                best_up = (r, y);
            }
            if -r > best_down.0 {
                best_down = (-r, y);
            }
        }
        let upper = best_up.1;
        let lower = best_down.1.saturating_sub(1); // last bright row
        if best_up.0 > 0.0 && best_down.0 > 0.0 && upper < lower {
            upper_raw[x] = upper as f64;
            lower_raw[x] = lower as f64;
            confidence[x] = best_up.0.min(best_down.0);
            valid[x] = true;
        }
    }

    let global_max = confidence.iter().cloned().fold(0.0, f64::max);
    let mut present = vec![false; w];
    for x in 0..w {
        present[x] = valid[x] && confidence[x] >= CONFIDENCE_FRACTION * global_max && global_max > 0.0;
    }
    let present_count = present.iter().filter(|&&p| p).count();
    if (present_count as f64) < MIN_PRESENT_FRACTION * w as f64 {
        return Err(RoiError::FingerNotFound { present: present_count, total: w });
    }

    // median smoothing over the subsequence of present columns
    let present_cols: Vec<usize> = (0..w).filter(|&x| present[x]).collect();
    let half = MEDIAN_WINDOW / 2;
    let mut upper = vec![0f64; w];
    let mut lower = vec![0f64; w];
    for (i, &x) in present_cols.iter().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(present_cols.len());
        let mut us: Vec<f64> = present_cols[lo..hi].iter().map(|&c| upper_raw[c]).collect();
        let mut ls: Vec<f64> = present_cols[lo..hi].iter().map(|&c| lower_raw[c]).collect();
        upper[x] = median_in_place(&mut us);
        lower[x] = median_in_place(&mut ls);
    }

    let mut midline = vec![0f64; w];
    let mut mask = vec![false; w * h];
    for x in 0..w {
        if !present[x] {
            continue;
        }
        midline[x] = (upper[x] + lower[x]) / 2.0;
        let y0 = upper[x].round().max(0.0) as usize;
        let y1 = (lower[x].round() as usize).min(h - 1);
        for y in y0..=y1 {
            mask[y * w + x] = true;
        }
    }

    Ok(FingerMask { width: w, height: h, mask, present, upper_boundary: upper, lower_boundary: lower, midline })
}

fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Fit a line to the finger midline and rotate the image so the finger
/// lies horizontal. Returns the rotated image, a freshly detected mask
/// and the applied rotation in degrees.
pub fn normalize_alignment(
    img: &GrayImage,
    fm: &FingerMask,
) -> Result<(GrayImage, FingerMask, f64), RoiError> {
    let slope = midline_slope(fm);
    let angle = slope.atan();
    let rotated = imgcore::rotate_bilinear(img, -angle);
    let new_mask = detect_finger_region(&rotated)?;
    Ok((rotated, new_mask, -angle.to_degrees()))
}

fn midline_slope(fm: &FingerMask) -> f64 {
    let pts: Vec<(f64, f64)> = fm.present_columns().map(|x| (x as f64, fm.midline[x])).collect();
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in pts {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Crop the tightest box holding every present column between the
/// smoothed boundaries and resize it to `out_w` x `out_h`.
pub fn extract_roi(
    img: &GrayImage,
    fm: &FingerMask,
    out_w: usize,
    out_h: usize,
) -> Result<RoiImage, RoiError> {
    let cols: Vec<usize> = fm.present_columns().collect();
    let (x0, x1) = (*cols.first().expect("mask has present columns"), *cols.last().unwrap());
    let mut y0f = f64::INFINITY;
    let mut y1f = f64::NEG_INFINITY;
    for &x in &cols {
        y0f = y0f.min(fm.upper_boundary[x]);
        y1f = y1f.max(fm.lower_boundary[x]);
    }
    let y0 = y0f.floor().max(0.0) as usize;
    let y1 = (y1f.ceil() as usize).min(img.height() - 1);
    let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
    if bw < MIN_BOX || bh < MIN_BOX {
        return Err(RoiError::DegenerateRoi(bw, bh, MIN_BOX));
    }

    let crop = GrayImage::from_fn(bw, bh, |x, y| img.get(x0 + x, y0 + y));
    let mask_crop = GrayImage::from_fn(bw, bh, |x, y| {
        if fm.mask[(y0 + y) * fm.width + (x0 + x)] {
            1.0
        } else {
            0.0
        }
    });
    let image = imgcore::resize_bilinear(&crop, out_w, out_h);
    let mask_f = imgcore::resize_bilinear(&mask_crop, out_w, out_h);
    let mask = mask_f.data().iter().map(|&v| v >= 0.5).collect();

    Ok(RoiImage { image, mask, source_sample_id: String::new(), rotation_applied_deg: 0.0 })
}

/// detect -> align -> crop, stamping the sample id and applied rotation.
pub fn roi_pipeline(img: &GrayImage, sample_id: &str, params: &RoiParams) -> Result<RoiImage, RoiError> {
    let fm = detect_finger_region(img)?;
    let (aligned, fm, rotation) = normalize_alignment(img, &fm)?;
    let mut roi = extract_roi(&aligned, &fm, params.out_width, params.out_height)?;
    roi.source_sample_id = sample_id.to_string();
    roi.rotation_applied_deg = rotation;
    Ok(roi)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bright band between `upper` and `lower`, optionally tilted.
    fn band_image(w: usize, h: usize, upper: f64, lower: f64, slope: f64) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let shift = slope * (x as f64 - w as f64 / 2.0);
            let yf = y as f64 - shift;
            if yf >= upper && yf <= lower {
                0.6
            } else {
                0.05
            }
        })
    }

    #[test]
    fn horizontal_band_boundaries_within_two_px() {
        let img = band_image(120, 100, 20.0, 80.0, 0.0);
        let fm = detect_finger_region(&img).unwrap();
        for x in fm.present_columns() {
            assert!((fm.upper_boundary[x] - 20.0).abs() <= 2.0, "upper at {x}: {}", fm.upper_boundary[x]);
            assert!((fm.lower_boundary[x] - 80.0).abs() <= 2.0, "lower at {x}: {}", fm.lower_boundary[x]);
            assert!((fm.midline[x] - (fm.upper_boundary[x] + fm.lower_boundary[x]) / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dark_image_has_no_finger() {
        let img = GrayImage::filled(64, 64, 0.02);
        assert!(matches!(detect_finger_region(&img), Err(RoiError::FingerNotFound { .. })));
    }

    #[test]
    fn small_image_rejected() {
        let img = GrayImage::filled(39, 64, 0.5);
        assert!(matches!(detect_finger_region(&img), Err(RoiError::ImageTooSmall(..))));
    }

    #[test]
    fn tilted_band_midline_slope_matches() {
        let slope = (5f64).to_radians().tan();
        let img = band_image(160, 120, 40.0, 80.0, slope);
        let fm = detect_finger_region(&img).unwrap();
        let fitted = super::midline_slope(&fm);
        assert!((fitted - slope).abs() <= 0.1 * slope.abs(), "fitted {fitted} vs {slope}");
    }

    #[test]
    fn alignment_cancels_positive_tilt() {
        let slope = (5f64).to_radians().tan();
        let img = band_image(160, 120, 40.0, 80.0, slope);
        let fm = detect_finger_region(&img).unwrap();
        let (_, _, rot) = normalize_alignment(&img, &fm).unwrap();
        assert!((rot + 5.0).abs() <= 0.5, "rotation {rot}");
    }

    #[test]
    fn alignment_cancels_negative_tilt() {
        let slope = (-3f64).to_radians().tan();
        let img = band_image(160, 120, 40.0, 80.0, slope);
        let fm = detect_finger_region(&img).unwrap();
        let (_, _, rot) = normalize_alignment(&img, &fm).unwrap();
        assert!((rot - 3.0).abs() <= 0.5, "rotation {rot}");
    }

    #[test]
    fn horizontal_band_is_alignment_fixed_point() {
        let img = band_image(160, 120, 40.0, 80.0, 0.0);
        let fm = detect_finger_region(&img).unwrap();
        let (rotated, _, rot) = normalize_alignment(&img, &fm).unwrap();
        assert!(rot.abs() <= 0.2, "rotation {rot}");
        let mut max_diff = 0f64;
        for y in 5..115 {
            for x in 5..155 {
                max_diff = max_diff.max((rotated.get(x, y) - img.get(x, y)).abs());
            }
        }
        assert!(max_diff < 0.02, "max interior diff {max_diff}");
    }

    #[test]
    fn second_alignment_is_nearly_zero() {
        let slope = (4f64).to_radians().tan();
        let img = band_image(160, 120, 40.0, 80.0, slope);
        let fm = detect_finger_region(&img).unwrap();
        let (rotated, fm2, _) = normalize_alignment(&img, &fm).unwrap();
        let (_, _, rot2) = normalize_alignment(&rotated, &fm2).unwrap();
        assert!(rot2.abs() < 0.5, "second rotation {rot2}");
    }

    #[test]
    fn roi_keeps_only_band_pixels() {
        let img = band_image(160, 120, 20.0, 80.0, 0.0);
        let fm = detect_finger_region(&img).unwrap();
        let roi = extract_roi(&img, &fm, 128, 64).unwrap();
        assert_eq!(roi.width(), 128);
        assert_eq!(roi.height(), 64);
        assert!(roi.mask.iter().all(|&m| m));
        // interior pixels carry the band intensity, not background
        for y in 2..62 {
            for x in 2..126 {
                assert!(roi.image.get(x, y) > 0.3, "background leaked at {x},{y}");
            }
        }
    }

    #[test]
    fn crop_follows_present_columns() {
        let w = 220;
        let img = GrayImage::from_fn(w, 100, |x, y| {
            if (10..=200).contains(&x) && (20..=80).contains(&y) {
                0.6
            } else {
                0.05
            }
        });
        let fm = detect_finger_region(&img).unwrap();
        let cols: Vec<usize> = fm.present_columns().collect();
        assert!((*cols.first().unwrap() as isize - 10).abs() <= 2);
        assert!((*cols.last().unwrap() as isize - 200).abs() <= 2);
    }

    #[test]
    fn thin_band_is_degenerate() {
        let img = band_image(160, 120, 50.0, 61.0, 0.0);
        let fm = detect_finger_region(&img).unwrap();
        assert!(matches!(extract_roi(&img, &fm, 128, 64), Err(RoiError::DegenerateRoi(..))));
    }

    #[test]
    fn pipeline_is_deterministic() {
        let img = band_image(160, 120, 40.0, 80.0, 0.02);
        let a = roi_pipeline(&img, "s", &RoiParams::default()).unwrap();
        let b = roi_pipeline(&img, "s", &RoiParams::default()).unwrap();
        assert_eq!(a, b);
    }
}
