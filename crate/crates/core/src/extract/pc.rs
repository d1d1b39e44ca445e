//! Principal-curvature vein extraction: the larger eigenvalue of the
//! symmetrized Jacobian of a hard-threshold-normalized, smoothed gradient
//! field, binarized at the median of its positive values.

use super::{binarize_response, BinaryVeinPattern, CurvatureParams, ExtractError};
use crate::imgcore::{gaussian_blur, GrayImage};
use crate::roi::RoiImage;

/// Fraction of the maximum gradient magnitude below which vectors keep
/// their length instead of being normalized.
const NORMALIZE_THRESHOLD_FRACTION: f64 = 0.05;

pub fn extract_pc(roi: &RoiImage, p: &CurvatureParams) -> Result<BinaryVeinPattern, ExtractError> {
    if roi.mask.iter().all(|&m| !m) {
        return Err(ExtractError::InvalidRoi);
    }
    let (w, h) = (roi.width(), roi.height());
    let smoothed = gaussian_blur(&roi.image, p.sigma);

    let (mut gx, mut gy) = gradient(&smoothed);
    let max_mag = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(a, b)| (a * a + b * b).sqrt())
        .fold(0.0, f64::max);
    if max_mag == 0.0 {
        log::warn!("flat image: no gradient anywhere");
        let mut pattern = BinaryVeinPattern::new(w, h);
        pattern.source_sample_id = roi.source_sample_id.clone();
        return Ok(pattern);
    }

    // hard-thresholded normalization toward a unit direction field
    let gamma = NORMALIZE_THRESHOLD_FRACTION * max_mag;
    for i in 0..w * h {
        let a = gx.data()[i];
        let b = gy.data()[i];
        let mag = (a * a + b * b).sqrt();
        if mag > gamma {
            gx.data_mut()[i] = a / mag;
            gy.data_mut()[i] = b / mag;
        }
    }

    let gx = gaussian_blur(&gx, p.sigma);
    let gy = gaussian_blur(&gy, p.sigma);

    // symmetrized Jacobian of the field, largest eigenvalue per pixel
    let (gxx, gxy) = gradient(&gx);
    let (gyx, gyy) = gradient(&gy);
    let mut response = vec![0f64; w * h];
    for i in 0..w * h {
        let a = gxx.data()[i];
        let d = gyy.data()[i];
        let b = (gxy.data()[i] + gyx.data()[i]) / 2.0;
        let mean = (a + d) / 2.0;
        let dev = (((a - d) / 2.0).powi(2) + b * b).sqrt();
        response[i] = (mean + dev).max(0.0);
    }

    Ok(binarize_response(&response, w, h, &roi.mask, &roi.source_sample_id))
}

/// Central-difference gradient with replicated borders.
fn gradient(img: &GrayImage) -> (GrayImage, GrayImage) {
    let (w, h) = (img.width(), img.height());
    let at = |x: isize, y: isize| {
        img.get(x.clamp(0, w as isize - 1) as usize, y.clamp(0, h as isize - 1) as usize)
    };
    let gx = GrayImage::from_fn(w, h, |x, y| {
        (at(x as isize + 1, y as isize) - at(x as isize - 1, y as isize)) / 2.0
    });
    let gy = GrayImage::from_fn(w, h, |x, y| {
        (at(x as isize, y as isize + 1) - at(x as isize, y as isize - 1)) / 2.0
    });
    (gx, gy)
}
