//! Scale-space keypoints: difference-of-Gaussians extrema with subpixel
//! refinement, contrast and edge-response rejection, gradient-histogram
//! orientation, 4x4x8 gradient descriptors, and vein-specific filtering
//! that discards keypoints on or near the finger boundary (those encode
//! the finger outline rather than the vein pattern).

use super::{ExtractError, Keypoint, KeypointFeature, DESCRIPTOR_LEN};
use crate::imgcore::{gaussian_blur, GrayImage};
use crate::roi::RoiImage;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct SiftParams {
    pub octaves: usize,
    pub scales_per_octave: usize,
    pub sigma0: f64,
    pub contrast_threshold: f64,
    /// Keep a keypoint only while `trace^2 / det < edge_ratio_threshold`.
    pub edge_ratio_threshold: f64,
    /// Discard keypoints within this distance of the mask boundary.
    pub boundary_margin: f64,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            octaves: 3,
            scales_per_octave: 3,
            sigma0: 1.6,
            contrast_threshold: 0.03,
            edge_ratio_threshold: 10.0,
            boundary_margin: 8.0,
        }
    }
}

/// Assumed blur of the incoming raster.
const INPUT_SIGMA: f64 = 0.5;
const MAX_REFINE_STEPS: usize = 5;
const ORIENTATION_BINS: usize = 36;
const DESCRIPTOR_GRID: usize = 4;
const DESCRIPTOR_ORI_BINS: usize = 8;
const DESCRIPTOR_CLIP: f32 = 0.2;

pub fn extract_keypoints(roi: &RoiImage) -> Result<KeypointFeature, ExtractError> {
    extract_keypoints_with(roi, &SiftParams::default())
}

pub fn extract_keypoints_with(
    roi: &RoiImage,
    params: &SiftParams,
) -> Result<KeypointFeature, ExtractError> {
    if roi.mask.iter().all(|&m| !m) {
        return Err(ExtractError::InvalidRoi);
    }
    let levels = params.scales_per_octave + 3;
    let k = 2f64.powf(1.0 / params.scales_per_octave as f64);

    // scale-space pyramid
    let mut octaves: Vec<Vec<GrayImage>> = Vec::with_capacity(params.octaves);
    let initial = (params.sigma0 * params.sigma0 - INPUT_SIGMA * INPUT_SIGMA).max(1e-6).sqrt();
    let mut base = gaussian_blur(&roi.image, initial);
    for _ in 0..params.octaves {
        let mut gauss = Vec::with_capacity(levels);
        gauss.push(base.clone());
        for level in 1..levels {
            let prev_sigma = params.sigma0 * k.powi(level as i32 - 1);
            let delta = prev_sigma * (k * k - 1.0).sqrt();
            gauss.push(gaussian_blur(&gauss[level - 1], delta));
        }
        let next_base = downsample(&gauss[params.scales_per_octave]);
        octaves.push(gauss);
        if next_base.width() < 16 || next_base.height() < 16 {
            break;
        }
        base = next_base;
    }

    let mut keypoints = Vec::new();
    let mut descriptors = Vec::new();
    for (octave_idx, gauss) in octaves.iter().enumerate() {
        let dog: Vec<GrayImage> = (0..levels - 1)
            .map(|i| {
                GrayImage::from_fn(gauss[i].width(), gauss[i].height(), |x, y| {
                    gauss[i + 1].get(x, y) - gauss[i].get(x, y)
                })
            })
            .collect();
        detect_in_octave(
            roi,
            params,
            k,
            octave_idx,
            gauss,
            &dog,
            &mut keypoints,
            &mut descriptors,
        );
    }

    if keypoints.is_empty() {
        log::warn!("no keypoints detected for sample `{}`", roi.source_sample_id);
    }
    Ok(KeypointFeature { keypoints, descriptors, source_sample_id: roi.source_sample_id.clone() })
}

fn downsample(img: &GrayImage) -> GrayImage {
    let w = (img.width() / 2).max(1);
    let h = (img.height() / 2).max(1);
    GrayImage::from_fn(w, h, |x, y| img.get(2 * x, 2 * y))
}

#[allow(clippy::too_many_arguments)]
fn detect_in_octave(
    roi: &RoiImage,
    params: &SiftParams,
    k: f64,
    octave_idx: usize,
    gauss: &[GrayImage],
    dog: &[GrayImage],
    keypoints: &mut Vec<Keypoint>,
    descriptors: &mut Vec<[f32; DESCRIPTOR_LEN]>,
) {
    let (w, h) = (dog[0].width(), dog[0].height());
    if w < 10 || h < 10 {
        return;
    }
    let scale_factor = (1usize << octave_idx) as f64;
    let prefilter = 0.5 * params.contrast_threshold;

    for layer in 1..dog.len() - 1 {
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let v = dog[layer].get(x, y);
                if v.abs() < prefilter || !is_extremum(dog, layer, x, y, v) {
                    continue;
                }
                let Some((rx, ry, rlayer, dx, dy, dsigma, refined_value)) =
                    refine(dog, layer, x, y)
                else {
                    continue;
                };
                if refined_value.abs() < params.contrast_threshold {
                    continue;
                }
                if is_edge_response(&dog[rlayer], rx, ry, params.edge_ratio_threshold) {
                    continue;
                }

                let abs_x = (rx as f64 + dx) * scale_factor;
                let abs_y = (ry as f64 + dy) * scale_factor;
                if !passes_mask_filter(roi, abs_x, abs_y, params.boundary_margin) {
                    continue;
                }

                let octave_sigma = params.sigma0 * k.powf(rlayer as f64 + dsigma);
                let abs_sigma = octave_sigma * scale_factor;
                let gx = rx as f64 + dx;
                let gy = ry as f64 + dy;
                for orientation in dominant_orientations(&gauss[rlayer], gx, gy, octave_sigma) {
                    if let Some(descriptor) =
                        describe(&gauss[rlayer], gx, gy, octave_sigma, orientation)
                    {
                        keypoints.push(Keypoint {
                            x: abs_x,
                            y: abs_y,
                            scale: abs_sigma,
                            orientation,
                        });
                        descriptors.push(descriptor);
                    }
                }
            }
        }
    }
}

fn is_extremum(dog: &[GrayImage], layer: usize, x: usize, y: usize, v: f64) -> bool {
    let mut is_max = true;
    let mut is_min = true;
    for l in layer - 1..=layer + 1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if l == layer && dx == 0 && dy == 0 {
                    continue;
                }
                let n = dog[l].get((x as isize + dx) as usize, (y as isize + dy) as usize);
                if n >= v {
                    is_max = false;
                }
                if n <= v {
                    is_min = false;
                }
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    is_max || is_min
}

type Refined = (usize, usize, usize, f64, f64, f64, f64);

/// 3D quadratic refinement of an extremum; returns the relocated integer
/// position, the subpixel offset and the interpolated DoG value.
fn refine(dog: &[GrayImage], layer: usize, x: usize, y: usize) -> Option<Refined> {
    let (w, h) = (dog[0].width(), dog[0].height());
    let (mut l, mut cx, mut cy) = (layer, x, y);
    for _ in 0..MAX_REFINE_STEPS {
        let d = |l: usize, x: usize, y: usize| dog[l].get(x, y);
        let gx = (d(l, cx + 1, cy) - d(l, cx - 1, cy)) / 2.0;
        let gy = (d(l, cx, cy + 1) - d(l, cx, cy - 1)) / 2.0;
        let gs = (d(l + 1, cx, cy) - d(l - 1, cx, cy)) / 2.0;
        let v = d(l, cx, cy);
        let dxx = d(l, cx + 1, cy) - 2.0 * v + d(l, cx - 1, cy);
        let dyy = d(l, cx, cy + 1) - 2.0 * v + d(l, cx, cy - 1);
        let dss = d(l + 1, cx, cy) - 2.0 * v + d(l - 1, cx, cy);
        let dxy = (d(l, cx + 1, cy + 1) - d(l, cx - 1, cy + 1) - d(l, cx + 1, cy - 1)
            + d(l, cx - 1, cy - 1))
            / 4.0;
        let dxs = (d(l + 1, cx + 1, cy) - d(l + 1, cx - 1, cy) - d(l - 1, cx + 1, cy)
            + d(l - 1, cx - 1, cy))
            / 4.0;
        let dys = (d(l + 1, cx, cy + 1) - d(l + 1, cx, cy - 1) - d(l - 1, cx, cy + 1)
            + d(l - 1, cx, cy - 1))
            / 4.0;

        let (ox, oy, os) = solve3(
            [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]],
            [-gx, -gy, -gs],
        )?;
        if ox.abs() < 0.5 && oy.abs() < 0.5 && os.abs() < 0.5 {
            let refined_value = v + 0.5 * (gx * ox + gy * oy + gs * os);
            return Some((cx, cy, l, ox, oy, os, refined_value));
        }
        let nx = cx as isize + ox.round() as isize;
        let ny = cy as isize + oy.round() as isize;
        let nl = l as isize + os.round() as isize;
        if nx < 1
            || ny < 1
            || nl < 1
            || nx as usize >= w - 1
            || ny as usize >= h - 1
            || nl as usize >= dog.len() - 1
        {
            return None;
        }
        cx = nx as usize;
        cy = ny as usize;
        l = nl as usize;
    }
    None
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<(f64, f64, f64)> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    let x = (b[0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (b[1] * m[2][2] - m[1][2] * b[2])
        + m[0][2] * (b[1] * m[2][1] - m[1][1] * b[2]))
        * inv_det;
    let y = (m[0][0] * (b[1] * m[2][2] - m[1][2] * b[2])
        - b[0] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * b[2] - b[1] * m[2][0]))
        * inv_det;
    let z = (m[0][0] * (m[1][1] * b[2] - b[1] * m[2][1])
        - m[0][1] * (m[1][0] * b[2] - b[1] * m[2][0])
        + b[0] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
        * inv_det;
    Some((x, y, z))
}

fn is_edge_response(dog: &GrayImage, x: usize, y: usize, ratio: f64) -> bool {
    let v = dog.get(x, y);
    let dxx = dog.get(x + 1, y) - 2.0 * v + dog.get(x - 1, y);
    let dyy = dog.get(x, y + 1) - 2.0 * v + dog.get(x, y - 1);
    let dxy =
        (dog.get(x + 1, y + 1) - dog.get(x - 1, y + 1) - dog.get(x + 1, y - 1) + dog.get(x - 1, y - 1))
            / 4.0;
    let trace = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det <= 0.0 || trace * trace / det >= ratio
}

/// A keypoint survives only inside the mask and at least `margin` pixels
/// away from any masked-out pixel or image border.
fn passes_mask_filter(roi: &RoiImage, x: f64, y: f64, margin: f64) -> bool {
    let (w, h) = (roi.width() as isize, roi.height() as isize);
    let cx = x.round() as isize;
    let cy = y.round() as isize;
    if cx < 0 || cy < 0 || cx >= w || cy >= h {
        return false;
    }
    let r = margin.ceil() as isize;
    let m2 = margin * margin;
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx * dx + dy * dy) as f64 > m2 {
                continue;
            }
            let (qx, qy) = (cx + dx, cy + dy);
            if qx < 0 || qy < 0 || qx >= w || qy >= h {
                return false; // image border counts as boundary
            }
            if !roi.mask[qy as usize * w as usize + qx as usize] {
                return false;
            }
        }
    }
    true
}

fn gradient_at(img: &GrayImage, x: usize, y: usize) -> (f64, f64) {
    let dx = img.get(x + 1, y) - img.get(x - 1, y);
    let dy = img.get(x, y + 1) - img.get(x, y - 1);
    ((dx * dx + dy * dy).sqrt(), dy.atan2(dx))
}

/// 36-bin orientation histogram; every peak at >= 80% of the maximum
/// spawns a keypoint orientation (parabolic peak interpolation).
fn dominant_orientations(img: &GrayImage, x: f64, y: f64, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let cx = x.round() as isize;
    let cy = y.round() as isize;
    let sigma_w = 1.5 * sigma;
    let radius = (3.0 * sigma_w).round() as isize;
    let mut hist = [0f64; ORIENTATION_BINS];

    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (px, py) = (cx + dx, cy + dy);
            if px < 1 || py < 1 || px >= w - 1 || py >= h - 1 {
                continue;
            }
            let (mag, theta) = gradient_at(img, px as usize, py as usize);
            let weight = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_w * sigma_w)).exp();
            let mut bin =
                ((theta + PI) / (2.0 * PI) * ORIENTATION_BINS as f64).floor() as isize;
            bin = bin.rem_euclid(ORIENTATION_BINS as isize);
            hist[bin as usize] += mag * weight;
        }
    }

    // two passes of circular [1 1 1]/3 smoothing
    for _ in 0..2 {
        let snapshot = hist;
        for i in 0..ORIENTATION_BINS {
            let l = snapshot[(i + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
            let r = snapshot[(i + 1) % ORIENTATION_BINS];
            hist[i] = (l + snapshot[i] + r) / 3.0;
        }
    }

    let max = hist.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut orientations = Vec::new();
    for i in 0..ORIENTATION_BINS {
        let l = hist[(i + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
        let r = hist[(i + 1) % ORIENTATION_BINS];
        if hist[i] >= 0.8 * max && hist[i] > l && hist[i] > r {
            let denom = l - 2.0 * hist[i] + r;
            let offset = if denom.abs() < 1e-12 { 0.0 } else { 0.5 * (l - r) / denom };
            let angle = (i as f64 + 0.5 + offset) / ORIENTATION_BINS as f64 * 2.0 * PI - PI;
            orientations.push(angle);
        }
    }
    orientations
}

/// 4x4 spatial x 8 orientation gradient descriptor in the keypoint frame,
/// L2-normalized, clipped at 0.2 and renormalized.
fn describe(
    img: &GrayImage,
    x: f64,
    y: f64,
    sigma: f64,
    orientation: f64,
) -> Option<[f32; DESCRIPTOR_LEN]> {
    let d = DESCRIPTOR_GRID as f64;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let hist_width = 3.0 * sigma;
    let radius = (hist_width * (d + 1.0) * std::f64::consts::SQRT_2 / 2.0).round() as isize;
    let (sin_t, cos_t) = orientation.sin_cos();
    let bins_per_rad = DESCRIPTOR_ORI_BINS as f64 / (2.0 * PI);
    let exp_scale = -2.0 / (d * d);

    let mut hist = [0f64; DESCRIPTOR_GRID * DESCRIPTOR_GRID * DESCRIPTOR_ORI_BINS];
    let cx = x.round() as isize;
    let cy = y.round() as isize;

    for i in -radius..=radius {
        for j in -radius..=radius {
            let (px, py) = (cx + j, cy + i);
            if px < 1 || py < 1 || px >= w - 1 || py >= h - 1 {
                continue;
            }
            // rotate the offset into the keypoint frame, in hist units
            let jx = j as f64 + (x - cx as f64);
            let iy = i as f64 + (y - cy as f64);
            let x_rot = (jx * cos_t + iy * sin_t) / hist_width;
            let y_rot = (-jx * sin_t + iy * cos_t) / hist_width;
            let rbin = y_rot + d / 2.0 - 0.5;
            let cbin = x_rot + d / 2.0 - 0.5;
            if rbin <= -1.0 || rbin >= d || cbin <= -1.0 || cbin >= d {
                continue;
            }
            let (mag, theta) = gradient_at(img, px as usize, py as usize);
            let mut obin = (theta - orientation) * bins_per_rad;
            while obin < 0.0 {
                obin += DESCRIPTOR_ORI_BINS as f64;
            }
            while obin >= DESCRIPTOR_ORI_BINS as f64 {
                obin -= DESCRIPTOR_ORI_BINS as f64;
            }
            let weight = (exp_scale * (x_rot * x_rot + y_rot * y_rot)).exp();
            trilinear_scatter(&mut hist, rbin, cbin, obin, mag * weight);
        }
    }

    let mut descriptor = [0f32; DESCRIPTOR_LEN];
    for (dst, src) in descriptor.iter_mut().zip(hist.iter()) {
        *dst = *src as f32;
    }
    let norm = descriptor.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return None;
    }
    for v in &mut descriptor {
        *v = ((*v as f64 / norm) as f32).min(DESCRIPTOR_CLIP);
    }
    let norm2 = descriptor.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
    for v in &mut descriptor {
        *v = (*v as f64 / norm2) as f32;
    }
    Some(descriptor)
}

fn trilinear_scatter(hist: &mut [f64], rbin: f64, cbin: f64, obin: f64, value: f64) {
    let r0 = rbin.floor() as isize;
    let c0 = cbin.floor() as isize;
    let o0 = obin.floor() as isize;
    let dr = rbin - r0 as f64;
    let dc = cbin - c0 as f64;
    let dob = obin - o0 as f64;
    let d = DESCRIPTOR_GRID as isize;

    for (ri, rw) in [(r0, 1.0 - dr), (r0 + 1, dr)] {
        if ri < 0 || ri >= d {
            continue;
        }
        for (ci, cw) in [(c0, 1.0 - dc), (c0 + 1, dc)] {
            if ci < 0 || ci >= d {
                continue;
            }
            for (oi, ow) in [(o0, 1.0 - dob), (o0 + 1, dob)] {
                let o = oi.rem_euclid(DESCRIPTOR_ORI_BINS as isize) as usize;
                let idx = (ri as usize * DESCRIPTOR_GRID + ci as usize) * DESCRIPTOR_ORI_BINS + o;
                hist[idx] += value * rw * cw * ow;
            }
        }
    }
}
