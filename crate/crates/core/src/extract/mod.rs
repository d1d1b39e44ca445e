//! Template extractors: maximum curvature and principal curvature binary
//! vein patterns, Log-Gabor + uniform LBP texture histograms, and
//! filtered scale-space keypoints with gradient descriptors.

mod io;
mod lbp;
mod mc;
mod pc;
mod sift;

pub use io::{read_feature, write_feature, FeatureIoError};
pub use lbp::extract_lbp;
pub use mc::extract_mc;
pub use pc::extract_pc;
pub use sift::{extract_keypoints, extract_keypoints_with, SiftParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ExtractError {
    #[error("ROI mask is empty")]
    InvalidRoi,
    #[error("block grid {gx}x{gy} yields a block smaller than 3x3 px")]
    InvalidBlockGrid { gx: usize, gy: usize },
}

/// Binary vein pattern; `true` marks a vein pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryVeinPattern {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
    pub source_sample_id: String,
}

impl BinaryVeinPattern {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height], source_sample_id: String::new() }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn true_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Concatenated per-block LBP histograms over Log-Gabor magnitudes,
/// laid out scale-major, then block-row, then block-column; 59 bins per
/// block (58 uniform codes plus one catch-all).
#[derive(Clone, Debug, PartialEq)]
pub struct TextureFeature {
    pub grid_x: usize,
    pub grid_y: usize,
    pub scales: usize,
    pub histograms: Vec<f64>,
    pub source_sample_id: String,
}

pub const LBP_BINS: usize = 59;

impl TextureFeature {
    pub fn expected_len(&self) -> usize {
        self.grid_x * self.grid_y * self.scales * LBP_BINS
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.grid_x == other.grid_x && self.grid_y == other.grid_y && self.scales == other.scales
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub orientation: f64,
}

pub const DESCRIPTOR_LEN: usize = 128;

/// Scale-space keypoints with L2-normalized 128-vector descriptors.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct KeypointFeature {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<[f32; DESCRIPTOR_LEN]>,
    pub source_sample_id: String,
}

impl KeypointFeature {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

/// Per-sample template, one variant per extractor family.
#[derive(Clone, Debug, PartialEq)]
pub enum Feature {
    BinaryVeinPattern(BinaryVeinPattern),
    Texture(TextureFeature),
    Keypoints(KeypointFeature),
}

impl Feature {
    pub fn sample_id(&self) -> &str {
        match self {
            Feature::BinaryVeinPattern(p) => &p.source_sample_id,
            Feature::Texture(t) => &t.source_sample_id,
            Feature::Keypoints(k) => &k.source_sample_id,
        }
    }
}

/// Parameters shared by the two curvature extractors.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvatureParams {
    /// Profile / field smoothing scale in pixels.
    pub sigma: f64,
}

impl Default for CurvatureParams {
    fn default() -> Self {
        Self { sigma: 3.0 }
    }
}

/// Median of the strictly positive entries; `None` when all are <= 0.
pub(crate) fn positive_median(values: &[f64]) -> Option<f64> {
    let mut positives: Vec<f64> = values.iter().cloned().filter(|&v| v > 0.0).collect();
    if positives.is_empty() {
        return None;
    }
    positives.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = positives.len();
    Some(if n % 2 == 1 {
        positives[n / 2]
    } else {
        (positives[n / 2 - 1] + positives[n / 2]) / 2.0
    })
}

/// Threshold a response plane at the median of its positive values and
/// clear everything outside the ROI mask.
pub(crate) fn binarize_response(
    response: &[f64],
    width: usize,
    height: usize,
    mask: &[bool],
    sample_id: &str,
) -> BinaryVeinPattern {
    let mut pattern = BinaryVeinPattern::new(width, height);
    pattern.source_sample_id = sample_id.to_string();
    match positive_median(response) {
        Some(threshold) => {
            for i in 0..response.len() {
                pattern.bits[i] = response[i] > threshold && mask[i];
            }
        }
        None => {
            log::warn!("no positive response anywhere; emitting an empty pattern");
        }
    }
    pattern
}
