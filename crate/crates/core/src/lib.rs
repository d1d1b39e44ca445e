//! Fingervein recognition toolkit: ROI extraction, vein enhancement, four
//! classical template extractors with their matchers, and the grouped
//! score-statistics machinery used for demographic bias audits.
//!
//! Pipeline stages map onto the modules:
//!
//! 1. [`ingest`] — manifests, image loading, external score import, phantom
//!    dataset synthesis.
//! 2. [`roi`] — finger detection, rotational alignment, ROI cropping.
//! 3. [`enhance`] — CLAHE, high-frequency emphasis, circular Gabor.
//! 4. [`extract`] — maximum curvature, principal curvature, Log-Gabor+LBP
//!    texture, filtered scale-space keypoints.
//! 5. [`compare`] — correlation matching of binary patterns, histogram
//!    intersection, ratio-test keypoint matching.
//! 6. [`evalstat`] — comparison plans, EER, grouped statistics, Z-scores,
//!    bias reports.

pub mod compare;
pub mod enhance;
pub mod evalstat;
pub mod extract;
pub mod imgcore;
pub mod ingest;
pub mod pipeline;
pub mod roi;
