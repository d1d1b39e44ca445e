//! Vein-visibility pre-processing: CLAHE, high-frequency emphasis
//! filtering and an isotropic (circular) Gabor filter. All three keep the
//! ROI dimensions and mask and emit intensities in `[0, 1]`.

use crate::imgcore::{
    self, bin_of, convolve2d, equalize_histogram, min_max_normalize, Border, GrayImage, Kernel2D,
    TransferFunction,
};
use crate::roi::RoiImage;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaheParams {
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Clip level as a multiple of the uniform bin height.
    pub clip_limit: f64,
    pub bins: usize,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self { tiles_x: 8, tiles_y: 4, clip_limit: 2.0, bins: 256 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HfeParams {
    /// Gaussian cutoff in cycles/pixel (Nyquist = 0.5).
    pub d0: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for HfeParams {
    fn default() -> Self {
        Self { d0: 0.05, k1: 0.5, k2: 1.5 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgfParams {
    /// Radial center frequency in cycles/pixel.
    pub f0: f64,
    /// Gaussian envelope in pixels.
    pub sigma: f64,
    pub kernel_radius: usize,
}

impl Default for CgfParams {
    fn default() -> Self {
        Self { f0: 0.1, sigma: 6.0, kernel_radius: 18 }
    }
}

/// Contrast-limited adaptive histogram equalization over a tile grid with
/// bilinear blending of the per-tile equalization mappings.
pub fn clahe(roi: &RoiImage, p: &ClaheParams) -> RoiImage {
    let img = &roi.image;
    let (w, h) = (img.width(), img.height());
    let tiles_x = p.tiles_x.clamp(1, w);
    let tiles_y = p.tiles_y.clamp(1, h);

    // tile boundaries; edge tiles absorb the remainder
    let xs: Vec<usize> = (0..=tiles_x).map(|i| i * w / tiles_x).collect();
    let ys: Vec<usize> = (0..=tiles_y).map(|i| i * h / tiles_y).collect();

    // per-tile clipped-histogram equalization LUTs
    let mut luts = vec![vec![0f64; p.bins]; tiles_x * tiles_y];
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let mut hist = vec![0f64; p.bins];
            let mut count = 0f64;
            for y in ys[ty]..ys[ty + 1] {
                for x in xs[tx]..xs[tx + 1] {
                    hist[bin_of(img.get(x, y), p.bins)] += 1.0;
                    count += 1.0;
                }
            }
            if count == 0.0 {
                continue;
            }
            let clip = p.clip_limit.max(1.0) * count / p.bins as f64;
            let mut excess = 0.0;
            for c in hist.iter_mut() {
                if *c > clip {
                    excess += *c - clip;
                    *c = clip;
                }
            }
            let bonus = excess / p.bins as f64;
            let lut = &mut luts[ty * tiles_x + tx];
            let mut acc = 0.0;
            for (b, c) in hist.iter().enumerate() {
                acc += c + bonus;
                lut[b] = acc / count;
            }
        }
    }

    // tile centers for the blending weights
    let cxs: Vec<f64> = (0..tiles_x).map(|i| (xs[i] + xs[i + 1]) as f64 / 2.0 - 0.5).collect();
    let cys: Vec<f64> = (0..tiles_y).map(|i| (ys[i] + ys[i + 1]) as f64 / 2.0 - 0.5).collect();
    let locate = |centers: &[f64], v: f64| -> (usize, usize, f64) {
        if v <= centers[0] || centers.len() == 1 {
            return (0, 0, 0.0);
        }
        if v >= *centers.last().unwrap() {
            let i = centers.len() - 1;
            return (i, i, 0.0);
        }
        let mut i = 0;
        while centers[i + 1] < v {
            i += 1;
        }
        let t = (v - centers[i]) / (centers[i + 1] - centers[i]);
        (i, i + 1, t)
    };

    let out = GrayImage::from_fn(w, h, |x, y| {
        let bin = bin_of(img.get(x, y), p.bins);
        let (ix0, ix1, tx) = locate(&cxs, x as f64);
        let (iy0, iy1, ty) = locate(&cys, y as f64);
        let v00 = luts[iy0 * tiles_x + ix0][bin];
        let v10 = luts[iy0 * tiles_x + ix1][bin];
        let v01 = luts[iy1 * tiles_x + ix0][bin];
        let v11 = luts[iy1 * tiles_x + ix1][bin];
        let top = v00 * (1.0 - tx) + v10 * tx;
        let bottom = v01 * (1.0 - tx) + v11 * tx;
        (top * (1.0 - ty) + bottom * ty).clamp(0.0, 1.0)
    });
    roi.with_image(out)
}

/// High-frequency emphasis: Gaussian high-pass with offset and gain in the
/// frequency domain, followed by global histogram equalization and min-max
/// rescaling.
pub fn hfe(roi: &RoiImage, p: &HfeParams) -> RoiImage {
    let tf = TransferFunction::GaussianHighPassEmphasis { d0: p.d0, k1: p.k1, k2: p.k2 };
    let filtered = imgcore::apply_frequency_filter(&roi.image, &tf);
    let rescaled = min_max_normalize(&filtered);
    let equalized = equalize_histogram(&rescaled, 256);
    roi.with_image(min_max_normalize(&equalized))
}

/// Isotropic Gabor kernel: Gaussian envelope times a radial cosine,
/// normalized to zero DC response and unit energy.
pub fn cgf_kernel(p: &CgfParams) -> Kernel2D {
    let r = p.kernel_radius as isize;
    let size = (2 * p.kernel_radius + 1) as usize;
    let mut weights = Vec::with_capacity(size * size);
    for y in -r..=r {
        for x in -r..=r {
            let radius = ((x * x + y * y) as f64).sqrt();
            let envelope = (-(radius * radius) / (2.0 * p.sigma * p.sigma)).exp();
            weights.push(envelope * (2.0 * std::f64::consts::PI * p.f0 * radius).cos());
        }
    }
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    for w in &mut weights {
        *w -= mean;
    }
    let energy = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    if energy > 0.0 {
        for w in &mut weights {
            *w /= energy;
        }
    }
    Kernel2D::new(size, size, weights).expect("kernel size is odd")
}

/// Circular Gabor filtering; the signed response is min-max rescaled.
pub fn cgf(roi: &RoiImage, p: &CgfParams) -> RoiImage {
    let kernel = cgf_kernel(p);
    let response = convolve2d(&roi.image, &kernel, Border::Replicate)
        .unwrap_or_else(|_| GrayImage::zeros(roi.width(), roi.height()));
    roi.with_image(min_max_normalize(&response))
}

/// One step of an enhancement chain.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Enhancer {
    Clahe,
    Hfe,
    Cgf,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhanceParams {
    pub clahe: ClaheParams,
    pub hfe: HfeParams,
    pub cgf: CgfParams,
}

/// Apply an enhancement chain left to right.
pub fn apply_chain(roi: &RoiImage, chain: &[Enhancer], params: &EnhanceParams) -> RoiImage {
    let mut current = roi.clone();
    for step in chain {
        current = match step {
            Enhancer::Clahe => clahe(&current, &params.clahe),
            Enhancer::Hfe => hfe(&current, &params.hfe),
            Enhancer::Cgf => cgf(&current, &params.cgf),
        };
    }
    current
}
