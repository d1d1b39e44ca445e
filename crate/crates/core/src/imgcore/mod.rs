//! Raster foundation shared by every pipeline stage: a floating-point
//! grayscale image type, spatial convolution, frequency-domain filtering
//! and histogram utilities.

pub mod fft;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum ImgError {
    #[error("kernel {kw}x{kh} does not fit image {iw}x{ih}")]
    InvalidKernel { kw: usize, kh: usize, iw: usize, ih: usize },
    #[error("kernel dimensions must be odd, got {0}x{1}")]
    EvenKernel(usize, usize),
    #[error("image dimensions must be at least 1x1")]
    EmptyImage,
}

/// Border policy for spatial filters.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Border {
    /// Clamp to the nearest edge pixel.
    Replicate,
    /// Mirror across the edge, edge pixel included (`abc -> abc|cba`).
    Reflect,
}

/// Row-major grayscale raster with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImgError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(ImgError::EmptyImage);
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Fetch with a border policy; `x`/`y` may lie outside the raster.
    #[inline]
    pub fn get_bordered(&self, x: isize, y: isize, border: Border) -> f64 {
        let xi = border_index(x, self.width, border);
        let yi = border_index(y, self.height, border);
        self.data[yi * self.width + xi]
    }

    /// Bilinear sample at real-valued coordinates, clamped to the raster.
    pub fn sample_bilinear(&self, fx: f64, fy: f64) -> f64 {
        let fx = fx.clamp(0.0, (self.width - 1) as f64);
        let fy = fy.clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let a = self.get(x0, y0);
        let b = self.get(x1, y0);
        let c = self.get(x0, y1);
        let d = self.get(x1, y1);
        a * (1.0 - tx) * (1.0 - ty) + b * tx * (1.0 - ty) + c * (1.0 - tx) * ty + d * tx * ty
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

#[inline]
fn border_index(i: isize, n: usize, border: Border) -> usize {
    let n = n as isize;
    match border {
        Border::Replicate => i.clamp(0, n - 1) as usize,
        Border::Reflect => {
            // Symmetric reflection with period 2n: ...cba|abc|cba...
            let period = 2 * n;
            let mut m = i % period;
            if m < 0 {
                m += period;
            }
            if m < n {
                m as usize
            } else {
                (period - 1 - m) as usize
            }
        }
    }
}

/// Odd-sized spatial convolution kernel.
#[derive(Clone, Debug)]
pub struct Kernel2D {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self, ImgError> {
        if width % 2 == 0 || height % 2 == 0 {
            return Err(ImgError::EvenKernel(width, height));
        }
        assert_eq!(weights.len(), width * height, "weight count mismatch");
        Ok(Self { width, height, weights })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Frequency-domain transfer functions evaluated on centered normalized
/// frequencies (cycles per pixel, Nyquist = 0.5).
#[derive(Clone, Debug)]
pub enum TransferFunction {
    /// `H(D) = k1 + k2 * (1 - exp(-D^2 / (2 d0^2)))`
    GaussianHighPassEmphasis { d0: f64, k1: f64, k2: f64 },
    /// `H(D) = exp(-(D - f0)^2 / (2 sigma_f^2))`
    IsotropicBandPass { f0: f64, sigma_f: f64 },
}

impl TransferFunction {
    pub fn eval(&self, radial_freq: f64) -> f64 {
        match *self {
            TransferFunction::GaussianHighPassEmphasis { d0, k1, k2 } => {
                debug_assert!(d0 > 0.0 && k2 >= 0.0);
                k1 + k2 * (1.0 - (-radial_freq * radial_freq / (2.0 * d0 * d0)).exp())
            }
            TransferFunction::IsotropicBandPass { f0, sigma_f } => {
                debug_assert!(sigma_f > 0.0);
                let d = radial_freq - f0;
                (-d * d / (2.0 * sigma_f * sigma_f)).exp()
            }
        }
    }
}

/// True 2D convolution (kernel mirrored relative to the neighborhood walk):
/// an impulse input reproduces the kernel unflipped.
pub fn convolve2d(img: &GrayImage, k: &Kernel2D, border: Border) -> Result<GrayImage, ImgError> {
    if k.width > img.width || k.height > img.height {
        return Err(ImgError::InvalidKernel {
            kw: k.width,
            kh: k.height,
            iw: img.width,
            ih: img.height,
        });
    }
    let cx = (k.width / 2) as isize;
    let cy = (k.height / 2) as isize;
    let mut out = GrayImage::zeros(img.width, img.height);
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let mut acc = 0.0;
            for ky in 0..k.height as isize {
                for kx in 0..k.width as isize {
                    let w = k.weights[(ky * k.width as isize + kx) as usize];
                    acc += w * img.get_bordered(x - (kx - cx), y - (ky - cy), border);
                }
            }
            out.set(x as usize, y as usize, acc);
        }
    }
    Ok(out)
}

/// Filter an image through a radial transfer function in the frequency
/// domain. The raster is reflect-padded to the next power of two per axis
/// and cropped back after the inverse transform; the real part is kept.
pub fn apply_frequency_filter(img: &GrayImage, tf: &TransferFunction) -> GrayImage {
    fft::apply_radial_transfer(img, |d| tf.eval(d), fft::Output::Real)
}

/// Histogram of pixel counts over `bins` equal subdivisions of `[0, 1]`;
/// the last bin is closed and out-of-range values clamp to the end bins.
pub fn image_histogram(img: &GrayImage, bins: usize) -> Vec<u64> {
    assert!(bins >= 2, "need at least 2 bins");
    let mut hist = vec![0u64; bins];
    for &v in img.data() {
        hist[bin_of(v, bins)] += 1;
    }
    hist
}

#[inline]
pub(crate) fn bin_of(v: f64, bins: usize) -> usize {
    let b = (v * bins as f64).floor();
    if b < 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

/// Normalized 1D Gaussian taps, radius `ceil(3 sigma)`.
pub fn gaussian_kernel_1d(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0);
    let radius = (3.0 * sigma).ceil() as usize;
    let mut taps = Vec::with_capacity(2 * radius + 1);
    let denom = 2.0 * sigma * sigma;
    for i in -(radius as isize)..=(radius as isize) {
        taps.push((-(i * i) as f64 / denom).exp());
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable Gaussian blur with replicate borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let taps = gaussian_kernel_1d(sigma);
    let radius = (taps.len() / 2) as isize;
    let (w, h) = (img.width, img.height);
    let mut tmp = GrayImage::zeros(w, h);
    for y in 0..h {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * img.get_bordered(x + i as isize - radius, y as isize, Border::Replicate);
            }
            tmp.set(x as usize, y, acc);
        }
    }
    let mut out = GrayImage::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * tmp.get_bordered(x as isize, y + i as isize - radius, Border::Replicate);
            }
            out.set(x, y as usize, acc);
        }
    }
    out
}

/// Smooth a 1D signal with a Gaussian, replicating the endpoints.
pub fn smooth_profile(profile: &[f64], sigma: f64) -> Vec<f64> {
    let taps = gaussian_kernel_1d(sigma);
    let radius = (taps.len() / 2) as isize;
    let n = profile.len() as isize;
    let mut out = Vec::with_capacity(profile.len());
    for i in 0..n {
        let mut acc = 0.0;
        for (j, t) in taps.iter().enumerate() {
            let idx = (i + j as isize - radius).clamp(0, n - 1);
            acc += t * profile[idx as usize];
        }
        out.push(acc);
    }
    out
}

/// Rotate about the raster center by `angle_rad` (counter-clockwise for a
/// y-down raster when positive), bilinear interpolation, outside -> 0.
pub fn rotate_bilinear(img: &GrayImage, angle_rad: f64) -> GrayImage {
    let (w, h) = (img.width, img.height);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (sin, cos) = (-angle_rad).sin_cos();
    GrayImage::from_fn(w, h, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        let sx = cx + cos * dx - sin * dy;
        let sy = cy + sin * dx + cos * dy;
        if sx < -0.5 || sy < -0.5 || sx > w as f64 - 0.5 || sy > h as f64 - 0.5 {
            0.0
        } else {
            img.sample_bilinear(sx, sy)
        }
    })
}

/// Bilinear resize; a same-size request is a plain copy.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> GrayImage {
    assert!(out_w >= 1 && out_h >= 1);
    if out_w == img.width && out_h == img.height {
        return img.clone();
    }
    let sx = img.width as f64 / out_w as f64;
    let sy = img.height as f64 / out_h as f64;
    GrayImage::from_fn(out_w, out_h, |x, y| {
        let fx = (x as f64 + 0.5) * sx - 0.5;
        let fy = (y as f64 + 0.5) * sy - 0.5;
        img.sample_bilinear(fx, fy)
    })
}

/// Affine rescale to `[0, 1]`; a (near-)constant raster maps to all zeros.
pub fn min_max_normalize(img: &GrayImage) -> GrayImage {
    let (lo, hi) = img.min_max();
    if !(hi - lo).is_finite() || hi - lo < 1e-12 {
        return GrayImage::zeros(img.width, img.height);
    }
    let scale = 1.0 / (hi - lo);
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = (*v - lo) * scale;
    }
    out
}

/// Global histogram equalization: `out = cdf(bin(v)) / n`.
pub fn equalize_histogram(img: &GrayImage, bins: usize) -> GrayImage {
    let hist = image_histogram(img, bins);
    let n = (img.width * img.height) as f64;
    let mut cdf = vec![0.0; bins];
    let mut acc = 0u64;
    for (i, &c) in hist.iter().enumerate() {
        acc += c;
        cdf[i] = acc as f64 / n;
    }
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = cdf[bin_of(*v, bins)];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse(w: usize, h: usize) -> GrayImage {
        let mut img = GrayImage::zeros(w, h);
        img.set(w / 2, h / 2, 1.0);
        img
    }

    /// Direct summation reference for `convolve2d` (no border tricks needed
    /// when the support stays inside the raster).
    fn convolve_naive(img: &GrayImage, k: &Kernel2D, border: Border) -> GrayImage {
        let cx = (k.width() / 2) as isize;
        let cy = (k.height() / 2) as isize;
        GrayImage::from_fn(img.width(), img.height(), |x, y| {
            let mut acc = 0.0;
            for ky in 0..k.height() as isize {
                for kx in 0..k.width() as isize {
                    let w = k.weights()[(ky * k.width() as isize + kx) as usize];
                    acc += w * img.get_bordered(x as isize - (kx - cx), y as isize - (ky - cy), border);
                }
            }
            acc
        })
    }

    #[test]
    fn identity_kernel_is_identity() {
        let img = GrayImage::from_fn(7, 5, |x, y| (x as f64 * 0.1 + y as f64 * 0.05).fract());
        let k = Kernel2D::new(1, 1, vec![1.0]).unwrap();
        let out = convolve2d(&img, &k, Border::Replicate).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_image_scales_by_kernel_sum() {
        let img = GrayImage::filled(9, 9, 0.4);
        let k = Kernel2D::new(3, 3, vec![0.5, -1.0, 2.0, 0.0, 1.5, 0.25, -0.5, 1.0, 0.75]).unwrap();
        let out = convolve2d(&img, &k, Border::Reflect).unwrap();
        let expected = 0.4 * k.sum();
        for &v in out.data() {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_reproduces_kernel() {
        let img = impulse(5, 5);
        let weights: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let k = Kernel2D::new(3, 3, weights.clone()).unwrap();
        let out = convolve2d(&img, &k, Border::Replicate).unwrap();
        let oracle = convolve_naive(&img, &k, Border::Replicate);
        for y in 0..5 {
            for x in 0..5 {
                assert!((out.get(x, y) - oracle.get(x, y)).abs() < 1e-12);
                if (1..=3).contains(&x) && (1..=3).contains(&y) {
                    assert!((out.get(x, y) - weights[(y - 1) * 3 + (x - 1)]).abs() < 1e-12);
                } else {
                    assert_eq!(out.get(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn oversized_kernel_rejected() {
        let img = GrayImage::zeros(4, 4);
        let k = Kernel2D::new(5, 5, vec![0.0; 25]).unwrap();
        assert!(matches!(convolve2d(&img, &k, Border::Replicate), Err(ImgError::InvalidKernel { .. })));
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(Kernel2D::new(2, 3, vec![0.0; 6]).is_err());
    }

    #[test]
    fn frequency_filter_zero_image() {
        let img = GrayImage::zeros(12, 9);
        let tf = TransferFunction::GaussianHighPassEmphasis { d0: 0.05, k1: 0.5, k2: 1.5 };
        let out = apply_frequency_filter(&img, &tf);
        for &v in out.data() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_filter_removes_dc_with_zero_offset() {
        let img = GrayImage::filled(20, 14, 0.7);
        let tf = TransferFunction::GaussianHighPassEmphasis { d0: 0.1, k1: 0.0, k2: 1.5 };
        let out = apply_frequency_filter(&img, &tf);
        let mean: f64 = out.data().iter().sum::<f64>() / out.data().len() as f64;
        assert!(mean.abs() < 1e-6);
    }

    #[test]
    fn frequency_filter_identity_transfer() {
        // k1=1, k2=0 is an all-pass transfer; compare against a direct DFT
        // round trip of the same impulse.
        let img = impulse(16, 16);
        let tf = TransferFunction::GaussianHighPassEmphasis { d0: 0.05, k1: 1.0, k2: 0.0 };
        let out = apply_frequency_filter(&img, &tf);
        let oracle = fft::dft2d_roundtrip_naive(&img);
        for i in 0..img.data().len() {
            assert!((out.data()[i] - img.data()[i]).abs() < 1e-6);
            assert!((out.data()[i] - oracle.data()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn histogram_constant_images() {
        let zeros = GrayImage::zeros(4, 4);
        let h = image_histogram(&zeros, 8);
        assert_eq!(h[0], 16);
        assert_eq!(h.iter().sum::<u64>(), 16);

        let ones = GrayImage::filled(4, 4, 1.0);
        let h = image_histogram(&ones, 8);
        assert_eq!(h[7], 16);
    }

    #[test]
    fn histogram_hand_count() {
        let img = GrayImage::new(2, 2, vec![0.1, 0.1, 0.6, 0.9]).unwrap();
        let h = image_histogram(&img, 2);
        assert_eq!(h, vec![2, 2]);
    }

    #[test]
    fn reflect_border_mirrors_with_edge() {
        let img = GrayImage::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(img.get_bordered(-1, 0, Border::Reflect), 1.0);
        assert_eq!(img.get_bordered(-2, 0, Border::Reflect), 2.0);
        assert_eq!(img.get_bordered(3, 0, Border::Reflect), 3.0);
        assert_eq!(img.get_bordered(4, 0, Border::Reflect), 2.0);
        assert_eq!(img.get_bordered(-1, 0, Border::Replicate), 1.0);
        assert_eq!(img.get_bordered(5, 0, Border::Replicate), 3.0);
    }

    #[test]
    fn rotate_identity_angle() {
        let img = GrayImage::from_fn(11, 7, |x, y| ((x + 2 * y) % 5) as f64 / 5.0);
        let out = rotate_bilinear(&img, 0.0);
        for i in 0..img.data().len() {
            assert!((out.data()[i] - img.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn equalize_pushes_checkerboard_to_cdf_levels() {
        let img = GrayImage::from_fn(8, 8, |x, y| if (x + y) % 2 == 0 { 0.2 } else { 0.8 });
        let eq = equalize_histogram(&img, 256);
        for y in 0..8 {
            for x in 0..8 {
                let expected = if (x + y) % 2 == 0 { 0.5 } else { 1.0 };
                assert!((eq.get(x, y) - expected).abs() < 1e-12);
            }
        }
    }
}
