//! Power-of-two 2D FFT plumbing on top of `rustfft`, with reflect padding.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Border, GrayImage};

/// What to keep of the complex inverse transform.
#[derive(Copy, Clone, Debug)]
pub enum Output {
    Real,
    Magnitude,
}

/// Apply `transfer(radial_frequency)` in the frequency domain, where the
/// radial frequency is in cycles/pixel on the padded grid (Nyquist = 0.5).
pub fn apply_radial_transfer(
    img: &GrayImage,
    transfer: impl Fn(f64) -> f64,
    output: Output,
) -> GrayImage {
    apply_transfer(img, |fx, fy| transfer((fx * fx + fy * fy).sqrt()), output)
}

/// General transfer application on centered normalized frequencies
/// `(fx, fy)` in `[-0.5, 0.5)`.
pub fn apply_transfer(
    img: &GrayImage,
    transfer: impl Fn(f64, f64) -> f64,
    output: Output,
) -> GrayImage {
    let w = img.width();
    let h = img.height();
    let pw = w.next_power_of_two();
    let ph = h.next_power_of_two();

    let mut field = vec![Complex::new(0.0f64, 0.0); pw * ph];
    for y in 0..ph {
        for x in 0..pw {
            let v = img.get_bordered(x as isize, y as isize, Border::Reflect);
            field[y * pw + x] = Complex::new(v, 0.0);
        }
    }

    let mut planner = FftPlanner::new();
    fft2d(&mut field, pw, ph, &mut planner, false);

    for v in 0..ph {
        let fy = centered_freq(v, ph);
        for u in 0..pw {
            let fx = centered_freq(u, pw);
            field[v * pw + u] *= transfer(fx, fy);
        }
    }

    fft2d(&mut field, pw, ph, &mut planner, true);
    let norm = 1.0 / (pw * ph) as f64;

    GrayImage::from_fn(w, h, |x, y| {
        let c = field[y * pw + x] * norm;
        match output {
            Output::Real => c.re,
            Output::Magnitude => c.norm(),
        }
    })
}

#[inline]
fn centered_freq(u: usize, n: usize) -> f64 {
    let u = u as isize;
    let n = n as isize;
    let shifted = if u <= n / 2 - 1 || n == 1 { u } else { u - n };
    shifted as f64 / n as f64
}

fn fft2d(field: &mut [Complex<f64>], w: usize, h: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let row_fft = if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
    for row in field.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = field[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            field[y * w + x] = col[y];
        }
    }
}

/// O(n^4) forward+inverse DFT, used as an independent oracle in tests.
#[doc(hidden)]
pub fn dft2d_roundtrip_naive(img: &GrayImage) -> GrayImage {
    use std::f64::consts::PI;
    let w = img.width();
    let h = img.height();
    let mut freq = vec![Complex::new(0.0f64, 0.0); w * h];
    for v in 0..h {
        for u in 0..w {
            let mut acc = Complex::new(0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0 * PI * (u as f64 * x as f64 / w as f64 + v as f64 * y as f64 / h as f64);
                    acc += Complex::from_polar(img.get(x, y), phase);
                }
            }
            freq[v * w + u] = acc;
        }
    }
    GrayImage::from_fn(w, h, |x, y| {
        let mut acc = Complex::new(0.0, 0.0);
        for v in 0..h {
            for u in 0..w {
                let phase = 2.0 * PI * (u as f64 * x as f64 / w as f64 + v as f64 * y as f64 / h as f64);
                acc += freq[v * w + u] * Complex::from_polar(1.0, phase);
            }
        }
        acc.re / (w * h) as f64
    })
}
