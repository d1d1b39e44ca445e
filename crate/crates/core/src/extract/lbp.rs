//! Texture features: Log-Gabor convolution magnitudes summarized by
//! block-wise uniform LBP(8,1) histograms.

use super::{ExtractError, TextureFeature, LBP_BINS};
use crate::imgcore::fft;
use crate::imgcore::GrayImage;
use crate::roi::RoiImage;
use std::sync::OnceLock;

/// Log-Gabor radial bandwidth parameter (sigma / f0).
const SIGMA_RATIO: f64 = 0.65;
const MIN_WAVELENGTH: f64 = 4.0;
const WAVELENGTH_SCALING: f64 = 2.0;

/// 8-neighbor offsets, clockwise from the top-left; bit i set when the
/// neighbor is >= the center (ties count as 1).
const NEIGHBORS: [(isize, isize); 8] =
    [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

/// Map a raw 8-bit code to one of 58 uniform bins (ordered by code value)
/// or the shared catch-all bin 58.
fn uniform_bin_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [58u8; 256];
        let mut next = 0u8;
        for code in 0..256usize {
            let mut transitions = 0;
            for bit in 0..8 {
                let a = (code >> bit) & 1;
                let b = (code >> ((bit + 1) % 8)) & 1;
                if a != b {
                    transitions += 1;
                }
            }
            if transitions <= 2 {
                table[code] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next, 58);
        table
    })
}

/// Isotropic Log-Gabor magnitude response for one scale. Magnitudes below
/// the FFT noise floor are snapped to zero so that flat inputs stay flat.
fn log_gabor_magnitude(img: &GrayImage, scale: usize) -> GrayImage {
    let wavelength = MIN_WAVELENGTH * WAVELENGTH_SCALING.powi(scale as i32);
    let f0 = 1.0 / wavelength;
    let log_sigma = SIGMA_RATIO.ln();
    let denom = 2.0 * log_sigma * log_sigma;
    let mut out = fft::apply_radial_transfer(
        img,
        |f| {
            if f <= 0.0 {
                0.0
            } else {
                let r = (f / f0).ln();
                (-r * r / denom).exp()
            }
        },
        fft::Output::Magnitude,
    );
    for v in out.data_mut() {
        if *v < 1e-9 {
            *v = 0.0;
        }
    }
    out
}

/// Uniform LBP(8,1) bin for each interior pixel; borders yield `None`.
fn lbp_bins(img: &GrayImage) -> Vec<Option<u8>> {
    let (w, h) = (img.width(), img.height());
    let table = uniform_bin_table();
    let mut bins = vec![None; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let center = img.get(x, y);
            let mut code = 0usize;
            for (bit, (dx, dy)) in NEIGHBORS.iter().enumerate() {
                let n = img.get((x as isize + dx) as usize, (y as isize + dy) as usize);
                if n >= center {
                    code |= 1 << bit;
                }
            }
            bins[y * w + x] = Some(table[code]);
        }
    }
    bins
}

/// Extract the Log-Gabor + LBP texture feature: `scales` magnitude images,
/// per-block L1-normalized uniform-LBP histograms concatenated scale-major.
pub fn extract_lbp(
    roi: &RoiImage,
    scales: usize,
    block_grid: (usize, usize),
) -> Result<TextureFeature, ExtractError> {
    let (gx, gy) = block_grid;
    assert!(scales >= 1 && gx >= 1 && gy >= 1);
    let (w, h) = (roi.width(), roi.height());

    let xs: Vec<usize> = (0..=gx).map(|i| i * w / gx).collect();
    let ys: Vec<usize> = (0..=gy).map(|i| i * h / gy).collect();
    let min_bw = (0..gx).map(|i| xs[i + 1] - xs[i]).min().unwrap();
    let min_bh = (0..gy).map(|i| ys[i + 1] - ys[i]).min().unwrap();
    if min_bw < 3 || min_bh < 3 {
        return Err(ExtractError::InvalidBlockGrid { gx, gy });
    }

    // column/row -> block index lookups
    let col_block: Vec<usize> = (0..w).map(|x| block_of(x, &xs)).collect();
    let row_block: Vec<usize> = (0..h).map(|y| block_of(y, &ys)).collect();

    let mut histograms = vec![0f64; scales * gx * gy * LBP_BINS];
    for scale in 0..scales {
        let magnitude = log_gabor_magnitude(&roi.image, scale);
        let bins = lbp_bins(&magnitude);
        for y in 0..h {
            for x in 0..w {
                if let Some(bin) = bins[y * w + x] {
                    let block = row_block[y] * gx + col_block[x];
                    histograms[(scale * gx * gy + block) * LBP_BINS + bin as usize] += 1.0;
                }
            }
        }
    }

    // L1-normalize each block histogram
    for chunk in histograms.chunks_exact_mut(LBP_BINS) {
        let total: f64 = chunk.iter().sum();
        if total > 0.0 {
            for v in chunk.iter_mut() {
                *v /= total;
            }
        }
    }

    Ok(TextureFeature {
        grid_x: gx,
        grid_y: gy,
        scales,
        histograms,
        source_sample_id: roi.source_sample_id.clone(),
    })
}

fn block_of(coord: usize, bounds: &[usize]) -> usize {
    // bounds has grid+1 entries; the last block is right-closed
    for i in 0..bounds.len() - 1 {
        if coord < bounds[i + 1] {
            return i;
        }
    }
    bounds.len() - 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PhantomScene;
    use rand::SeedableRng;

    #[test]
    fn uniform_table_has_58_uniform_codes() {
        let table = uniform_bin_table();
        let uniform_count = table.iter().filter(|&&b| b != 58).count();
        assert_eq!(uniform_count, 58);
        assert_eq!(table[0], 0); // all-zeros is the first uniform code
        assert_eq!(table[255], 57); // all-ones is the last uniform code
        assert_eq!(table[0b01010101], 58); // alternating bits are non-uniform
    }

    #[test]
    fn constant_image_is_one_hot_on_all_ones_code() {
        let roi = RoiImage::full(GrayImage::filled(64, 32, 0.5));
        // the DC-free bank maps a constant image to an exactly-zero
        // magnitude plane, so every neighborhood ties and the >= rule
        // emits the all-ones code; check the LBP layer directly as well
        let bins = lbp_bins(&roi.image);
        for b in bins.iter().flatten() {
            assert_eq!(*b, 57);
        }
        let feature = extract_lbp(&roi, 2, (4, 2)).unwrap();
        for block in feature.histograms.chunks_exact(LBP_BINS) {
            assert!((block[57] - 1.0).abs() < 1e-9, "expected one-hot at bin 57");
            assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn feature_length_matches_layout() {
        let roi = RoiImage::full(GrayImage::filled(64, 32, 0.5));
        let feature = extract_lbp(&roi, 3, (4, 2)).unwrap();
        assert_eq!(feature.histograms.len(), 1416);
        assert_eq!(feature.histograms.len(), feature.expected_len());
    }

    #[test]
    fn histograms_are_normalized_distributions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let scene = PhantomScene::random(96, 48, 4, &mut rng);
        let img = scene.render(0.0, 0.0, 0.0, 0.01, &mut rng);
        let feature = extract_lbp(&RoiImage::full(img), 3, (4, 2)).unwrap();
        for block in feature.histograms.chunks_exact(LBP_BINS) {
            assert!((block.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert!(block.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn tiny_blocks_rejected() {
        let roi = RoiImage::full(GrayImage::filled(16, 16, 0.5));
        assert!(matches!(
            extract_lbp(&roi, 1, (8, 8)),
            Err(ExtractError::InvalidBlockGrid { .. })
        ));
    }

    #[test]
    fn monotone_shift_keeps_codes_on_unclipped_pixels() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let scene = PhantomScene::random(96, 48, 4, &mut rng);
        let img = scene.render(0.0, 0.0, 0.0, 0.005, &mut rng);
        let shifted = GrayImage::from_fn(96, 48, |x, y| (img.get(x, y) + 0.1).min(1.0));
        // LBP codes on the raw rasters agree wherever no neighborhood clipped
        let a = lbp_bins(&img);
        let b = lbp_bins(&shifted);
        for y in 1..47usize {
            for x in 1..95usize {
                let clipped = NEIGHBORS
                    .iter()
                    .chain([(0isize, 0isize)].iter())
                    .any(|&(dx, dy)| img.get((x as isize + dx) as usize, (y as isize + dy) as usize) > 0.9);
                if !clipped {
                    assert_eq!(a[y * 96 + x], b[y * 96 + x], "code changed at ({x},{y})");
                }
            }
        }
        // and the full feature stays close in L1
        let fa = extract_lbp(&RoiImage::full(img), 2, (4, 2)).unwrap();
        let fb = extract_lbp(&RoiImage::full(shifted), 2, (4, 2)).unwrap();
        let blocks = (fa.histograms.len() / LBP_BINS) as f64;
        let l1: f64 = fa
            .histograms
            .iter()
            .zip(&fb.histograms)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / blocks;
        assert!(l1 < 0.05, "mean per-block L1 distance {l1:.4}");
    }
}
