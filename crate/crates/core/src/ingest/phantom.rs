//! Synthetic phantom datasets: finger-shaped bright bands with dark
//! curvilinear vein networks, rendered with per-sample displacement,
//! small rotation and sensor noise. Used for desk-scale validation where
//! the real datasets cannot be redistributed.

use super::manifest::{write_manifest, Finger, Hand, Manifest, SampleMetadata, Sex};
use crate::imgcore::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum PhantomError {
    #[error("failed to write phantom dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("all phantom counts must be at least 1")]
    BadConfig,
}

#[derive(Clone, Debug)]
pub struct PhantomConfig {
    pub subjects: usize,
    pub fingers_per_subject: usize,
    pub samples_per_finger: usize,
    pub vein_count: usize,
    pub noise_sigma: f64,
    pub max_displacement_px: f64,
    pub image_width: usize,
    pub image_height: usize,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            subjects: 4,
            fingers_per_subject: 1,
            samples_per_finger: 2,
            vein_count: 6,
            noise_sigma: 0.01,
            max_displacement_px: 4.0,
            image_width: 256,
            image_height: 128,
        }
    }
}

/// A single vein: a Catmull-Rom spline through evenly spaced knots with a
/// Gaussian valley cross-section.
#[derive(Clone, Debug)]
pub struct VeinTrace {
    knot_spacing: f64,
    first_knot_x: f64,
    knot_ys: Vec<f64>,
    pub half_width: f64,
    pub depth: f64,
}

impl VeinTrace {
    /// Centerline height at canonical coordinate `x`.
    pub fn center_y(&self, x: f64) -> f64 {
        let t = (x - self.first_knot_x) / self.knot_spacing;
        let seg = t.floor();
        let n = self.knot_ys.len() as isize;
        let i = (seg as isize).clamp(1, n - 3);
        let u = (t - i as f64).clamp(-1.0, 2.0);
        let p0 = self.knot_ys[(i - 1) as usize];
        let p1 = self.knot_ys[i as usize];
        let p2 = self.knot_ys[(i + 1) as usize];
        let p3 = self.knot_ys[(i + 2) as usize];
        catmull_rom(p0, p1, p2, p3, u)
    }

    fn valley(&self, x: f64, y: f64) -> f64 {
        let d = y - self.center_y(x);
        self.depth * (-d * d / (2.0 * self.half_width * self.half_width)).exp()
    }
}

#[inline]
fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    0.5 * ((2.0 * p1)
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
}

/// Canonical (untransformed) scene of one biometric instance.
#[derive(Clone, Debug)]
pub struct PhantomScene {
    pub width: usize,
    pub height: usize,
    band_center: f64,
    band_half: f64,
    band_bow: f64,
    background: f64,
    band_level: f64,
    veins: Vec<VeinTrace>,
}

impl PhantomScene {
    /// Draw a random instance: band geometry plus `vein_count` veins.
    pub fn random(width: usize, height: usize, vein_count: usize, rng: &mut impl Rng) -> Self {
        let h = height as f64;
        let band_center = h / 2.0 + rng.gen_range(-h / 16.0..h / 16.0);
        let band_half = h * rng.gen_range(0.26..0.32);
        let band_bow = rng.gen_range(-1.0..1.0) * 0.03 * h;
        let mut veins = Vec::with_capacity(vein_count);
        let knot_spacing = width as f64 / 6.0;
        let first_knot_x = -2.0 * knot_spacing;
        let knots = 11; // covers [-2w/6, +8w/6]
        for _ in 0..vein_count {
            let lo = band_center - band_half * 0.7;
            let hi = band_center + band_half * 0.7;
            let mut ys = Vec::with_capacity(knots);
            let mut y = rng.gen_range(lo..hi);
            for _ in 0..knots {
                ys.push(y);
                y = (y + rng.gen_range(-0.12 * h..0.12 * h)).clamp(lo, hi);
            }
            veins.push(VeinTrace {
                knot_spacing,
                first_knot_x,
                knot_ys: ys,
                half_width: rng.gen_range(1.2..3.0),
                depth: rng.gen_range(0.15..0.30),
            });
        }
        Self {
            width,
            height,
            band_center,
            band_half,
            band_bow,
            background: 0.06,
            band_level: 0.55,
            veins,
        }
    }

    pub fn veins(&self) -> &[VeinTrace] {
        &self.veins
    }

    pub fn band_bounds(&self, x: f64) -> (f64, f64) {
        let cx = self.width as f64 / 2.0;
        let offset = self.band_bow * ((x - cx) / cx).powi(2);
        (self.band_center - self.band_half + offset, self.band_center + self.band_half - offset)
    }

    /// Noise-free scene intensity at canonical coordinates.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let (upper, lower) = self.band_bounds(x);
        if y < upper || y > lower {
            return self.background;
        }
        let mid = (upper + lower) / 2.0;
        let half = (lower - upper) / 2.0;
        let shade = 0.10 * (1.0 - ((y - mid) / half).powi(2));
        let mut v = self.band_level + shade;
        for vein in &self.veins {
            v -= vein.valley(x, y);
        }
        v.clamp(0.0, 1.0)
    }

    /// Render one sample: scene translated by `(tx, ty)`, rotated by
    /// `rot_deg` about the canvas center, plus additive Gaussian noise.
    pub fn render(&self, tx: f64, ty: f64, rot_deg: f64, noise_sigma: f64, rng: &mut impl Rng) -> GrayImage {
        let cx = (self.width as f64 - 1.0) / 2.0;
        let cy = (self.height as f64 - 1.0) / 2.0;
        let (sin, cos) = (-rot_deg.to_radians()).sin_cos();
        let noise = Normal::new(0.0, noise_sigma.max(1e-12)).expect("valid sigma");
        let mut img = GrayImage::zeros(self.width, self.height);
        for py in 0..self.height {
            for px in 0..self.width {
                let dx = px as f64 - cx;
                let dy = py as f64 - cy;
                let sx = cx + cos * dx - sin * dy - tx;
                let sy = cy + sin * dx + cos * dy - ty;
                let mut v = self.value(sx, sy);
                if noise_sigma > 0.0 {
                    v += noise.sample(rng);
                }
                img.set(px, py, quantize(v));
            }
        }
        img
    }
}

#[inline]
fn quantize(v: f64) -> f64 {
    let byte = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    byte as f64 / 255.0
}

fn write_pgm(img: &GrayImage, path: &Path) -> std::io::Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend(img.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    fs::write(path, bytes)
}

fn stream_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, mixed with the dataset seed.
    let mut h = 0xcbf29ce484222325u64 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Generate a phantom dataset under `out_dir` (`images/*.pgm` plus
/// `manifest.csv`). Deterministic for a fixed `(config, seed)`.
pub fn generate_phantom_dataset(
    config: &PhantomConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<Manifest, PhantomError> {
    if config.subjects == 0
        || config.fingers_per_subject == 0
        || config.samples_per_finger == 0
        || config.vein_count == 0
        || config.image_width < 48
        || config.image_height < 48
    {
        return Err(PhantomError::BadConfig);
    }
    let image_dir = out_dir.join("images");
    fs::create_dir_all(&image_dir)?;

    let ages = [25u32, 40, 55, 70];
    let fingers = [Finger::Index, Finger::Middle, Finger::Ring];
    let mut entries = Vec::new();

    for subject in 0..config.subjects {
        let subject_id = format!("subj{subject:03}");
        let sex = if subject % 2 == 0 { Sex::Male } else { Sex::Female };
        let age = ages[subject % ages.len()];
        for finger_ord in 0..config.fingers_per_subject {
            let instance_ord = subject * config.fingers_per_subject + finger_ord;
            let hand = if instance_ord % 2 == 0 { Hand::Left } else { Hand::Right };
            let finger = fingers[instance_ord % fingers.len()];

            let scene_tag = format!("scene/{subject_id}/{finger_ord}");
            let mut scene_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &scene_tag));
            let scene = PhantomScene::random(
                config.image_width,
                config.image_height,
                config.vein_count,
                &mut scene_rng,
            );

            for sample in 1..=config.samples_per_finger {
                let sample_id = format!("{subject_id}_f{finger_ord:02}_s{sample:02}");
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &sample_id));
                let d = config.max_displacement_px;
                let (tx, ty, rot) = if sample == 1 {
                    (0.0, 0.0, 0.0) // reference sample stays canonical
                } else {
                    (rng.gen_range(-d..=d), rng.gen_range(-d..=d), rng.gen_range(-2.0..=2.0))
                };
                let img = scene.render(tx, ty, rot, config.noise_sigma, &mut rng);
                let file = format!("images/{sample_id}.pgm");
                write_pgm(&img, &out_dir.join(&file))?;
                entries.push(SampleMetadata {
                    sample_id,
                    subject_id: subject_id.clone(),
                    sex,
                    age: Some(age),
                    hand,
                    finger,
                    sample_index: sample as u32,
                    image_path: file,
                });
            }
        }
    }

    let manifest = Manifest { dataset_name: "phantom".into(), entries };
    write_manifest(&manifest, &out_dir.join("manifest.csv"))
        .map_err(|e| PhantomError::Io(std::io::Error::new(std::io::ErrorKind::Other, e.to_string())))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                    files.push((rel, fs::read(&p).unwrap()));
                }
            }
        }
        files.sort();
        files
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let config = PhantomConfig {
            subjects: 2,
            fingers_per_subject: 1,
            samples_per_finger: 2,
            vein_count: 5,
            noise_sigma: 0.01,
            max_displacement_px: 4.0,
            ..Default::default()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        generate_phantom_dataset(&config, 7, d1.path()).unwrap();
        generate_phantom_dataset(&config, 7, d2.path()).unwrap();
        assert_eq!(tree_bytes(d1.path()), tree_bytes(d2.path()));
    }

    #[test]
    fn different_seed_changes_images() {
        let config = PhantomConfig { subjects: 1, ..Default::default() };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        generate_phantom_dataset(&config, 1, d1.path()).unwrap();
        generate_phantom_dataset(&config, 2, d2.path()).unwrap();
        let a = tree_bytes(d1.path());
        let b = tree_bytes(d2.path());
        assert!(a.iter().zip(&b).any(|((na, ca), (nb, cb))| na == nb && ca != cb));
    }

    #[test]
    fn manifest_counts_follow_config() {
        let config = PhantomConfig {
            subjects: 20,
            fingers_per_subject: 2,
            samples_per_finger: 4,
            vein_count: 5,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let m = generate_phantom_dataset(&config, 3, dir.path()).unwrap();
        assert_eq!(m.entries.len(), 160);
        assert_eq!(m.instance_count(), 40);
        // round-robin populates every metadata group
        use std::collections::HashSet;
        let sexes: HashSet<_> = m.entries.iter().map(|e| e.sex).collect();
        let hands: HashSet<_> = m.entries.iter().map(|e| e.hand).collect();
        let fingers: HashSet<_> = m.entries.iter().map(|e| e.finger).collect();
        let ages: HashSet<_> = m.entries.iter().map(|e| e.age).collect();
        assert_eq!(sexes.len(), 2);
        assert_eq!(hands.len(), 2);
        assert_eq!(fingers.len(), 3);
        assert_eq!(ages.len(), 4);
    }

    #[test]
    fn scene_value_background_outside_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scene = PhantomScene::random(128, 64, 3, &mut rng);
        assert!((scene.value(64.0, 0.5) - 0.06).abs() < 1e-12);
        let (upper, lower) = scene.band_bounds(64.0);
        let mid = (upper + lower) / 2.0;
        assert!(scene.value(64.0, mid) > 0.2);
    }
}
