//! Dataset ingestion: metadata manifests, grayscale sample loading,
//! externally computed comparison scores, and synthetic phantom datasets
//! for desk-scale validation.

mod manifest;
mod phantom;
mod scores;

pub use manifest::{
    load_manifest, write_manifest, Finger, Hand, Manifest, ManifestError, SampleMetadata, Sex,
};
pub use phantom::{generate_phantom_dataset, PhantomConfig, PhantomScene, VeinTrace};
pub use scores::{import_external_scores, ScoreImport, ScoreRecord};

use crate::imgcore::GrayImage;
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum SampleError {
    #[error("image file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported image format for {path}: {detail}")]
    UnsupportedFormat { path: String, detail: String },
}

/// Load a sample image as intensities/255. Only 8-bit grayscale rasters
/// (PNG or binary PGM) are accepted.
pub fn load_sample(entry: &SampleMetadata, root: &Path) -> Result<GrayImage, SampleError> {
    let path = root.join(&entry.image_path);
    if !path.is_file() {
        return Err(SampleError::FileNotFound(path.display().to_string()));
    }
    let dynamic = image::open(&path).map_err(|e| SampleError::UnsupportedFormat {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let gray = match dynamic {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(SampleError::UnsupportedFormat {
                path: path.display().to_string(),
                detail: format!("expected 8-bit grayscale, got {:?}", other.color()),
            })
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data = gray.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    Ok(GrayImage::new(w, h, data).expect("decoded image is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn entry(path: &str) -> SampleMetadata {
        SampleMetadata {
            sample_id: "s1".into(),
            subject_id: "a".into(),
            sex: Sex::Unknown,
            age: None,
            hand: Hand::Unknown,
            finger: Finger::Unknown,
            sample_index: 1,
            image_path: path.into(),
        }
    }

    #[test]
    fn pgm_values_divide_by_255() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        fs::write(&path, b"P5\n2 2\n255\n\x00\xff\x80\x40").unwrap();
        let img = load_sample(&entry("t.pgm"), dir.path()).unwrap();
        let expected = [0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0];
        for (got, want) in img.data().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_file_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_sample(&entry("nope.png"), dir.path()),
            Err(SampleError::FileNotFound(_))
        ));
    }

    #[test]
    fn sixteen_bit_png_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let img = image::ImageBuffer::<image::Luma<u16>, _>::from_pixel(2, 2, image::Luma([1000u16]));
        img.save(&path).unwrap();
        assert!(matches!(
            load_sample(&entry("deep.png"), dir.path()),
            Err(SampleError::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn rgb_png_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        let img = image::RgbImage::from_pixel(2, 2, image::Rgb([1, 2, 3]));
        img.save(&path).unwrap();
        assert!(matches!(
            load_sample(&entry("rgb.png"), dir.path()),
            Err(SampleError::UnsupportedFormat { .. })
        ));
    }
}
