//! Binary feature container: 8-byte magic `VBFEAT01`, a type byte
//! (1 = binary pattern, 2 = texture, 3 = keypoints), a little-endian
//! dims/counts header, then the raw payload. Patterns are bit-packed
//! MSB-first per row (rows padded to byte boundaries); histograms and
//! descriptors are 32-bit little-endian reals.

use super::{
    BinaryVeinPattern, Feature, Keypoint, KeypointFeature, TextureFeature, DESCRIPTOR_LEN, LBP_BINS,
};
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"VBFEAT01";

#[derive(Error, Debug)]
pub enum FeatureIoError {
    #[error("feature io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic (not a feature file)")]
    BadMagic,
    #[error("unknown feature type byte {0}")]
    UnknownType(u8),
    #[error("payload truncated or inconsistent: {0}")]
    Corrupt(String),
}

pub fn write_feature(feature: &Feature, path: &Path) -> Result<(), FeatureIoError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    match feature {
        Feature::BinaryVeinPattern(p) => {
            buf.push(1);
            buf.extend_from_slice(&(p.width as u32).to_le_bytes());
            buf.extend_from_slice(&(p.height as u32).to_le_bytes());
            let stride = p.width.div_ceil(8);
            for y in 0..p.height {
                let mut row = vec![0u8; stride];
                for x in 0..p.width {
                    if p.get(x, y) {
                        row[x / 8] |= 0x80 >> (x % 8);
                    }
                }
                buf.extend_from_slice(&row);
            }
        }
        Feature::Texture(t) => {
            buf.push(2);
            buf.extend_from_slice(&(t.grid_x as u32).to_le_bytes());
            buf.extend_from_slice(&(t.grid_y as u32).to_le_bytes());
            buf.extend_from_slice(&(t.scales as u32).to_le_bytes());
            for &v in &t.histograms {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Feature::Keypoints(k) => {
            buf.push(3);
            buf.extend_from_slice(&(k.keypoints.len() as u32).to_le_bytes());
            for kp in &k.keypoints {
                for v in [kp.x, kp.y, kp.scale, kp.orientation] {
                    buf.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            for d in &k.descriptors {
                for v in d.iter() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_feature(path: &Path, sample_id: &str) -> Result<Feature, FeatureIoError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = Cursor { bytes: &bytes, pos: 0 };

    if cursor.take(8)? != MAGIC.as_slice() {
        return Err(FeatureIoError::BadMagic);
    }
    let type_byte = cursor.take(1)?[0];
    match type_byte {
        1 => {
            let width = cursor.u32()? as usize;
            let height = cursor.u32()? as usize;
            let stride = width.div_ceil(8);
            let mut bits = vec![false; width * height];
            for y in 0..height {
                let row = cursor.take(stride)?;
                for x in 0..width {
                    bits[y * width + x] = row[x / 8] & (0x80 >> (x % 8)) != 0;
                }
            }
            Ok(Feature::BinaryVeinPattern(BinaryVeinPattern {
                width,
                height,
                bits,
                source_sample_id: sample_id.to_string(),
            }))
        }
        2 => {
            let grid_x = cursor.u32()? as usize;
            let grid_y = cursor.u32()? as usize;
            let scales = cursor.u32()? as usize;
            let len = grid_x * grid_y * scales * LBP_BINS;
            let mut histograms = Vec::with_capacity(len);
            for _ in 0..len {
                histograms.push(cursor.f32()? as f64);
            }
            Ok(Feature::Texture(TextureFeature {
                grid_x,
                grid_y,
                scales,
                histograms,
                source_sample_id: sample_id.to_string(),
            }))
        }
        3 => {
            let count = cursor.u32()? as usize;
            let mut keypoints = Vec::with_capacity(count);
            for _ in 0..count {
                keypoints.push(Keypoint {
                    x: cursor.f32()? as f64,
                    y: cursor.f32()? as f64,
                    scale: cursor.f32()? as f64,
                    orientation: cursor.f32()? as f64,
                });
            }
            let mut descriptors = Vec::with_capacity(count);
            for _ in 0..count {
                let mut d = [0f32; DESCRIPTOR_LEN];
                for v in &mut d {
                    *v = cursor.f32()?;
                }
                descriptors.push(d);
            }
            Ok(Feature::Keypoints(KeypointFeature {
                keypoints,
                descriptors,
                source_sample_id: sample_id.to_string(),
            }))
        }
        other => Err(FeatureIoError::UnknownType(other)),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FeatureIoError> {
        if self.pos + n > self.bytes.len() {
            return Err(FeatureIoError::Corrupt(format!(
                "need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, FeatureIoError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32, FeatureIoError> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_roundtrip_preserves_bits() {
        let mut p = BinaryVeinPattern::new(13, 5); // width not a byte multiple
        for (i, bit) in p.bits.iter_mut().enumerate() {
            *bit = i % 3 == 0;
        }
        p.source_sample_id = "s".into();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.feat");
        write_feature(&Feature::BinaryVeinPattern(p.clone()), &path).unwrap();
        match read_feature(&path, "s").unwrap() {
            Feature::BinaryVeinPattern(q) => assert_eq!(q, p),
            other => panic!("wrong variant {other:?}"),
        }
    }

    #[test]
    fn texture_roundtrip_at_f32_precision() {
        let t = TextureFeature {
            grid_x: 2,
            grid_y: 1,
            scales: 1,
            histograms: (0..2 * LBP_BINS).map(|i| i as f64 / 118.0).collect(),
            source_sample_id: "s".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.feat");
        write_feature(&Feature::Texture(t.clone()), &path).unwrap();
        match read_feature(&path, "s").unwrap() {
            Feature::Texture(u) => {
                assert!(u.same_layout(&t));
                for (a, b) in u.histograms.iter().zip(&t.histograms) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
            other => panic!("wrong variant {other:?}"),
        }
    }

    #[test]
    fn keypoint_roundtrip() {
        let k = KeypointFeature {
            keypoints: vec![Keypoint { x: 10.5, y: 20.25, scale: 1.5, orientation: -0.75 }],
            descriptors: vec![[0.088388347f32; DESCRIPTOR_LEN]],
            source_sample_id: "s".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.feat");
        write_feature(&Feature::Keypoints(k.clone()), &path).unwrap();
        match read_feature(&path, "s").unwrap() {
            Feature::Keypoints(j) => {
                assert_eq!(j.len(), 1);
                assert_eq!(j.descriptors, k.descriptors);
                assert!((j.keypoints[0].x - 10.5).abs() < 1e-6);
            }
            other => panic!("wrong variant {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.feat");
        fs::write(&path, b"NOTAFEAT\x01").unwrap();
        assert!(matches!(read_feature(&path, "s"), Err(FeatureIoError::BadMagic)));
    }

    #[test]
    fn truncated_payload_rejected() {
        let p = BinaryVeinPattern::new(16, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.feat");
        write_feature(&Feature::BinaryVeinPattern(p), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_feature(&path, "s"), Err(FeatureIoError::Corrupt(_))));
    }
}
