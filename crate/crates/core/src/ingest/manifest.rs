//! Manifest CSV model. One manifest abstracts a dataset layout: each row
//! ties a sample id to its subject metadata and a relative image path.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ManifestError {
    #[error("cannot read manifest: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("duplicate sample_id `{0}`")]
    DuplicateSampleId(String),
    #[error("duplicate sample_index {index} for instance ({subject}, {hand}, {finger})")]
    DuplicateInstanceSample { subject: String, hand: Hand, finger: Finger, index: u32 },
    #[error("row {row}: {detail}")]
    UnparseableRow { row: u64, detail: String },
    #[error("manifest has no data rows")]
    Empty,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hand {
    Left,
    Right,
    Unknown,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Finger {
    Index,
    Middle,
    Ring,
    Unknown,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Male => "Male",
            Sex::Female => "Female",
            Sex::Unknown => "Unknown",
        })
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hand::Left => "Left",
            Hand::Right => "Right",
            Hand::Unknown => "Unknown",
        })
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Finger::Index => "Index",
            Finger::Middle => "Middle",
            Finger::Ring => "Ring",
            Finger::Unknown => "Unknown",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub sample_id: String,
    pub subject_id: String,
    pub sex: Sex,
    /// Age in whole years; `None` when unknown.
    pub age: Option<u32>,
    pub hand: Hand,
    pub finger: Finger,
    /// 1-based index of the sample within its biometric instance.
    pub sample_index: u32,
    pub image_path: String,
}

impl SampleMetadata {
    /// The biometric instance this sample belongs to.
    pub fn instance_key(&self) -> (&str, Hand, Finger) {
        (&self.subject_id, self.hand, self.finger)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub dataset_name: String,
    pub entries: Vec<SampleMetadata>,
}

impl Manifest {
    pub fn find(&self, sample_id: &str) -> Option<&SampleMetadata> {
        self.entries.iter().find(|e| e.sample_id == sample_id)
    }

    /// Number of distinct biometric instances.
    pub fn instance_count(&self) -> usize {
        let set: HashSet<_> = self.entries.iter().map(|e| e.instance_key()).collect();
        set.len()
    }
}

const COLUMNS: [&str; 8] =
    ["sample_id", "subject_id", "sex", "age", "hand", "finger", "sample_index", "image_path"];

/// Load and validate a manifest CSV. The dataset name is the file stem.
pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                ManifestError::Io(std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()))
            }
            _ => ManifestError::UnparseableRow { row: 0, detail: e.to_string() },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| ManifestError::UnparseableRow { row: 1, detail: e.to_string() })?
        .clone();
    let mut col_idx = [0usize; 8];
    for (i, name) in COLUMNS.iter().enumerate() {
        col_idx[i] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or(ManifestError::MissingColumn(name))?;
    }

    let mut entries = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut seen_instance_samples = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| ManifestError::UnparseableRow {
            row: e.position().map_or(0, |p| p.line()),
            detail: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(col_idx[i]).unwrap_or("").to_string();
        let bad = |detail: String| ManifestError::UnparseableRow { row, detail };

        let sample_id = field(0);
        if sample_id.is_empty() {
            return Err(bad("empty sample_id".into()));
        }
        let sex = match field(2).as_str() {
            "M" => Sex::Male,
            "F" => Sex::Female,
            "NA" => Sex::Unknown,
            other => return Err(bad(format!("invalid sex `{other}` (expected M, F or NA)"))),
        };
        let age_raw = field(3);
        let age = if age_raw == "NA" {
            None
        } else {
            Some(age_raw.parse::<u32>().map_err(|_| bad(format!("invalid age `{age_raw}`")))?)
        };
        let hand = match field(4).as_str() {
            "L" => Hand::Left,
            "R" => Hand::Right,
            "NA" => Hand::Unknown,
            other => return Err(bad(format!("invalid hand `{other}` (expected L, R or NA)"))),
        };
        let finger = match field(5).as_str() {
            "index" => Finger::Index,
            "middle" => Finger::Middle,
            "ring" => Finger::Ring,
            "NA" => Finger::Unknown,
            other => return Err(bad(format!("invalid finger `{other}`"))),
        };
        let sample_index: u32 = field(6)
            .parse()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| bad(format!("invalid sample_index `{}`", field(6))))?;

        if !seen_ids.insert(sample_id.clone()) {
            return Err(ManifestError::DuplicateSampleId(sample_id));
        }
        let entry = SampleMetadata {
            sample_id,
            subject_id: field(1),
            sex,
            age,
            hand,
            finger,
            sample_index,
            image_path: field(7),
        };
        let instance_sample =
            (entry.subject_id.clone(), entry.hand, entry.finger, entry.sample_index);
        if !seen_instance_samples.insert(instance_sample) {
            return Err(ManifestError::DuplicateInstanceSample {
                subject: entry.subject_id.clone(),
                hand: entry.hand,
                finger: entry.finger,
                index: entry.sample_index,
            });
        }
        entries.push(entry);
    }

    if entries.is_empty() {
        return Err(ManifestError::Empty);
    }
    let dataset_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(Manifest { dataset_name, entries })
}

/// Write a manifest in the same CSV schema `load_manifest` accepts.
pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), ManifestError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| {
        ManifestError::Io(std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
    })?;
    writer
        .write_record(COLUMNS)
        .map_err(|e| ManifestError::UnparseableRow { row: 1, detail: e.to_string() })?;
    for e in &manifest.entries {
        let sex = match e.sex {
            Sex::Male => "M",
            Sex::Female => "F",
            Sex::Unknown => "NA",
        };
        let age = e.age.map_or("NA".to_string(), |a| a.to_string());
        let hand = match e.hand {
            Hand::Left => "L",
            Hand::Right => "R",
            Hand::Unknown => "NA",
        };
        let finger = match e.finger {
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Unknown => "NA",
        };
        writer
            .write_record([
                e.sample_id.as_str(),
                e.subject_id.as_str(),
                sex,
                &age,
                hand,
                finger,
                &e.sample_index.to_string(),
                e.image_path.as_str(),
            ])
            .map_err(|err| ManifestError::UnparseableRow { row: 0, detail: err.to_string() })?;
    }
    writer
        .flush()
        .map_err(|e| ManifestError::Io(std::io::Error::new(std::io::ErrorKind::Other, e)))?;
    Ok(())
}
