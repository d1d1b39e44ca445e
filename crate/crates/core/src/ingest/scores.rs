//! Import of externally computed comparison scores (e.g. published score
//! files or a neural network evaluated elsewhere).

use super::Manifest;
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ScoreImportError {
    #[error("cannot read score file: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: unknown sample id `{id}`")]
    UnknownSampleId { row: u64, id: String },
    #[error("row {row}: non-finite score")]
    NonFiniteScore { row: u64 },
    #[error("row {row}: probe and reference are the same sample `{id}`")]
    SelfComparison { row: u64, id: String },
    #[error("row {row}: {detail}")]
    UnparseableRow { row: u64, detail: String },
}

/// One imported comparison score; higher means more similar.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    pub probe_id: String,
    pub reference_id: String,
    pub score: f64,
    pub algorithm: String,
}

/// Import result; unordered duplicates are collapsed (first wins).
#[derive(Debug)]
pub struct ScoreImport {
    pub records: Vec<ScoreRecord>,
    pub duplicate_pairs_dropped: usize,
}

/// Read a score CSV (`probe_id,reference_id,score[,algorithm]`) and
/// validate every id against the manifest. Rows whose unordered id pair
/// was already seen are dropped with a warning.
pub fn import_external_scores(path: &Path, manifest: &Manifest) -> Result<ScoreImport, ScoreImportError> {
    let known: HashSet<&str> = manifest.entries.iter().map(|e| e.sample_id.as_str()).collect();

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| ScoreImportError::Io(std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string())))?;

    let headers = reader
        .headers()
        .map_err(|e| ScoreImportError::UnparseableRow { row: 1, detail: e.to_string() })?
        .clone();
    let col = |name: &'static str| headers.iter().position(|h| h == name);
    let probe_col = col("probe_id").ok_or(ScoreImportError::MissingColumn("probe_id"))?;
    let ref_col = col("reference_id").ok_or(ScoreImportError::MissingColumn("reference_id"))?;
    let score_col = col("score").ok_or(ScoreImportError::MissingColumn("score"))?;
    let algo_col = col("algorithm");

    let mut records = Vec::new();
    let mut seen_pairs: HashSet<(String, String)> = HashSet::new();
    let mut duplicate_pairs_dropped = 0usize;

    for record in reader.records() {
        let record = record.map_err(|e| ScoreImportError::UnparseableRow {
            row: e.position().map_or(0, |p| p.line()),
            detail: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line());

        let probe_id = record.get(probe_col).unwrap_or("").to_string();
        let reference_id = record.get(ref_col).unwrap_or("").to_string();
        for id in [&probe_id, &reference_id] {
            if !known.contains(id.as_str()) {
                return Err(ScoreImportError::UnknownSampleId { row, id: id.clone() });
            }
        }
        if probe_id == reference_id {
            return Err(ScoreImportError::SelfComparison { row, id: probe_id });
        }
        let score: f64 = record
            .get(score_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| ScoreImportError::UnparseableRow { row, detail: "invalid score".into() })?;
        if !score.is_finite() {
            return Err(ScoreImportError::NonFiniteScore { row });
        }
        let algorithm = algo_col
            .and_then(|c| record.get(c))
            .filter(|s| !s.is_empty())
            .unwrap_or("external")
            .to_string();

        let key = if probe_id <= reference_id {
            (probe_id.clone(), reference_id.clone())
        } else {
            (reference_id.clone(), probe_id.clone())
        };
        if !seen_pairs.insert(key) {
            log::warn!("dropping duplicate unordered pair ({probe_id}, {reference_id}) at row {row}");
            duplicate_pairs_dropped += 1;
            continue;
        }
        records.push(ScoreRecord { probe_id, reference_id, score, algorithm });
    }

    Ok(ScoreImport { records, duplicate_pairs_dropped })
}
