//! File formats: aggregated dataset CSV and the versioned JSON model file.
//!
//! Dataset CSV: header `id,label,<feature names...>`; `label` is `0`, `1` or
//! empty for unlabelled instances.
//!
//! Model file: a single JSON document
//! `{"format": "lcmicp-model", "version": 1, "feature_names": [...],
//!   "normalization": {...} | null, "forest_params": {...}, "model": {...}}`.
//! Floats are written in shortest round-trip form, so thresholds and scores
//! reload bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conformal::RfLcmicp;
use crate::data::{BinaryLabel, Dataset, Instance, NormalizationParams};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "lcmicp-model";
pub const MODEL_VERSION: u32 = 1;

pub fn write_dataset<T: Scalar, W: Write>(data: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend(data.feature_names().iter().cloned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for inst in data.instances() {
        row.clear();
        row.push(inst.id.clone());
        row.push(inst.label.map(|l| l.code().to_string()).unwrap_or_default());
        row.extend(inst.features.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset<T: Scalar>(data: &Dataset<T>, path: &Path) -> Result<()> {
    write_dataset(data, BufWriter::new(File::create(path)?))
}

pub fn read_dataset<T: Scalar, R: Read>(reader: R) -> Result<Dataset<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = r.headers()?.clone();
    if header.get(0) != Some("id") || header.get(1) != Some("label") {
        return Err(Error::Schema(
            "dataset header must start with id,label".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut instances = Vec::new();
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| Error::Malformed { line, message };
        let label = match &record[1] {
            "" => None,
            "0" => Some(BinaryLabel::Benign),
            "1" => Some(BinaryLabel::Malicious),
            other => {
                return Err(malformed(format!(
                    "label must be 0, 1 or empty, found {other:?}"
                )))
            }
        };
        let features = record
            .iter()
            .skip(2)
            .map(|f| {
                f.parse::<T>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| malformed(format!("invalid number {f:?}")))
            })
            .collect::<Result<Vec<T>>>()?;
        instances.push(Instance::new(&record[0], features, label));
    }
    Dataset::new(names, instances)
}

pub fn load_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// Everything `predict` needs: scaling, forest and calibration scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelFile<T> {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub normalization: Option<NormalizationParams<T>>,
    pub forest_params: ForestParams,
    pub model: RfLcmicp<T>,
}

impl<T: Scalar> ModelFile<T> {
    pub fn new(
        feature_names: Vec<String>,
        normalization: Option<NormalizationParams<T>>,
        forest_params: ForestParams,
        model: RfLcmicp<T>,
    ) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_names,
            normalization,
            forest_params,
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unexpected format tag {:?}",
                self.format
            )));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {}",
                self.version
            )));
        }
        self.model.forest.validate()?;
        let d = self.model.dimension();
        if self.feature_names.len() != d {
            return Err(Error::ModelFormat(
                "feature names disagree with forest dimension".into(),
            ));
        }
        if let Some(n) = &self.normalization {
            if n.dimension() != d || n.max.len() != d {
                return Err(Error::ModelFormat(
                    "normalization disagrees with forest dimension".into(),
                ));
            }
        }
        for label in BinaryLabel::ALL {
            let scores = self.model.calibration.class(label);
            if scores.is_empty() || !scores.is_sorted() {
                return Err(Error::ModelFormat(format!(
                    "calibration scores for {label} empty or unsorted"
                )));
            }
        }
        Ok(())
    }

    /// Applies the stored scaling (if any) to raw features.
    pub fn prepare(&self, features: &[T]) -> Result<Vec<T>> {
        match &self.normalization {
            Some(n) => n.apply_features(features),
            None => {
                if features.len() != self.model.dimension() {
                    return Err(Error::DimensionMismatch {
                        expected: self.model.dimension(),
                        found: features.len(),
                    });
                }
                Ok(features.to_vec())
            }
        }
    }
}

pub fn write_model<T: Scalar, W: Write>(model: &ModelFile<T>, writer: W) -> Result<()> {
    serde_json::to_writer(writer, model)?;
    Ok(())
}

pub fn save_model<T: Scalar>(model: &ModelFile<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_model<T: Scalar, R: Read>(reader: R) -> Result<ModelFile<T>> {
    let model: ModelFile<T> = serde_json::from_reader(reader)?;
    model.validate()?;
    Ok(model)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<ModelFile<T>> {
    read_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_csv_round_trip() {
        let data = Dataset::new(
            vec!["x".into(), "y".into()],
            vec![
                Instance::new("a", vec![0.1, 1.0 / 3.0], Some(BinaryLabel::Malicious)),
                Instance::new("b", vec![2.5e-17, 7.0], None),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let back: Dataset<f64> = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn dataset_csv_errors() {
        let bad = "id,label,x\na,7,0.1\n";
        assert!(matches!(
            read_dataset::<f64, _>(bad.as_bytes()),
            Err(Error::Malformed { line: 2, .. })
        ));
        let bad = "id,label,x\na,1,zz\n";
        assert!(read_dataset::<f64, _>(bad.as_bytes()).is_err());
        let bad = "name,label,x\n";
        assert!(read_dataset::<f64, _>(bad.as_bytes()).is_err());
    }
}
