//! Datasets of (input distributions, label distribution) pairs and their JSON form.
//!
//! Two on-disk layouts are accepted:
//!
//! ```text
//! { "support": {"lower", "upper", "q"},
//!   "records": [{"inputs": [[m...], ...], "label": [m...], "label_samples": [x...]?}] }
//!
//! { "support": {...}, "kde_bandwidth": h,
//!   "records": [{"input_samples": [[x...], ...], "label_samples": [x...]}] }
//! ```
//!
//! The second carries raw samples; each distribution is rebuilt with a Gaussian KDE
//! of bandwidth `h` (support units) on load. Records may also carry a free-form
//! `meta` object of generator parameters.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dist::{kde, DiscreteDistribution, Support};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub inputs: Vec<DiscreteDistribution<T>>,
    pub label: DiscreteDistribution<T>,
    /// Raw draws from the label distribution, needed for NLL scoring.
    pub label_samples: Option<Vec<T>>,
    pub meta: BTreeMap<String, f64>,
}

impl<T: Scalar> Record<T> {
    pub fn new(inputs: Vec<DiscreteDistribution<T>>, label: DiscreteDistribution<T>) -> Self {
        Record { inputs, label, label_samples: None, meta: BTreeMap::new() }
    }

    pub fn input_refs(&self) -> Vec<&DiscreteDistribution<T>> {
        self.inputs.iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub support: Support<T>,
    pub records: Vec<Record<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(support: Support<T>, records: Vec<Record<T>>) -> Result<Self> {
        let ds = Dataset { support, records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        self.support.validate()?;
        let k = self.input_count();
        for (i, r) in self.records.iter().enumerate() {
            if r.inputs.len() != k {
                return Err(invalid(format!(
                    "record {i} has {} inputs, record 0 has {k}",
                    r.inputs.len()
                )));
            }
            for d in r.inputs.iter().chain(std::iter::once(&r.label)) {
                self.support.ensure_same(d.support())?;
            }
            if let Some(samples) = &r.label_samples {
                if let Some(s) = samples.iter().find(|s| !self.support.contains(**s)) {
                    return Err(invalid(format!("record {i}: label sample {s} outside support")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of input distributions per record (0 for an empty dataset).
    pub fn input_count(&self) -> usize {
        self.records.first().map_or(0, |r| r.inputs.len())
    }

    pub fn has_label_samples(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.label_samples.is_some())
    }

    /// Records at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        Dataset {
            support: self.support,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
struct DatasetFile<T> {
    support: Support<T>,
    #[serde(default = "none", skip_serializing_if = "Option::is_none")]
    kde_bandwidth: Option<T>,
    records: Vec<RecordFile<T>>,
}

fn none<T>() -> Option<T> {
    None
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
struct RecordFile<T> {
    #[serde(default = "none", skip_serializing_if = "Option::is_none")]
    inputs: Option<Vec<Vec<T>>>,
    #[serde(default = "none", skip_serializing_if = "Option::is_none")]
    label: Option<Vec<T>>,
    #[serde(default = "none", skip_serializing_if = "Option::is_none")]
    input_samples: Option<Vec<Vec<T>>>,
    #[serde(default = "none", skip_serializing_if = "Option::is_none")]
    label_samples: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, f64>,
}

impl<T: Scalar + Serialize + DeserializeOwned> Dataset<T> {
    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            support: self.support,
            kde_bandwidth: None,
            records: self
                .records
                .iter()
                .map(|r| RecordFile {
                    inputs: Some(r.inputs.iter().map(|d| d.masses().to_vec()).collect()),
                    label: Some(r.label.masses().to_vec()),
                    input_samples: None,
                    label_samples: r.label_samples.clone(),
                    meta: r.meta.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile<T> = serde_json::from_str(text)?;
        let support = file.support;
        support.validate()?;
        let records = file
            .records
            .into_iter()
            .enumerate()
            .map(|(i, r)| decode_record(i, r, support, file.kde_bandwidth))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(support, records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn decode_record<T: Scalar>(
    index: usize,
    r: RecordFile<T>,
    support: Support<T>,
    bandwidth: Option<T>,
) -> Result<Record<T>> {
    let ctx = |e: crate::DrnError| invalid(format!("record {index}: {e}"));
    let (inputs, label) = match bandwidth {
        Some(h) => {
            let input_samples = r
                .input_samples
                .ok_or_else(|| invalid(format!("record {index}: missing input_samples")))?;
            let label_samples = r
                .label_samples
                .as_deref()
                .ok_or_else(|| invalid(format!("record {index}: missing label_samples")))?;
            let inputs = input_samples
                .iter()
                .map(|s| kde(s, h, support))
                .collect::<Result<Vec<_>>>()
                .map_err(ctx)?;
            (inputs, kde(label_samples, h, support).map_err(ctx)?)
        }
        None => {
            let inputs = r
                .inputs
                .ok_or_else(|| invalid(format!("record {index}: missing inputs")))?
                .into_iter()
                .map(|m| DiscreteDistribution::new(support, m))
                .collect::<Result<Vec<_>>>()
                .map_err(ctx)?;
            let label = r
                .label
                .ok_or_else(|| invalid(format!("record {index}: missing label")))?;
            (inputs, DiscreteDistribution::new(support, label).map_err(ctx)?)
        }
    };
    Ok(Record { inputs, label, label_samples: r.label_samples, meta: r.meta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(q: usize) -> Support<f64> {
        Support::new(0.0, 1.0, q).unwrap()
    }

    #[test]
    fn mass_file_round_trip() {
        let s = unit(4);
        let mut r = Record::new(
            vec![DiscreteDistribution::uniform(s)],
            DiscreteDistribution::new(s, vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
        );
        r.label_samples = Some(vec![0.1, 0.9]);
        r.meta.insert("y".into(), 0.5);
        let ds = Dataset::new(s, vec![r]).unwrap();
        let text = ds.to_json().unwrap();
        let back = Dataset::<f64>::from_json(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn sample_file_is_converted_by_kde() {
        let text = r#"{
            "support": {"lower": 0.0, "upper": 1.0, "q": 10},
            "kde_bandwidth": 0.05,
            "records": [
                {"input_samples": [[0.2, 0.25, 0.3]], "label_samples": [0.7, 0.75]}
            ]
        }"#;
        let ds = Dataset::<f64>::from_json(text).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records[0].inputs[0].argmax(), 2);
        assert_eq!(ds.records[0].label.argmax(), 7);
        assert_eq!(ds.records[0].label_samples.as_deref(), Some(&[0.7, 0.75][..]));
        assert!(ds.has_label_samples());
    }

    #[test]
    fn rejects_malformed_records() {
        let bad_sum = r#"{"support": {"lower": 0.0, "upper": 1.0, "q": 2},
            "records": [{"inputs": [[0.5, 0.6]], "label": [0.5, 0.5]}]}"#;
        assert!(Dataset::<f64>::from_json(bad_sum).is_err());
        let ragged = r#"{"support": {"lower": 0.0, "upper": 1.0, "q": 2},
            "records": [{"inputs": [[0.5, 0.5]], "label": [0.5, 0.5]},
                        {"inputs": [[0.5, 0.5], [0.5, 0.5]], "label": [0.5, 0.5]}]}"#;
        assert!(Dataset::<f64>::from_json(ragged).is_err());
        let missing = r#"{"support": {"lower": 0.0, "upper": 1.0, "q": 2},
            "kde_bandwidth": 0.1, "records": [{"label_samples": [0.5]}]}"#;
        assert!(Dataset::<f64>::from_json(missing).is_err());
        let outside = r#"{"support": {"lower": 0.0, "upper": 1.0, "q": 2},
            "records": [{"inputs": [[0.5, 0.5]], "label": [0.5, 0.5], "label_samples": [2.0]}]}"#;
        assert!(Dataset::<f64>::from_json(outside).is_err());
    }
}
