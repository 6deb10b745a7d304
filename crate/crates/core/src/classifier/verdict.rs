//! Per-segment, per-arm correctness table used as the bandit's reward source.

use std::collections::HashMap;
use std::path::Path;

use super::model::{classify, ReducedClassifier};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::signal::{ArmCatalog, Label, SegmentRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictRow {
    pub segment_id: String,
    pub predicted: Vec<Label>,
    pub correct: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictTable {
    arms: usize,
    rows: Vec<VerdictRow>,
    index: HashMap<String, usize>,
}

impl VerdictTable {
    pub fn new(arms: usize, rows: Vec<VerdictRow>) -> Result<Self> {
        if arms == 0 {
            return Err(Error::Param("verdict table needs at least one arm".into()));
        }
        let mut index = HashMap::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.predicted.len() != arms || r.correct.len() != arms {
                return Err(Error::Shape {
                    expected: arms,
                    got: r.predicted.len().min(r.correct.len()),
                });
            }
            if index.insert(r.segment_id.clone(), i).is_some() {
                return Err(Error::Param(format!("duplicate segment id {}", r.segment_id)));
            }
        }
        Ok(Self { arms, rows, index })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn rows(&self) -> &[VerdictRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, segment_id: &str) -> Result<&VerdictRow> {
        self.index
            .get(segment_id)
            .map(|&i| &self.rows[i])
            .ok_or_else(|| Error::Lookup {
                what: "segment",
                id: segment_id.to_string(),
            })
    }

    pub fn is_correct(&self, segment_id: &str, arm: usize) -> Result<bool> {
        let row = self.row(segment_id)?;
        row.correct.get(arm).copied().ok_or_else(|| Error::Lookup {
            what: "arm",
            id: arm.to_string(),
        })
    }

    /// Accuracy of each arm over the whole table.
    pub fn arm_accuracy(&self) -> Vec<f64> {
        let n = self.rows.len().max(1) as f64;
        (0..self.arms)
            .map(|k| self.rows.iter().filter(|r| r.correct[k]).count() as f64 / n)
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header = vec!["segment_id".to_string()];
        header.extend((0..self.arms).map(|k| format!("arm{k}")));
        header.extend((0..self.arms).map(|k| format!("pred{k}")));
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for r in &self.rows {
            let mut rec = vec![r.segment_id.clone()];
            rec.extend(r.correct.iter().map(|&c| u8::from(c).to_string()));
            rec.extend(r.predicted.iter().map(|l| l.as_str().to_string()));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
        if header.len() < 3 || header.len() % 2 == 0 || &header[0] != "segment_id" {
            return Err(Error::Ingest {
                path: path.to_path_buf(),
                line: 1,
                msg: "expected header segment_id,arm0..,pred0..".into(),
            });
        }
        let arms = (header.len() - 1) / 2;
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let bad = |msg: String| Error::Ingest {
                path: path.to_path_buf(),
                line,
                msg,
            };
            if rec.len() != header.len() {
                return Err(bad(format!("expected {} fields, got {}", header.len(), rec.len())));
            }
            let correct = (0..arms)
                .map(|k| match &rec[1 + k] {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    v => Err(bad(format!("verdict must be 0 or 1, got {v:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let predicted = (0..arms)
                .map(|k| rec[1 + arms + k].parse::<Label>().map_err(|_| bad(format!("bad label {:?}", &rec[1 + arms + k]))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(VerdictRow {
                segment_id: rec[0].to_string(),
                predicted,
                correct,
            });
        }
        Self::new(arms, rows)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// Classifies every segment through every arm.
pub fn build_verdict_table(
    model: &ReducedClassifier,
    segments: &[SegmentRecord],
    catalog: &ArmCatalog,
    exec: Execution,
) -> Result<VerdictTable> {
    let rows = exec
        .map(segments, |s| -> Result<VerdictRow> {
            let predicted = (0..catalog.len())
                .map(|k| classify(model, s, k, catalog))
                .collect::<Result<Vec<_>>>()?;
            Ok(VerdictRow {
                segment_id: s.segment_id.clone(),
                correct: predicted.iter().map(|&p| p == s.label).collect(),
                predicted,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    VerdictTable::new(catalog.len(), rows)
}
