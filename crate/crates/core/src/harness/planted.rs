//! Synthetic environment with a planted context-to-arm structure.
//!
//! Segments carry one of five beat morphologies; exactly one arm classifies
//! each morphology correctly, so no fixed arm does well and a policy has to
//! read the beat shape to earn reward.

use serde::{Deserialize, Serialize};

use crate::classifier::{VerdictRow, VerdictTable};
use crate::error::{Error, Result};
use crate::signal::{synthetic_dataset, DatasetSpec, Label, SegmentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedSpec {
    pub n_segments: usize,
    pub duration_s: f64,
    pub fs: f64,
    pub noise_std: f64,
    pub heart_rate_range: (f64, f64),
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            n_segments: 2000,
            duration_s: 10.0,
            fs: 100.0,
            noise_std: 0.02,
            heart_rate_range: (55.0, 95.0),
            seed: 0,
        }
    }
}

/// Arm `label.index() % arms` is the only correct arm for a segment.
pub fn planted_verdicts(segments: &[SegmentRecord], arms: usize) -> Result<VerdictTable> {
    if arms == 0 {
        return Err(Error::Param("need at least one arm".into()));
    }
    let rows = segments
        .iter()
        .map(|s| {
            let good = s.label.index() % arms;
            let wrong = Label::from_index((s.label.index() + 1) % Label::COUNT).expect("in range");
            VerdictRow {
                segment_id: s.segment_id.clone(),
                predicted: (0..arms).map(|k| if k == good { s.label } else { wrong }).collect(),
                correct: (0..arms).map(|k| k == good).collect(),
            }
        })
        .collect();
    VerdictTable::new(arms, rows)
}

pub fn planted_environment(spec: &PlantedSpec, arms: usize) -> Result<(Vec<SegmentRecord>, VerdictTable)> {
    let segments = synthetic_dataset(&DatasetSpec {
        n_segments: spec.n_segments,
        duration_s: spec.duration_s,
        fs: spec.fs,
        noise_std: spec.noise_std,
        heart_rate_range: spec.heart_rate_range,
        seed: spec.seed,
    })?;
    let verdicts = planted_verdicts(&segments, arms)?;
    Ok((segments, verdicts))
}
