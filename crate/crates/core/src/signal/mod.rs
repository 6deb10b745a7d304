//! ECG data model: leads, lead-subset arms, segments, synthetic generation and CSV ingestion.

mod io;
mod synth;

pub use io::{load_segments, read_segments, write_segments, write_segments_to};
pub use synth::{
    generate_synthetic_segment, synthetic_dataset, DatasetSpec, GaussianWave, SyntheticEcgParams,
    WaveTemplate,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const NUM_LEADS: usize = 12;

/// The twelve standard leads, in ordinal order 0..=11.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeadId {
    I,
    II,
    III,
    #[serde(rename = "aVR")]
    AVR,
    #[serde(rename = "aVL")]
    AVL,
    #[serde(rename = "aVF")]
    AVF,
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
}

impl LeadId {
    pub const ALL: [LeadId; NUM_LEADS] = [
        LeadId::I,
        LeadId::II,
        LeadId::III,
        LeadId::AVR,
        LeadId::AVL,
        LeadId::AVF,
        LeadId::V1,
        LeadId::V2,
        LeadId::V3,
        LeadId::V4,
        LeadId::V5,
        LeadId::V6,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LeadId::I => "I",
            LeadId::II => "II",
            LeadId::III => "III",
            LeadId::AVR => "aVR",
            LeadId::AVL => "aVL",
            LeadId::AVF => "aVF",
            LeadId::V1 => "V1",
            LeadId::V2 => "V2",
            LeadId::V3 => "V3",
            LeadId::V4 => "V4",
            LeadId::V5 => "V5",
            LeadId::V6 => "V6",
        }
    }
}

impl fmt::Display for LeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LeadId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Lookup {
                what: "lead",
                id: s.to_string(),
            })
    }
}

/// Diagnostic superclass of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "NORM")]
    Norm,
    #[serde(rename = "MI")]
    Mi,
    #[serde(rename = "CD")]
    Cd,
    #[serde(rename = "STTC")]
    Sttc,
    #[serde(rename = "HYP")]
    Hyp,
}

impl Label {
    pub const COUNT: usize = 5;
    pub const ALL: [Label; Self::COUNT] = [Label::Norm, Label::Mi, Label::Cd, Label::Sttc, Label::Hyp];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Norm => "NORM",
            Label::Mi => "MI",
            Label::Cd => "CD",
            Label::Sttc => "STTC",
            Label::Hyp => "HYP",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Lookup {
                what: "label",
                id: s.to_string(),
            })
    }
}

/// Dense row-major matrix (rows = samples, cols = channels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// A selectable lead subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arm {
    pub id: usize,
    pub leads: Vec<LeadId>,
}

impl Arm {
    pub fn channel_count(&self) -> usize {
        self.leads.len()
    }
}

/// Ordered catalog of K arms with contiguous ids `0..K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCatalog {
    arms: Vec<Arm>,
}

impl ArmCatalog {
    /// Builds a catalog from lead lists; arm ids follow list order.
    pub fn new(lead_sets: Vec<Vec<LeadId>>) -> Result<Self> {
        if lead_sets.is_empty() {
            return Err(Error::Param("arm catalog must contain at least one arm".into()));
        }
        let mut seen: Vec<Vec<LeadId>> = Vec::new();
        for (k, leads) in lead_sets.iter().enumerate() {
            if leads.is_empty() {
                return Err(Error::Param(format!("arm {k} has no leads")));
            }
            let mut sorted = leads.clone();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Param(format!("arm {k} repeats a lead")));
            }
            if seen.contains(&sorted) {
                return Err(Error::Param(format!("arm {k} duplicates an earlier lead set")));
            }
            seen.push(sorted);
        }
        let arms = lead_sets
            .into_iter()
            .enumerate()
            .map(|(id, leads)| Arm { id, leads })
            .collect();
        Ok(Self { arms })
    }

    pub fn from_names(sets: &[Vec<String>]) -> Result<Self> {
        let parsed = sets
            .iter()
            .map(|s| s.iter().map(|n| n.parse()).collect::<Result<Vec<LeadId>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(parsed)
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn arm(&self, id: usize) -> Result<&Arm> {
        self.arms.get(id).ok_or_else(|| Error::Lookup {
            what: "arm",
            id: id.to_string(),
        })
    }

    pub fn channel_count(&self, id: usize) -> Result<usize> {
        Ok(self.arm(id)?.channel_count())
    }

    /// Rank of each arm when ordered by channel count ascending (ties by arm id).
    pub fn channel_ranks(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&k| (self.arms[k].channel_count(), k));
        let mut ranks = vec![0; self.len()];
        for (rank, &k) in order.iter().enumerate() {
            ranks[k] = rank;
        }
        ranks
    }

    /// Arm with the most channels (lowest id on ties).
    pub fn widest_arm(&self) -> usize {
        let max = self.arms.iter().map(Arm::channel_count).max().unwrap_or(0);
        self.arms.iter().position(|a| a.channel_count() == max).unwrap_or(0)
    }

    /// Arm with the fewest channels (lowest id on ties).
    pub fn narrowest_arm(&self) -> usize {
        let min = self.arms.iter().map(Arm::channel_count).min().unwrap_or(0);
        self.arms.iter().position(|a| a.channel_count() == min).unwrap_or(0)
    }

    pub fn lead_names(&self) -> Vec<Vec<String>> {
        self.arms
            .iter()
            .map(|a| a.leads.iter().map(|l| l.name().to_string()).collect())
            .collect()
    }
}

impl Default for ArmCatalog {
    /// 2-, 3-, 4-, 6- and 12-lead subsets, fewest leads first.
    fn default() -> Self {
        use LeadId::*;
        Self::new(vec![
            vec![I, II],
            vec![I, II, V2],
            vec![I, II, III, V2],
            vec![I, II, III, AVR, AVL, AVF],
            LeadId::ALL.to_vec(),
        ])
        .expect("default catalog is valid")
    }
}

/// One 10-second 12-lead segment; the unit of one bandit round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_id: String,
    pub fold: u8,
    pub label: Label,
    pub sampling_rate: f64,
    /// `n_samples x 12`, lead-ordinal column order, millivolts.
    pub samples: Matrix,
}

impl SegmentRecord {
    pub fn new(
        segment_id: impl Into<String>,
        fold: u8,
        label: Label,
        sampling_rate: f64,
        samples: Matrix,
    ) -> Result<Self> {
        if samples.cols != NUM_LEADS {
            return Err(Error::Shape {
                expected: NUM_LEADS,
                got: samples.cols,
            });
        }
        if !(1..=10).contains(&fold) {
            return Err(Error::Param(format!("fold {fold} outside 1..=10")));
        }
        if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
            return Err(Error::Param(format!("sampling rate {sampling_rate}")));
        }
        Ok(Self {
            segment_id: segment_id.into(),
            fold,
            label,
            sampling_rate,
            samples,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.rows
    }

    pub fn lead(&self, lead: LeadId) -> Vec<f64> {
        self.samples.column(lead.ordinal())
    }
}

/// Column subset for an arm, in the arm's lead order.
pub fn select_leads(segment: &SegmentRecord, arm: usize, catalog: &ArmCatalog) -> Result<Matrix> {
    let leads = &catalog.arm(arm)?.leads;
    let n = segment.n_samples();
    let mut out = Matrix::zeros(n, leads.len());
    for r in 0..n {
        for (c, lead) in leads.iter().enumerate() {
            out.set(r, c, segment.samples.get(r, lead.ordinal()));
        }
    }
    Ok(out)
}
