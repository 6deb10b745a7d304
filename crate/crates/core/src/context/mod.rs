//! Per-round context: one lead-II beat, normalised and block-embedded per arm.

mod filter;
mod pan_tompkins;

pub use filter::bandpass_filter;
pub use pan_tompkins::{detect_r_peaks, PASS_BAND};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::signal::{LeadId, SegmentRecord};

pub const PRE_PEAK_S: f64 = 0.25;
pub const BEAT_S: f64 = 0.55;
pub const DEGENERATE_EPS: f64 = 1e-9;

/// How a beat is brought to `d` features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resample {
    /// Endpoint-aligned linear interpolation.
    #[default]
    Interpolate,
    /// Copy the beat and pad with zeros (or truncate the tail).
    ZeroPad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub features: Vec<f64>,
    pub source_segment: String,
    pub r_peak_index: usize,
    pub n_peaks: usize,
    /// Set when the beat was flat and could not be scaled.
    pub degenerate: bool,
}

/// K copies of the context, arm k's copy placed in block `[k*d, (k+1)*d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedContext {
    pub d: usize,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddedContext {
    pub fn arms(&self) -> usize {
        self.vectors.len()
    }

    pub fn vector(&self, arm: usize) -> &[f64] {
        &self.vectors[arm]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Window `[r - 0.25 fs, r + 0.30 fs)`, `round(0.55 fs)` samples long.
pub fn segment_beat(lead_ii: &[f64], fs: f64, r_peak: usize) -> Result<Vec<f64>> {
    let before = (PRE_PEAK_S * fs).round() as i64;
    let total = (BEAT_S * fs).round() as i64;
    let start = r_peak as i64 - before;
    let end = start + total;
    if start < 0 || end > lead_ii.len() as i64 {
        return Err(Error::Boundary {
            start,
            end,
            len: lead_ii.len(),
        });
    }
    Ok(lead_ii[start as usize..end as usize].to_vec())
}

/// Scales to unit max-abs; flat beats come back unchanged with the flag set.
pub fn normalize_beat(beat: &[f64]) -> (Vec<f64>, bool) {
    let peak = beat.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > DEGENERATE_EPS {
        (beat.iter().map(|v| v / peak).collect(), false)
    } else {
        (beat.to_vec(), true)
    }
}

fn resample(beat: &[f64], d: usize, mode: Resample) -> Vec<f64> {
    let n = beat.len();
    if n == d {
        return beat.to_vec();
    }
    match mode {
        Resample::ZeroPad => {
            let mut out = vec![0.0; d];
            let k = n.min(d);
            out[..k].copy_from_slice(&beat[..k]);
            out
        }
        Resample::Interpolate => {
            if d == 1 || n == 1 {
                return vec![beat[0]; d];
            }
            let scale = (n - 1) as f64 / (d - 1) as f64;
            (0..d)
                .map(|i| {
                    let pos = i as f64 * scale;
                    let lo = (pos.floor() as usize).min(n - 1);
                    let hi = (lo + 1).min(n - 1);
                    let frac = pos - lo as f64;
                    beat[lo] * (1.0 - frac) + beat[hi] * frac
                })
                .collect()
        }
    }
}

/// Detects peaks on lead II and turns the median-index usable beat into `d` features.
pub fn build_context(segment: &SegmentRecord, d: usize, mode: Resample) -> Result<ContextVector> {
    if d == 0 {
        return Err(Error::Param("context length d must be > 0".into()));
    }
    let fs = segment.sampling_rate;
    let lead = segment.lead(LeadId::II);
    let peaks = detect_r_peaks(&lead, fs)?;
    if peaks.is_empty() {
        return Err(Error::NoContext(segment.segment_id.clone()));
    }

    // median first, then alternate outward
    let mid = (peaks.len() - 1) / 2;
    let order = (0..peaks.len()).map(|step| {
        let off = step.div_ceil(2);
        if step % 2 == 1 {
            mid + off
        } else {
            mid.wrapping_sub(off)
        }
    });
    let mut order: Vec<usize> = order.filter(|&i| i < peaks.len()).collect();
    for i in 0..peaks.len() {
        if !order.contains(&i) {
            order.push(i);
        }
    }

    for i in order {
        let r = peaks[i];
        let Ok(beat) = segment_beat(&lead, fs, r) else {
            continue;
        };
        let (norm, degenerate) = normalize_beat(&beat);
        let features = if norm.len() == d {
            norm
        } else {
            // interpolation can step over the unit sample
            normalize_beat(&resample(&norm, d, mode)).0
        };
        return Ok(ContextVector {
            features,
            source_segment: segment.segment_id.clone(),
            r_peak_index: r,
            n_peaks: peaks.len(),
            degenerate,
        });
    }
    Err(Error::NoContext(segment.segment_id.clone()))
}

/// Context extraction over a batch of segments.
pub fn build_contexts(
    segments: &[SegmentRecord],
    d: usize,
    mode: Resample,
    exec: Execution,
) -> Vec<Result<ContextVector>> {
    exec.map(segments, |s| build_context(s, d, mode))
}

pub fn embed_for_arms(ctx: &ContextVector, arms: usize) -> Result<EmbeddedContext> {
    embed_features(&ctx.features, arms)
}

pub fn embed_features(features: &[f64], arms: usize) -> Result<EmbeddedContext> {
    if arms == 0 {
        return Err(Error::Param("need at least one arm".into()));
    }
    let d = features.len();
    let vectors = (0..arms)
        .map(|k| {
            let mut v = vec![0.0; arms * d];
            v[k * d..(k + 1) * d].copy_from_slice(features);
            v
        })
        .collect();
    Ok(EmbeddedContext { d, vectors })
}
