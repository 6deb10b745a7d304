//! Pan-Tompkins QRS detection.
//!
//! Stages: band-pass (5-15 Hz) -> five-point derivative -> squaring ->
//! 150 ms moving-window integration -> adaptive dual thresholds with a
//! 200 ms refractory period, T-wave slope test and RR search-back.
//! Derivative and integration windows are centred so fiducial marks stay
//! aligned with the raw signal; each mark is then snapped to the largest
//! absolute raw sample within +-75 ms.

use super::filter::bandpass_filter;
use crate::error::{Error, Result};

pub const PASS_BAND: (f64, f64) = (5.0, 15.0);
const INTEGRATION_WINDOW_S: f64 = 0.150;
const REFRACTORY_S: f64 = 0.200;
const T_WAVE_WINDOW_S: f64 = 0.360;
const SNAP_WINDOW_S: f64 = 0.075;

pub fn detect_r_peaks(lead_ii: &[f64], fs: f64) -> Result<Vec<usize>> {
    if !(fs.is_finite() && fs > 2.0 * PASS_BAND.1) {
        return Err(Error::Param(format!("sampling rate {fs} Hz too low for QRS band")));
    }
    let need = (2.0 * fs).ceil() as usize;
    if lead_ii.len() < need {
        return Err(Error::InputTooShort {
            need,
            got: lead_ii.len(),
        });
    }
    let n = lead_ii.len();
    let filtered = bandpass_filter(lead_ii, fs, PASS_BAND.0, PASS_BAND.1)?;

    let at = |v: &[f64], i: isize| v[i.clamp(0, n as isize - 1) as usize];
    let slope: Vec<f64> = (0..n as isize)
        .map(|i| {
            (2.0 * at(&filtered, i + 1) + at(&filtered, i + 2)
                - 2.0 * at(&filtered, i - 1)
                - at(&filtered, i - 2))
                * fs
                / 8.0
        })
        .collect();
    let squared: Vec<f64> = slope.iter().map(|v| v * v).collect();
    let integrated = moving_average(&squared, ((INTEGRATION_WINDOW_S * fs).round() as usize).max(1));

    let refractory = (REFRACTORY_S * fs).round() as usize;
    let candidates = dominant_maxima(&integrated, refractory);

    // Threshold learning over the first two seconds.
    let learn = &integrated[..need.min(n)];
    let mut spki = learn.iter().cloned().fold(0.0, f64::max) / 3.0;
    let mut npki = learn.iter().sum::<f64>() / learn.len() as f64 / 2.0;
    let mut thr1 = npki + 0.25 * (spki - npki);

    let max_slope = |centre: usize| -> f64 {
        let half = refractory / 2;
        slope[centre.saturating_sub(half)..(centre + half).min(n - 1) + 1]
            .iter()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    };

    let mut qrs: Vec<usize> = Vec::new();
    let mut last_slope = 0.0;
    let mut rr: Vec<usize> = Vec::new();
    // Below-threshold candidates since the last accepted QRS, for search-back.
    let mut missed: Vec<usize> = Vec::new();

    for &i in &candidates {
        let pk = integrated[i];
        if pk <= 0.0 {
            continue;
        }

        if let (Some(&last), false) = (qrs.last(), rr.is_empty()) {
            let rr_avg = rr.iter().sum::<usize>() as f64 / rr.len() as f64;
            if (i - last) as f64 > 1.66 * rr_avg {
                let thr2 = 0.5 * thr1;
                let best = missed
                    .iter()
                    .copied()
                    .filter(|&j| j > last + refractory && i > j + refractory && integrated[j] > thr2)
                    .max_by(|&a, &b| integrated[a].total_cmp(&integrated[b]));
                if let Some(j) = best {
                    spki = 0.25 * integrated[j] + 0.75 * spki;
                    push_rr(&mut rr, j - last);
                    qrs.push(j);
                    last_slope = max_slope(j);
                    missed.clear();
                }
            }
        }

        let since_last = qrs.last().map(|&l| i - l);
        let is_qrs = pk > thr1
            && match since_last {
                Some(gap) if gap <= refractory => false,
                Some(gap) if (gap as f64) < T_WAVE_WINDOW_S * fs => max_slope(i) >= 0.5 * last_slope,
                _ => true,
            };

        if is_qrs {
            spki = 0.125 * pk + 0.875 * spki;
            if let Some(&l) = qrs.last() {
                push_rr(&mut rr, i - l);
            }
            qrs.push(i);
            last_slope = max_slope(i);
            missed.clear();
        } else {
            npki = 0.125 * pk + 0.875 * npki;
            missed.push(i);
        }
        thr1 = npki + 0.25 * (spki - npki);
    }

    let snap = (SNAP_WINDOW_S * fs).round() as usize;
    let mut peaks: Vec<usize> = Vec::with_capacity(qrs.len());
    for c in qrs {
        let lo = c.saturating_sub(snap);
        let hi = (c + snap).min(n - 1);
        let r = (lo..=hi)
            .max_by(|&a, &b| lead_ii[a].abs().total_cmp(&lead_ii[b].abs()).then(b.cmp(&a)))
            .unwrap_or(c);
        if peaks.last().is_none_or(|&p| r > p) {
            peaks.push(r);
        }
    }
    Ok(peaks)
}

fn push_rr(rr: &mut Vec<usize>, v: usize) {
    rr.push(v);
    if rr.len() > 8 {
        rr.remove(0);
    }
}

fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    let half = window / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + window - half).min(n);
            (prefix[hi] - prefix[lo]) / window as f64
        })
        .collect()
}

/// Indices that are the (first) maximum within `+-radius` samples.
fn dominant_maxima(x: &[f64], radius: usize) -> Vec<usize> {
    let n = x.len();
    (0..n)
        .filter(|&i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            x[i] > 0.0
                && x[lo..i].iter().all(|&v| v < x[i])
                && x[i + 1..=hi].iter().all(|&v| v <= x[i])
        })
        .collect()
}
