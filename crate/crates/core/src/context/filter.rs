//! Zero-phase Butterworth band-pass (2nd-order high-pass + 2nd-order low-pass, forward-backward).

use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    // Bilinear-transform Butterworth sections, Q = 1/sqrt(2).
    fn lowpass(fc: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        let q = std::f64::consts::FRAC_1_SQRT_2;
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        }
    }

    fn highpass(fc: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        let q = std::f64::consts::FRAC_1_SQRT_2;
        let norm = 1.0 / (1.0 + k / q + k * k);
        Self {
            b: [norm, -2.0 * norm, norm],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        }
    }

    // Direct form II transposed.
    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * out + z2;
            z2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }
}

/// Band-pass `signal` to `[low, high]` Hz without phase delay.
pub fn bandpass_filter(signal: &[f64], fs: f64, low: f64, high: f64) -> Result<Vec<f64>> {
    if !(low > 0.0 && low < high && high < fs / 2.0) {
        return Err(Error::Param(format!(
            "band [{low}, {high}] Hz invalid for fs = {fs} Hz"
        )));
    }
    let sections = [Biquad::highpass(low, fs), Biquad::lowpass(high, fs)];
    let mut y = signal.to_vec();
    for s in &sections {
        s.run(&mut y);
    }
    y.reverse();
    for s in &sections {
        s.run(&mut y);
    }
    y.reverse();
    Ok(y)
}
