//! Compute and communication energy accounting.

mod ledger;

pub use ledger::{ComponentTotals, EnergyLedger, EnergySummary, Ratios, RoundEnergy};

use serde::{Deserialize, Serialize};

use crate::classifier::ReducedClassifierSpec;
use crate::error::{Error, Result};
use crate::signal::ArmCatalog;

pub const DEFAULT_BITS_PER_SAMPLE: u32 = 16;
pub const DEFAULT_ENERGY_PER_FLOP_UJ: f64 = 1e-5;

/// Fixed per-round cost of the on-device pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceProfile {
    pub context_extraction_uj: f64,
    pub postprocessing_uj: f64,
    pub bandit_inference_uj: f64,
    pub context_extraction_ms: f64,
    pub postprocessing_ms: f64,
    pub bandit_inference_ms: f64,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        Self {
            context_extraction_uj: 580.2,
            postprocessing_uj: 1.17,
            bandit_inference_uj: 8.0,
            context_extraction_ms: 1200.0,
            postprocessing_ms: 2.7,
            bandit_inference_ms: 175.0,
        }
    }
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.context_extraction_uj,
            self.postprocessing_uj,
            self.bandit_inference_uj,
            self.context_extraction_ms,
            self.postprocessing_ms,
            self.bandit_inference_ms,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("device profile values must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn overhead_uj(&self) -> f64 {
        self.context_extraction_uj + self.postprocessing_uj + self.bandit_inference_uj
    }

    pub fn overhead_ms(&self) -> f64 {
        self.context_extraction_ms + self.postprocessing_ms + self.bandit_inference_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolProfile {
    pub name: String,
    pub energy_per_bit_uj: f64,
}

impl ProtocolProfile {
    pub fn new(name: impl Into<String>, energy_per_bit_uj: f64) -> Result<Self> {
        let p = Self {
            name: name.into(),
            energy_per_bit_uj,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy_per_bit_uj.is_finite() && self.energy_per_bit_uj > 0.0) {
            return Err(Error::Config(format!(
                "protocol {}: energy per bit must be > 0, got {}",
                self.name, self.energy_per_bit_uj
            )));
        }
        Ok(())
    }

    /// Illustrative profiles for WiFi, LTE, 3G and BLE. These numbers are
    /// placeholders of plausible magnitude, not measurements; real studies
    /// should supply their own in the config file.
    pub fn example_profiles() -> Vec<Self> {
        [("WiFi", 0.01), ("LTE", 0.03), ("3G", 0.06), ("BLE", 0.05)]
            .into_iter()
            .map(|(n, e)| Self {
                name: n.into(),
                energy_per_bit_uj: e,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub h: u64,
    pub w: u64,
    pub c_in: u64,
    pub k: u64,
    pub c_out: u64,
}

/// `2 H W (C_in K + 1) C_out`.
pub fn conv_flops(spec: &ConvLayerSpec) -> Result<u64> {
    let ConvLayerSpec { h, w, c_in, k, c_out } = *spec;
    if [h, w, c_in, k, c_out].contains(&0) {
        return Err(Error::Param(format!("conv layer dimensions must be >= 1: {spec:?}")));
    }
    c_in.checked_mul(k)
        .and_then(|v| v.checked_add(1))
        .and_then(|v| v.checked_mul(c_out))
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(h))
        .and_then(|v| v.checked_mul(2))
        .ok_or_else(|| Error::Numerical(format!("FLOP count overflows u64 for {spec:?}")))
}

/// Conv layers as seen by the cost model for an `input_length x input_channels` lead matrix.
///
/// Leads form the width axis of the feature maps, so every block has
/// `W = input_channels`; `H` is the block's input length after the strides of
/// earlier blocks.
pub fn conv_layers(
    spec: &ReducedClassifierSpec,
    input_length: usize,
    input_channels: usize,
) -> Result<Vec<ConvLayerSpec>> {
    spec.validate()?;
    if input_length == 0 || input_channels == 0 {
        return Err(Error::Param("model input must be at least 1 x 1".into()));
    }
    let mut h = input_length;
    Ok(spec
        .blocks
        .iter()
        .map(|b| {
            let layer = ConvLayerSpec {
                h: h as u64,
                w: input_channels as u64,
                c_in: b.in_channels as u64,
                k: b.kernel as u64,
                c_out: b.out_channels as u64,
            };
            h = h.div_ceil(b.stride);
            layer
        })
        .collect())
}

/// Conv cost per block plus `2 (fan_in + 1) fan_out` per dense layer.
pub fn model_flops(spec: &ReducedClassifierSpec, input_length: usize, input_channels: usize) -> Result<u64> {
    let mut total: u64 = 0;
    let overflow = || Error::Numerical("model FLOP count overflows u64".into());
    for layer in conv_layers(spec, input_length, input_channels)? {
        total = total.checked_add(conv_flops(&layer)?).ok_or_else(overflow)?;
    }
    let mut fan_in = spec.feature_len() as u64;
    for fan_out in spec.dense_outputs() {
        let fan_out = fan_out as u64;
        total = total
            .checked_add(2 * (fan_in + 1) * fan_out)
            .ok_or_else(overflow)?;
        fan_in = fan_out;
    }
    Ok(total)
}

/// Transmission cost of `channels` leads for `duration_s` seconds.
pub fn comm_energy_channels(
    channels: usize,
    protocol: &ProtocolProfile,
    duration_s: f64,
    fs: f64,
    bits_per_sample: u32,
) -> Result<f64> {
    protocol.validate()?;
    if bits_per_sample == 0 {
        return Err(Error::Param("bits per sample must be >= 1".into()));
    }
    if !(duration_s.is_finite() && duration_s >= 0.0 && fs.is_finite() && fs > 0.0) {
        return Err(Error::Param(format!("duration {duration_s} s at {fs} Hz")));
    }
    let per_channel = duration_s * fs * f64::from(bits_per_sample) * protocol.energy_per_bit_uj;
    Ok(channels as f64 * per_channel)
}

pub fn comm_energy(
    arm: usize,
    catalog: &ArmCatalog,
    protocol: &ProtocolProfile,
    duration_s: f64,
    fs: f64,
    bits_per_sample: u32,
) -> Result<f64> {
    comm_energy_channels(catalog.channel_count(arm)?, protocol, duration_s, fs, bits_per_sample)
}

pub fn compute_energy(flops: u64, energy_per_flop_uj: f64) -> Result<f64> {
    if !(energy_per_flop_uj.is_finite() && energy_per_flop_uj >= 0.0) {
        return Err(Error::Param(format!("energy per FLOP {energy_per_flop_uj}")));
    }
    Ok(flops as f64 * energy_per_flop_uj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub bits_per_sample: u32,
    pub energy_per_flop_uj: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            bits_per_sample: DEFAULT_BITS_PER_SAMPLE,
            energy_per_flop_uj: DEFAULT_ENERGY_PER_FLOP_UJ,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bits_per_sample == 0 {
            return Err(Error::Config("bits_per_sample must be >= 1".into()));
        }
        if !(self.energy_per_flop_uj.is_finite() && self.energy_per_flop_uj >= 0.0) {
            return Err(Error::Config("energy_per_flop_uj must be >= 0".into()));
        }
        Ok(())
    }
}

/// Everything needed to price one round under one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub catalog: ArmCatalog,
    pub device: DeviceProfile,
    pub protocol: ProtocolProfile,
    pub classifier: ReducedClassifierSpec,
    pub config: EnergyConfig,
}

impl EnergyModel {
    pub fn new(
        catalog: ArmCatalog,
        device: DeviceProfile,
        protocol: ProtocolProfile,
        classifier: ReducedClassifierSpec,
        config: EnergyConfig,
    ) -> Result<Self> {
        device.validate()?;
        protocol.validate()?;
        classifier.validate()?;
        config.validate()?;
        Ok(Self {
            catalog,
            device,
            protocol,
            classifier,
            config,
        })
    }

    /// Transmission plus classification of a segment through `arm`, plus fixed overhead.
    pub fn round_energy(&self, round: usize, arm: usize, n_samples: usize, fs: f64) -> Result<RoundEnergy> {
        let channels = self.catalog.channel_count(arm)?;
        let duration_s = n_samples as f64 / fs;
        let comm_uj = comm_energy_channels(channels, &self.protocol, duration_s, fs, self.config.bits_per_sample)?;
        let flops = model_flops(&self.classifier, n_samples, channels)?;
        Ok(RoundEnergy {
            round,
            arm: Some(arm),
            comm_uj,
            compute_uj: compute_energy(flops, self.config.energy_per_flop_uj)?,
            overhead_uj: self.device.overhead_uj(),
        })
    }

    /// A round with no usable context: overhead only.
    pub fn skipped_round(&self, round: usize) -> RoundEnergy {
        RoundEnergy {
            round,
            arm: None,
            comm_uj: 0.0,
            compute_uj: 0.0,
            overhead_uj: self.device.overhead_uj(),
        }
    }
}
