use serde::{Deserialize, Serialize};
use std::path::Path;

use super::episode::EpisodeConfig;
use super::reward::RewardRule;
use crate::bandit::NtsConfig;
use crate::classifier::{ReducedClassifierSpec, TrainConfig};
use crate::context::Resample;
use crate::energy::{DeviceProfile, EnergyConfig, EnergyModel, ProtocolProfile};
use crate::error::{Error, Result};
use crate::signal::ArmCatalog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmsConfig {
    /// Lead names per arm, e.g. `["I", "II"]`.
    pub sets: Vec<Vec<String>>,
}

impl Default for ArmsConfig {
    fn default() -> Self {
        Self {
            sets: ArmCatalog::default().lead_names(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    pub d: usize,
    pub resample: Resample,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            d: 55,
            resample: Resample::Interpolate,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeOptions {
    pub shuffle: bool,
    pub freeze: bool,
}

/// Whole simulator configuration, one TOML table per section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub arms: ArmsConfig,
    pub nts: NtsConfig,
    pub reward: RewardRule,
    pub device: DeviceProfile,
    pub protocols: Vec<ProtocolProfile>,
    pub classifier: ReducedClassifierSpec,
    pub training: TrainConfig,
    pub context: ContextConfig,
    pub energy: EnergyConfig,
    pub episode: EpisodeOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            arms: ArmsConfig::default(),
            nts: NtsConfig::default(),
            reward: RewardRule::default(),
            device: DeviceProfile::default(),
            protocols: ProtocolProfile::example_profiles(),
            classifier: ReducedClassifierSpec::default(),
            training: TrainConfig::default(),
            context: ContextConfig::default(),
            energy: EnergyConfig::default(),
            episode: EpisodeOptions::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn catalog(&self) -> Result<ArmCatalog> {
        ArmCatalog::from_names(&self.arms.sets).map_err(|e| Error::Config(format!("[arms] {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let cat = self.catalog()?;
        let config = |e: Error| match e {
            Error::Config(m) | Error::Param(m) => Error::Config(m),
            other => other,
        };
        self.nts.validate().map_err(config)?;
        if self.nts.input_dim != cat.len() * self.context.d {
            return Err(Error::Config(format!(
                "[nts] input_dim {} must equal arms ({}) x context d ({})",
                self.nts.input_dim,
                cat.len(),
                self.context.d
            )));
        }
        self.reward.validate(cat.len())?;
        self.device.validate()?;
        if self.protocols.is_empty() {
            return Err(Error::Config("[protocols] needs at least one profile".into()));
        }
        for p in &self.protocols {
            p.validate()?;
        }
        self.classifier.validate().map_err(config)?;
        self.energy.validate()?;
        Ok(())
    }

    pub fn energy_models(&self) -> Result<Vec<EnergyModel>> {
        let cat = self.catalog()?;
        self.protocols
            .iter()
            .map(|p| {
                EnergyModel::new(
                    cat.clone(),
                    self.device,
                    p.clone(),
                    self.classifier.clone(),
                    self.energy,
                )
            })
            .collect()
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            nts: self.nts.clone(),
            reward: self.reward,
            d: self.context.d,
            resample: self.context.resample,
            shuffle: self.episode.shuffle,
            freeze: self.episode.freeze,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(SimConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn shipped_files_parse() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        assert_eq!(SimConfig::load(dir.join("default.toml")).unwrap(), SimConfig::default());
        let desk = SimConfig::load(dir.join("desk.toml")).unwrap();
        assert_eq!(desk.nts.hidden, 2);
        assert_eq!(desk.protocols, SimConfig::default().protocols);
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(SimConfig::from_toml("").unwrap(), SimConfig::default());
    }

    #[test]
    fn rejects_bad_sections() {
        assert!(matches!(SimConfig::from_toml("[nts]\nnu = -1.0\n"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::from_toml("[nts]\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::from_toml("[reward]\nlead_bonus_epsilon = 0.5\n"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::from_toml("[arms]\nsets = [[\"II\"], [\"II\"]]\n"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::from_toml("[context]\nd = 40\n"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::from_toml("protocols = []\n"), Err(Error::Config(_))));
    }
}
