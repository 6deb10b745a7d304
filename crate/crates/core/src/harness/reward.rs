use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ArmCatalog;

/// `r = correct_weight * [correct] + lead_bonus_epsilon * (1 - rank / (K - 1))`,
/// where rank 0 is the arm with the fewest leads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardRule {
    pub correct_weight: f64,
    pub lead_bonus_epsilon: f64,
}

impl Default for RewardRule {
    fn default() -> Self {
        Self {
            correct_weight: 1.0,
            lead_bonus_epsilon: 0.01,
        }
    }
}

impl RewardRule {
    /// Correctness must outweigh the full lead bonus range for `arms` arms.
    pub fn validate(&self, arms: usize) -> Result<()> {
        let finite = self.correct_weight.is_finite() && self.lead_bonus_epsilon.is_finite();
        if !finite || self.correct_weight <= 0.0 || self.lead_bonus_epsilon < 0.0 {
            return Err(Error::Config(format!("invalid reward rule {self:?}")));
        }
        let span = self.lead_bonus_epsilon * arms.saturating_sub(1) as f64;
        if span >= self.correct_weight {
            return Err(Error::Config(format!(
                "lead bonus span {span} must stay below correct weight {}",
                self.correct_weight
            )));
        }
        Ok(())
    }

    fn bonus(&self, rank: usize, arms: usize) -> f64 {
        if arms <= 1 {
            self.lead_bonus_epsilon
        } else {
            self.lead_bonus_epsilon * (1.0 - rank as f64 / (arms - 1) as f64)
        }
    }

    /// Rewards of every arm for one verdict bitmap.
    pub fn rewards(&self, bitmap: &[bool], catalog: &ArmCatalog) -> Result<Vec<f64>> {
        let k = catalog.len();
        if bitmap.len() != k {
            return Err(Error::Shape {
                expected: k,
                got: bitmap.len(),
            });
        }
        Ok(catalog
            .channel_ranks()
            .into_iter()
            .zip(bitmap)
            .map(|(rank, &ok)| if ok { self.correct_weight } else { 0.0 } + self.bonus(rank, k))
            .collect())
    }
}

pub fn reward_of(arm: usize, bitmap: &[bool], rule: &RewardRule, catalog: &ArmCatalog) -> Result<f64> {
    catalog.arm(arm)?;
    Ok(rule.rewards(bitmap, catalog)?[arm])
}

/// Arm maximising [`reward_of`]; lowest id wins ties.
pub fn optimal_arm(bitmap: &[bool], rule: &RewardRule, catalog: &ArmCatalog) -> Result<usize> {
    Ok(argmax(&rule.rewards(bitmap, catalog)?))
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}
