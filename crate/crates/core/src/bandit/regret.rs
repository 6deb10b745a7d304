use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretEntry {
    pub optimal_reward: f64,
    pub obtained_reward: f64,
}

impl RegretEntry {
    pub fn regret(&self) -> f64 {
        self.optimal_reward - self.obtained_reward
    }
}

/// Per-round optimal vs obtained rewards and their running regret.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    entries: Vec<RegretEntry>,
    cumulative: Vec<f64>,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, optimal_reward: f64, obtained_reward: f64) -> Result<f64> {
        if !(optimal_reward.is_finite() && obtained_reward.is_finite()) {
            return Err(Error::Numerical("non-finite reward in regret ledger".into()));
        }
        let entry = RegretEntry {
            optimal_reward,
            obtained_reward,
        };
        let r = entry.regret();
        if r < 0.0 {
            return Err(Error::Param(format!(
                "obtained reward {obtained_reward} exceeds optimal {optimal_reward}"
            )));
        }
        let total = self.total() + r;
        self.entries.push(entry);
        self.cumulative.push(total);
        Ok(r)
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn rounds(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[RegretEntry] {
        &self.entries
    }

    /// Cumulative regret after each recorded round.
    pub fn curve(&self) -> &[f64] {
        &self.cumulative
    }
}
