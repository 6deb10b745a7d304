use serde::{Deserialize, Serialize};
use std::path::Path;

use super::EnergyModel;
use crate::error::{Error, Result};

/// One row of the ledger; `arm` is `None` for a skipped round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundEnergy {
    pub round: usize,
    pub arm: Option<usize>,
    pub comm_uj: f64,
    pub compute_uj: f64,
    pub overhead_uj: f64,
}

impl RoundEnergy {
    pub fn total(&self) -> f64 {
        self.comm_uj + self.compute_uj + self.overhead_uj
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentTotals {
    pub comm_uj: f64,
    pub compute_uj: f64,
    pub overhead_uj: f64,
}

impl ComponentTotals {
    fn add(&mut self, e: &RoundEnergy) {
        self.comm_uj += e.comm_uj;
        self.compute_uj += e.compute_uj;
        self.overhead_uj += e.overhead_uj;
    }

    pub fn total(&self) -> f64 {
        self.comm_uj + self.compute_uj + self.overhead_uj
    }
}

/// Per-round energy of the chosen arms, with the widest and narrowest fixed
/// arms priced on the same segments for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    protocol: String,
    entries: Vec<RoundEnergy>,
    totals: ComponentTotals,
    widest: ComponentTotals,
    narrowest: ComponentTotals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub protocol: String,
    pub rounds: usize,
    pub adaptive: ComponentTotals,
    pub adaptive_total_uj: f64,
    pub widest: ComponentTotals,
    pub widest_total_uj: f64,
    pub narrowest: ComponentTotals,
    pub narrowest_total_uj: f64,
    /// baseline / adaptive, overall and per component
    pub widest_over_adaptive: Ratios,
    pub narrowest_over_adaptive: Ratios,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub overall: Option<f64>,
    pub compute: Option<f64>,
    pub comm: Option<f64>,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

impl Ratios {
    fn of(base: &ComponentTotals, adaptive: &ComponentTotals) -> Self {
        Self {
            overall: ratio(base.total(), adaptive.total()),
            compute: ratio(base.compute_uj, adaptive.compute_uj),
            comm: ratio(base.comm_uj, adaptive.comm_uj),
        }
    }
}

impl EnergyLedger {
    pub fn new(protocol: impl Into<String>) -> Self {
        Self {
            protocol: protocol.into(),
            entries: Vec::new(),
            totals: ComponentTotals::default(),
            widest: ComponentTotals::default(),
            narrowest: ComponentTotals::default(),
        }
    }

    pub fn protocol(&self) -> &str {
        &self.protocol
    }

    pub fn entries(&self) -> &[RoundEnergy] {
        &self.entries
    }

    pub fn totals(&self) -> ComponentTotals {
        self.totals
    }

    pub fn total_uj(&self) -> f64 {
        self.totals.total()
    }

    pub fn widest_totals(&self) -> ComponentTotals {
        self.widest
    }

    pub fn narrowest_totals(&self) -> ComponentTotals {
        self.narrowest
    }

    /// Prices and appends one round. `arm = None` charges overhead only.
    pub fn record(
        &mut self,
        model: &EnergyModel,
        round: usize,
        arm: Option<usize>,
        n_samples: usize,
        fs: f64,
    ) -> Result<RoundEnergy> {
        let price = |a: Option<usize>| match a {
            Some(a) => model.round_energy(round, a, n_samples, fs),
            None => Ok(model.skipped_round(round)),
        };
        let entry = price(arm)?;
        let wide = price(arm.map(|_| model.catalog.widest_arm()))?;
        let narrow = price(arm.map(|_| model.catalog.narrowest_arm()))?;
        self.widest.add(&wide);
        self.narrowest.add(&narrow);
        self.push(entry);
        Ok(entry)
    }

    fn push(&mut self, entry: RoundEnergy) {
        self.totals.add(&entry);
        self.entries.push(entry);
    }

    /// Rebuilds totals from entries alone (baselines are not part of the row log).
    pub fn replay(protocol: impl Into<String>, entries: &[RoundEnergy]) -> Self {
        let mut l = Self::new(protocol);
        for e in entries {
            l.push(*e);
        }
        l
    }

    pub fn summary(&self) -> EnergySummary {
        EnergySummary {
            protocol: self.protocol.clone(),
            rounds: self.entries.len(),
            adaptive: self.totals,
            adaptive_total_uj: self.totals.total(),
            widest: self.widest,
            widest_total_uj: self.widest.total(),
            narrowest: self.narrowest,
            narrowest_total_uj: self.narrowest.total(),
            widest_over_adaptive: Ratios::of(&self.widest, &self.totals),
            narrowest_over_adaptive: Ratios::of(&self.narrowest, &self.totals),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let fmt = |e: csv::Error| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(fmt)?;
        for e in &self.entries {
            w.serialize(e).map_err(fmt)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<RoundEnergy>> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        r.deserialize()
            .enumerate()
            .map(|(i, row)| {
                row.map_err(|e| Error::Ingest {
                    path: path.to_path_buf(),
                    line: i as u64 + 2,
                    msg: e.to_string(),
                })
            })
            .collect()
    }
}
