use serde::{Deserialize, Serialize};
use std::path::Path;

use super::episode::{RoundLog, RoundStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTotals {
    pub comm_uj: f64,
    pub compute_uj: f64,
    pub overhead_uj: f64,
    pub total_uj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub rounds: usize,
    pub decided: usize,
    pub skipped: usize,
    pub cumulative_regret: f64,
    /// Fraction of decided rounds whose chosen arm was correct.
    pub accuracy: Option<f64>,
    pub arm_histogram: Vec<usize>,
    pub energy: EnergyTotals,
}

/// `baseline / policy` energy ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyComparison {
    pub policy: String,
    pub baseline: String,
    pub overall: Option<f64>,
    pub compute: Option<f64>,
    pub comm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub policies: Vec<PolicySummary>,
    pub comparisons: Vec<EnergyComparison>,
}

/// Totals re-derived from the round log in log order.
pub fn summarize(policy: &str, logs: &[RoundLog], arms: usize) -> PolicySummary {
    let mut s = PolicySummary {
        policy: policy.to_string(),
        rounds: logs.len(),
        decided: 0,
        skipped: 0,
        cumulative_regret: 0.0,
        accuracy: None,
        arm_histogram: vec![0; arms],
        energy: EnergyTotals::default(),
    };
    let mut correct = 0usize;
    for l in logs {
        match l.status {
            RoundStatus::Ok => s.decided += 1,
            RoundStatus::Skipped => s.skipped += 1,
        }
        if let Some(a) = l.arm {
            if a >= s.arm_histogram.len() {
                s.arm_histogram.resize(a + 1, 0);
            }
            s.arm_histogram[a] += 1;
        }
        correct += usize::from(l.correct == Some(true));
        if let Some(r) = l.regret {
            s.cumulative_regret += r;
        }
        s.energy.comm_uj += l.comm_uj;
        s.energy.compute_uj += l.compute_uj;
        s.energy.overhead_uj += l.overhead_uj;
    }
    s.energy.total_uj = s.energy.comm_uj + s.energy.compute_uj + s.energy.overhead_uj;
    if s.decided > 0 {
        s.accuracy = Some(correct as f64 / s.decided as f64);
    }
    s
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

/// Summaries for each run plus energy ratios against the named baselines that are present.
pub fn report(runs: &[(String, Vec<RoundLog>)], arms: usize, baselines: &[String]) -> Report {
    let policies: Vec<PolicySummary> = runs.iter().map(|(p, l)| summarize(p, l, arms)).collect();
    let mut comparisons = Vec::new();
    for base in baselines {
        let Some(b) = policies.iter().find(|s| &s.policy == base) else {
            continue;
        };
        for s in policies.iter().filter(|s| &s.policy != base) {
            comparisons.push(EnergyComparison {
                policy: s.policy.clone(),
                baseline: base.clone(),
                overall: ratio(b.energy.total_uj, s.energy.total_uj),
                compute: ratio(b.energy.compute_uj, s.energy.compute_uj),
                comm: ratio(b.energy.comm_uj, s.energy.comm_uj),
            });
        }
    }
    Report {
        policies,
        comparisons,
    }
}

impl Report {
    /// Writes `report.json`, `report.csv` and `regret_curves.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, runs: &[(String, Vec<RoundLog>)]) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("report.json"), self)?;

        let path = dir.join("report.csv");
        let fmt = |p: &Path, e: csv::Error| Error::Format {
            path: p.to_path_buf(),
            msg: e.to_string(),
        };
        let mut w = csv::Writer::from_path(&path).map_err(|e| fmt(&path, e))?;
        w.write_record([
            "policy",
            "rounds",
            "decided",
            "skipped",
            "cumulative_regret",
            "accuracy",
            "arm_histogram",
            "comm_uj",
            "compute_uj",
            "overhead_uj",
            "total_uj",
        ])
        .map_err(|e| fmt(&path, e))?;
        for s in &self.policies {
            let hist = s.arm_histogram.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
            w.write_record([
                s.policy.clone(),
                s.rounds.to_string(),
                s.decided.to_string(),
                s.skipped.to_string(),
                s.cumulative_regret.to_string(),
                s.accuracy.map(|a| a.to_string()).unwrap_or_default(),
                hist,
                s.energy.comm_uj.to_string(),
                s.energy.compute_uj.to_string(),
                s.energy.overhead_uj.to_string(),
                s.energy.total_uj.to_string(),
            ])
            .map_err(|e| fmt(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("regret_curves.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| fmt(&path, e))?;
        w.write_record(["policy", "round", "cumulative_regret"]).map_err(|e| fmt(&path, e))?;
        for (p, logs) in runs {
            for l in logs {
                w.write_record([p.clone(), l.round.to_string(), l.cumulative_regret.to_string()])
                    .map_err(|e| fmt(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
