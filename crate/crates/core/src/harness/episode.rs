use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::reward::{argmax, RewardRule};
use crate::bandit::{NeuralThompson, NtsConfig, RegretLedger};
use crate::classifier::VerdictTable;
use crate::context::{build_contexts, embed_features, ContextVector, Resample};
use crate::energy::{EnergyLedger, EnergyModel};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::signal::{ArmCatalog, SegmentRecord};

const RANDOM_STREAM: u64 = 0x7261_6e64_6f6d;
const SHUFFLE_STREAM: u64 = 0x7368_7566_666c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Nts,
    Fixed(usize),
    Random,
    Oracle,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Nts => f.write_str("nts"),
            PolicyKind::Fixed(k) => write!(f, "fixed:{k}"),
            PolicyKind::Random => f.write_str("random"),
            PolicyKind::Oracle => f.write_str("oracle"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    /// `nts`, `random` (or `uniform_random`), `oracle`, `fixed:K`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "nts" => Ok(PolicyKind::Nts),
            "random" | "uniform_random" => Ok(PolicyKind::Random),
            "oracle" => Ok(PolicyKind::Oracle),
            _ => s
                .strip_prefix("fixed:")
                .or_else(|| s.strip_prefix("fixed(").and_then(|r| r.strip_suffix(')')))
                .and_then(|k| k.parse().ok())
                .map(PolicyKind::Fixed)
                .ok_or_else(|| Error::Config(format!("unknown policy {s:?}"))),
        }
    }
}

/// One segment ready for any policy: its verdicts and (if found) its context.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRound {
    pub segment_id: String,
    pub n_samples: usize,
    pub fs: f64,
    pub bitmap: Vec<bool>,
    /// `Err` holds the reason the round will be skipped.
    pub context: std::result::Result<ContextVector, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub nts: NtsConfig,
    pub reward: RewardRule,
    pub d: usize,
    pub resample: Resample,
    pub shuffle: bool,
    /// Select with the bandit but never update it.
    pub freeze: bool,
    #[serde(skip)]
    pub bandit_exec: Execution,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            nts: NtsConfig::default(),
            reward: RewardRule::default(),
            d: 55,
            resample: Resample::Interpolate,
            shuffle: false,
            freeze: false,
            bandit_exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundStatus {
    Ok,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub segment_id: String,
    pub status: RoundStatus,
    pub arm: Option<usize>,
    pub optimal_arm: usize,
    pub correct: Option<bool>,
    pub reward: Option<f64>,
    pub regret: Option<f64>,
    pub cumulative_regret: f64,
    pub comm_uj: f64,
    pub compute_uj: f64,
    pub overhead_uj: f64,
    pub r_peak_index: Option<usize>,
    pub n_peaks: Option<usize>,
    pub degenerate: Option<bool>,
    pub skip_reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub policy: PolicyKind,
    pub seed: u64,
    pub logs: Vec<RoundLog>,
    pub regret: RegretLedger,
    /// One ledger per protocol, in configuration order.
    pub energy: Vec<EnergyLedger>,
    pub bandit: Option<NeuralThompson>,
}

/// Extracts contexts and attaches verdict bitmaps. Missing verdicts fail upfront.
pub fn prepare_rounds(
    dataset: &[SegmentRecord],
    verdicts: &VerdictTable,
    catalog: &ArmCatalog,
    d: usize,
    resample: Resample,
    exec: Execution,
) -> Result<Vec<PreparedRound>> {
    if dataset.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    if verdicts.arms() != catalog.len() {
        return Err(Error::Config(format!(
            "verdict table has {} arms, catalog has {}",
            verdicts.arms(),
            catalog.len()
        )));
    }
    let bitmaps = dataset
        .iter()
        .map(|s| {
            verdicts
                .row(&s.segment_id)
                .map(|r| r.correct.clone())
                .map_err(|_| Error::Config(format!("no verdict for segment {}", s.segment_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let contexts = build_contexts(dataset, d, resample, exec);
    dataset
        .iter()
        .zip(bitmaps)
        .zip(contexts)
        .map(|((s, bitmap), ctx)| {
            let context = match ctx {
                Ok(c) => Ok(c),
                Err(e @ (Error::NoContext(_) | Error::InputTooShort { .. })) => Err(e.to_string()),
                Err(e) => return Err(e),
            };
            Ok(PreparedRound {
                segment_id: s.segment_id.clone(),
                n_samples: s.n_samples(),
                fs: s.sampling_rate,
                bitmap,
                context,
            })
        })
        .collect()
}

/// Runs one policy over prepared rounds. `initial` resumes a saved bandit.
pub fn run_prepared(
    rounds: &[PreparedRound],
    catalog: &ArmCatalog,
    energy: &[EnergyModel],
    cfg: &EpisodeConfig,
    policy: PolicyKind,
    seed: u64,
    initial: Option<NeuralThompson>,
) -> Result<EpisodeOutcome> {
    let k = catalog.len();
    cfg.reward.validate(k)?;
    if energy.is_empty() {
        return Err(Error::Config("at least one protocol profile is required".into()));
    }
    if let PolicyKind::Fixed(a) = policy {
        if a >= k {
            return Err(Error::Config(format!("fixed arm {a} not in catalog of {k}")));
        }
    }
    let mut bandit = match (policy, initial) {
        (PolicyKind::Nts, Some(b)) => Some(b.with_execution(cfg.bandit_exec)),
        (PolicyKind::Nts, None) => Some(NeuralThompson::new(cfg.nts.clone(), seed)?.with_execution(cfg.bandit_exec)),
        _ => None,
    };
    if let Some(b) = &bandit {
        if b.config().input_dim != k * cfg.d {
            return Err(Error::Config(format!(
                "bandit input_dim {} must equal arms x d = {}",
                b.config().input_dim,
                k * cfg.d
            )));
        }
    }

    let mut order: Vec<usize> = (0..rounds.len()).collect();
    if cfg.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_STREAM));
    }
    let mut random = ChaCha8Rng::seed_from_u64(seed ^ RANDOM_STREAM);
    let mut regret = RegretLedger::new();
    let mut ledgers: Vec<EnergyLedger> = energy.iter().map(|m| EnergyLedger::new(m.protocol.name.clone())).collect();
    let mut logs = Vec::with_capacity(rounds.len());

    for (t, &i) in order.iter().enumerate() {
        let r = &rounds[i];
        let rewards = cfg.reward.rewards(&r.bitmap, catalog)?;
        let optimal = argmax(&rewards);
        let ctx = match &r.context {
            Ok(c) => c,
            Err(reason) => {
                let mut first = None;
                for (m, l) in energy.iter().zip(ledgers.iter_mut()) {
                    let e = l.record(m, t, None, r.n_samples, r.fs)?;
                    first.get_or_insert(e);
                }
                let e = first.expect("non-empty");
                logs.push(RoundLog {
                    round: t,
                    segment_id: r.segment_id.clone(),
                    status: RoundStatus::Skipped,
                    arm: None,
                    optimal_arm: optimal,
                    correct: None,
                    reward: None,
                    regret: None,
                    cumulative_regret: regret.total(),
                    comm_uj: e.comm_uj,
                    compute_uj: e.compute_uj,
                    overhead_uj: e.overhead_uj,
                    r_peak_index: None,
                    n_peaks: None,
                    degenerate: None,
                    skip_reason: Some(reason.clone()),
                });
                continue;
            }
        };

        let arm = match policy {
            PolicyKind::Fixed(a) => a,
            PolicyKind::Random => random.random_range(0..k),
            PolicyKind::Oracle => optimal,
            PolicyKind::Nts => {
                let b = bandit.as_mut().expect("nts policy has a bandit");
                let emb = embed_features(&ctx.features, k)?;
                let (arm, _) = b.choose(&emb)?;
                if !cfg.freeze {
                    b.update(emb.vector(arm), rewards[arm])?;
                }
                arm
            }
        };
        let inc = regret.record(rewards[optimal], rewards[arm])?;
        let mut first = None;
        for (m, l) in energy.iter().zip(ledgers.iter_mut()) {
            let e = l.record(m, t, Some(arm), r.n_samples, r.fs)?;
            first.get_or_insert(e);
        }
        let e = first.expect("non-empty");
        logs.push(RoundLog {
            round: t,
            segment_id: r.segment_id.clone(),
            status: RoundStatus::Ok,
            arm: Some(arm),
            optimal_arm: optimal,
            correct: Some(r.bitmap[arm]),
            reward: Some(rewards[arm]),
            regret: Some(inc),
            cumulative_regret: regret.total(),
            comm_uj: e.comm_uj,
            compute_uj: e.compute_uj,
            overhead_uj: e.overhead_uj,
            r_peak_index: Some(ctx.r_peak_index),
            n_peaks: Some(ctx.n_peaks),
            degenerate: Some(ctx.degenerate),
            skip_reason: None,
        });
    }

    Ok(EpisodeOutcome {
        policy,
        seed,
        logs,
        regret,
        energy: ledgers,
        bandit,
    })
}

/// Context extraction followed by [`run_prepared`].
pub fn run_episode(
    dataset: &[SegmentRecord],
    verdicts: &VerdictTable,
    catalog: &ArmCatalog,
    energy: &[EnergyModel],
    cfg: &EpisodeConfig,
    policy: PolicyKind,
    seed: u64,
) -> Result<EpisodeOutcome> {
    let rounds = prepare_rounds(dataset, verdicts, catalog, cfg.d, cfg.resample, Execution::default())?;
    run_prepared(&rounds, catalog, energy, cfg, policy, seed, None)
}

/// Independent episodes, one per seed.
pub fn run_seeds(
    rounds: &[PreparedRound],
    catalog: &ArmCatalog,
    energy: &[EnergyModel],
    cfg: &EpisodeConfig,
    policy: PolicyKind,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<EpisodeOutcome>> {
    exec.map(seeds, |&s| run_prepared(rounds, catalog, energy, cfg, policy, s, None))
        .into_iter()
        .collect()
}

pub fn write_round_logs(path: impl AsRef<Path>, logs: &[RoundLog]) -> Result<()> {
    let path = path.as_ref();
    let fmt = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fmt)?;
    for l in logs {
        w.serialize(l).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_round_logs(path: impl AsRef<Path>) -> Result<Vec<RoundLog>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let logs = r
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Ingest {
                path: path.to_path_buf(),
                line: i as u64 + 2,
                msg: e.to_string(),
            })
        })
        .collect::<Result<Vec<RoundLog>>>()?;
    if logs.windows(2).any(|w| w[1].round <= w[0].round) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "round numbers must be strictly increasing".into(),
        });
    }
    Ok(logs)
}
