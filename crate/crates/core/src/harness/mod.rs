//! Closed-loop simulation: context, policy, verdict, reward, update and energy per segment.

mod config;
mod debias;
mod episode;
mod planted;
mod report;
mod reward;

pub use config::{ArmsConfig, ContextConfig, EpisodeOptions, SimConfig};
pub use debias::{debias_training_set, entropy, DebiasOutcome, DebiasReport};
pub use episode::{
    prepare_rounds, read_round_logs, run_episode, run_prepared, run_seeds, write_round_logs,
    EpisodeConfig, EpisodeOutcome, PolicyKind, PreparedRound, RoundLog, RoundStatus,
};
pub use planted::{planted_environment, planted_verdicts, PlantedSpec};
pub use report::{report, summarize, EnergyComparison, EnergyTotals, PolicySummary, Report};
pub use reward::{optimal_arm, reward_of, RewardRule};

pub use report::write_json;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::NtsConfig;
    use crate::classifier::{VerdictRow, VerdictTable};
    use crate::signal::{ArmCatalog, Label, Matrix, SegmentRecord, NUM_LEADS};

    fn setup(n: usize) -> (Vec<PreparedRound>, ArmCatalog, Vec<crate::energy::EnergyModel>) {
        let (segs, v) = planted_environment(
            &PlantedSpec {
                n_segments: n,
                seed: 4,
                ..Default::default()
            },
            5,
        )
        .unwrap();
        let cat = ArmCatalog::default();
        let rounds = prepare_rounds(&segs, &v, &cat, 55, Default::default(), Default::default()).unwrap();
        (rounds, cat, SimConfig::default().energy_models().unwrap())
    }

    fn small_nts() -> EpisodeConfig {
        EpisodeConfig {
            nts: NtsConfig {
                hidden: 2,
                sgd_steps_per_round: 5,
                batch_cap: 16,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn oracle_has_zero_regret_and_fixed_pays_the_bonus() {
        let (rounds, cat, energy) = setup(20);
        let cfg = EpisodeConfig::default();
        let o = run_prepared(&rounds, &cat, &energy, &cfg, PolicyKind::Oracle, 0, None).unwrap();
        assert_eq!(o.regret.total(), 0.0);
        let s = summarize("oracle", &o.logs, 5);
        assert_eq!(s.accuracy, Some(1.0));

        let mut all_true = rounds[0].clone();
        all_true.bitmap = vec![true; 5];
        let f = run_prepared(&[all_true], &cat, &energy, &cfg, PolicyKind::Fixed(4), 0, None).unwrap();
        assert!((f.regret.total() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn episodes_are_deterministic() {
        let (rounds, cat, energy) = setup(30);
        let mut cfg = small_nts();
        cfg.shuffle = true;
        for policy in [PolicyKind::Nts, PolicyKind::Random] {
            let a = run_prepared(&rounds, &cat, &energy, &cfg, policy, 7, None).unwrap();
            let b = run_prepared(&rounds, &cat, &energy, &cfg, policy, 7, None).unwrap();
            assert_eq!(a.logs, b.logs);
        }
    }

    #[test]
    fn frozen_bandit_does_not_learn() {
        let (rounds, cat, energy) = setup(10);
        let mut cfg = small_nts();
        cfg.freeze = true;
        let o = run_prepared(&rounds, &cat, &energy, &cfg, PolicyKind::Nts, 1, None).unwrap();
        assert_eq!(o.bandit.unwrap().rounds(), 0);
    }

    #[test]
    fn missing_verdict_is_a_config_error() {
        let seg = SegmentRecord::new("x", 1, Label::Norm, 100.0, Matrix::zeros(1000, NUM_LEADS)).unwrap();
        let v = VerdictTable::new(
            5,
            vec![VerdictRow {
                segment_id: "y".into(),
                predicted: vec![Label::Norm; 5],
                correct: vec![true; 5],
            }],
        )
        .unwrap();
        let r = prepare_rounds(&[seg], &v, &ArmCatalog::default(), 55, Default::default(), Default::default());
        assert!(matches!(r, Err(crate::Error::Config(_))));
    }

    #[test]
    fn flat_segment_is_skipped_with_overhead_only() {
        let seg = SegmentRecord::new("flat", 1, Label::Norm, 100.0, Matrix::zeros(1000, NUM_LEADS)).unwrap();
        let v = planted_verdicts(std::slice::from_ref(&seg), 5).unwrap();
        let cat = ArmCatalog::default();
        let rounds = prepare_rounds(&[seg], &v, &cat, 55, Default::default(), Default::default()).unwrap();
        let energy = SimConfig::default().energy_models().unwrap();
        let o = run_prepared(&rounds, &cat, &energy, &small_nts(), PolicyKind::Nts, 0, None).unwrap();
        let l = &o.logs[0];
        assert_eq!(l.status, RoundStatus::Skipped);
        assert_eq!(l.comm_uj + l.compute_uj, 0.0);
        assert!(l.overhead_uj > 0.0);
        assert_eq!(o.regret.rounds(), 0);
    }

    #[test]
    fn round_logs_round_trip_and_report_replays() {
        let (rounds, cat, energy) = setup(15);
        let o = run_prepared(&rounds, &cat, &energy, &EpisodeConfig::default(), PolicyKind::Random, 3, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rounds.csv");
        write_round_logs(&p, &o.logs).unwrap();
        let back = read_round_logs(&p).unwrap();
        assert_eq!(back, o.logs);
        let s = summarize("random", &back, 5);
        assert!((s.cumulative_regret - o.regret.total()).abs() < 1e-9);
        assert!((s.energy.total_uj - o.energy[0].total_uj()).abs() < 1e-6);
    }

    #[test]
    fn policy_names() {
        for p in [PolicyKind::Nts, PolicyKind::Fixed(3), PolicyKind::Random, PolicyKind::Oracle] {
            assert_eq!(p.to_string().parse::<PolicyKind>().unwrap(), p);
        }
        assert_eq!("fixed(2)".parse::<PolicyKind>().unwrap(), PolicyKind::Fixed(2));
        assert!("greedy".parse::<PolicyKind>().is_err());
    }
}
