use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reward::{optimal_arm, RewardRule};
use crate::classifier::VerdictTable;
use crate::error::Result;
use crate::signal::{ArmCatalog, SegmentRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasOutcome {
    /// Kept training segments (original order) followed by the validation fold.
    pub dataset: Vec<SegmentRecord>,
    pub report: DebiasReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasReport {
    pub validation_fold: u8,
    /// Optimal-arm counts over the training folds.
    pub histogram_before: Vec<usize>,
    pub histogram_after: Vec<usize>,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub validation_segments: usize,
    pub warning: Option<String>,
}

/// Shannon entropy (nats) of a count histogram.
pub fn entropy(histogram: &[usize]) -> f64 {
    let n: usize = histogram.iter().sum();
    if n == 0 {
        return 0.0;
    }
    histogram
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Down-samples the modal optimal-arm group of the training folds to the size
/// of the second-largest group, then appends the untouched validation fold.
pub fn debias_training_set(
    segments: &[SegmentRecord],
    validation_fold: u8,
    verdicts: &VerdictTable,
    rule: &RewardRule,
    catalog: &ArmCatalog,
    seed: u64,
) -> Result<DebiasOutcome> {
    let k = catalog.len();
    let (train, validation): (Vec<&SegmentRecord>, Vec<&SegmentRecord>) =
        segments.iter().partition(|s| s.fold != validation_fold);
    let optimal = train
        .iter()
        .map(|s| optimal_arm(&verdicts.row(&s.segment_id)?.correct, rule, catalog))
        .collect::<Result<Vec<_>>>()?;
    let mut before = vec![0usize; k];
    for &a in &optimal {
        before[a] += 1;
    }

    let mut ranked: Vec<usize> = (0..k).collect();
    ranked.sort_by(|&a, &b| before[b].cmp(&before[a]).then(a.cmp(&b)));
    let modal = ranked[0];
    let second = ranked.get(1).map_or(0, |&a| before[a]);

    let mut keep = vec![true; train.len()];
    let mut warning = None;
    if second == 0 {
        warning = Some("training folds contain a single optimal action; left unchanged".to_string());
    } else if before[modal] > second {
        let members: Vec<usize> = (0..train.len()).filter(|&i| optimal[i] == modal).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut retained = vec![false; members.len()];
        for j in index::sample(&mut rng, members.len(), second) {
            retained[j] = true;
        }
        for (j, &i) in members.iter().enumerate() {
            keep[i] = retained[j];
        }
    }

    let mut after = vec![0usize; k];
    let mut dataset = Vec::with_capacity(segments.len());
    for (i, s) in train.iter().enumerate() {
        if keep[i] {
            after[optimal[i]] += 1;
            dataset.push((*s).clone());
        }
    }
    dataset.extend(validation.iter().map(|s| (*s).clone()));

    Ok(DebiasOutcome {
        dataset,
        report: DebiasReport {
            validation_fold,
            entropy_before: entropy(&before),
            entropy_after: entropy(&after),
            histogram_before: before,
            histogram_after: after,
            validation_segments: validation.len(),
            warning,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::VerdictRow;
    use crate::signal::{Label, Matrix, NUM_LEADS};

    fn seg(i: usize, fold: u8) -> SegmentRecord {
        SegmentRecord::new(format!("s{i}"), fold, Label::Norm, 100.0, Matrix::zeros(4, NUM_LEADS)).unwrap()
    }

    /// Bitmap whose optimal arm is `a` (only arm `a` correct).
    fn row(i: usize, a: usize) -> VerdictRow {
        let mut correct = vec![false; 5];
        correct[a] = true;
        VerdictRow {
            segment_id: format!("s{i}"),
            predicted: vec![Label::Norm; 5],
            correct,
        }
    }

    fn build(hist: &[usize], validation: usize) -> (Vec<SegmentRecord>, VerdictTable) {
        let mut segs = Vec::new();
        let mut rows = Vec::new();
        let mut i = 0;
        for (a, &n) in hist.iter().enumerate() {
            for _ in 0..n {
                segs.push(seg(i, 1 + (i % 9) as u8));
                rows.push(row(i, a));
                i += 1;
            }
        }
        for _ in 0..validation {
            segs.push(seg(i, 10));
            rows.push(row(i, 0));
            i += 1;
        }
        (segs, VerdictTable::new(5, rows).unwrap())
    }

    #[test]
    fn skewed_histogram_is_rebalanced() {
        let (segs, v) = build(&[900, 50, 30, 15, 5], 20);
        let out = debias_training_set(&segs, 10, &v, &RewardRule::default(), &ArmCatalog::default(), 3).unwrap();
        assert_eq!(out.report.histogram_after, vec![50, 50, 30, 15, 5]);
        assert_eq!(out.dataset.len(), 150 + 20);
        assert!(out.dataset[150..].iter().all(|s| s.fold == 10));
        assert!(out.report.entropy_after >= out.report.entropy_before);
        let again = debias_training_set(&segs, 10, &v, &RewardRule::default(), &ArmCatalog::default(), 3).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn balanced_and_degenerate_inputs_are_unchanged() {
        let (segs, v) = build(&[10, 10, 10, 10, 10], 0);
        let out = debias_training_set(&segs, 10, &v, &RewardRule::default(), &ArmCatalog::default(), 0).unwrap();
        assert_eq!(out.dataset, segs);
        assert!(out.report.warning.is_none());

        let (segs, v) = build(&[0, 0, 7, 0, 0], 2);
        let out = debias_training_set(&segs, 10, &v, &RewardRule::default(), &ArmCatalog::default(), 0).unwrap();
        assert_eq!(out.dataset, segs);
        assert!(out.report.warning.is_some());
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(&[]), 0.0);
        assert_eq!(entropy(&[5, 0]), 0.0);
        assert!((entropy(&[1, 1]) - 2f64.ln()).abs() < 1e-15);
    }
}
