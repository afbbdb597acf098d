use crate::data::check_labels;
use crate::error::{Error, Result};
use crate::network::sigmoid;

fn check_shapes(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            context: "scores vs labels",
            expected: labels.len(),
            got: scores.len(),
        });
    }
    check_labels(labels)
}

/// Mann–Whitney estimate of the ROC AUC: the fraction of (positive,
/// negative) pairs ranked correctly, counting ties as one half.
///
/// Sorts once and sweeps groups of tied scores, so the counts are exact
/// integers and the cost is `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_shapes(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auc scores".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("AUC"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Positives strictly above negatives, and tied (positive, negative) pairs.
    let mut concordant: u64 = 0;
    let mut tied: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]];
        let mut end = start;
        let (mut pos, mut neg) = (0u64, 0u64);
        while end < order.len() && scores[order[end]] == value {
            if labels[order[end]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            end += 1;
        }
        concordant += pos * negatives_below;
        tied += pos * neg;
        negatives_below += neg;
        start = end;
    }
    Ok((concordant as f64 + 0.5 * tied as f64) / (n_pos as f64 * n_neg as f64))
}

/// Like [`auc`] but `None` when only one class is present.
pub fn auc_if_defined(scores: &[f64], labels: &[u8]) -> Result<Option<f64>> {
    match auc(scores, labels) {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingleClass(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Fraction of correct hard predictions. A row is predicted positive iff
/// `sigmoid(logit) > threshold`; a probability exactly at the threshold is
/// class 0.
pub fn accuracy(logits: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    check_shapes(logits, labels)?;
    if labels.is_empty() {
        return Err(Error::Input("accuracy of an empty set".into()));
    }
    let correct = logits
        .iter()
        .zip(labels)
        .filter(|(&z, &l)| u8::from(sigmoid(z) > threshold) == l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                den += 1.0;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    #[test]
    fn small_example() {
        let v = auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert_eq!(v, 0.75);
        assert_eq!(pairwise_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]), 0.75);
    }

    #[test]
    fn separated_and_tied() {
        assert_eq!(auc(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.7; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass(_))));
        assert_eq!(auc_if_defined(&[0.1, 0.2], &[0, 0]).unwrap(), None);
    }

    #[test]
    fn accuracy_conventions() {
        assert_eq!(accuracy(&[50.0, 60.0], &[1, 1], 0.5).unwrap(), 1.0);
        // sigmoid(0) == 0.5 is not > 0.5.
        assert_eq!(accuracy(&[0.0], &[0], 0.5).unwrap(), 1.0);
        assert_eq!(accuracy(&[0.0], &[1], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn random_predictor_is_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let acc = accuracy(&logits, &labels, 0.5).unwrap();
        assert!((acc - 0.5).abs() <= 0.05, "{acc}");
    }

    fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..300).prop_flat_map(|n| {
            (
                prop::collection::vec(
                    prop_oneof![(0u8..10).prop_map(|k| f64::from(k) / 10.0), 0.0f64..1.0],
                    n,
                ),
                prop::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_pairwise_oracle((s, l) in scores_and_labels()) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let fast = auc(&s, &l).unwrap();
            prop_assert!((fast - pairwise_auc(&s, &l)).abs() <= 1e-12);
        }

        #[test]
        fn invariant_under_increasing_maps((s, l) in scores_and_labels()) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let base = auc(&s, &l).unwrap();
            let affine: Vec<f64> = s.iter().map(|v| 2.0 * v + 1.0).collect();
            let squashed: Vec<f64> = s.iter().map(|&v| sigmoid(v)).collect();
            prop_assert_eq!(auc(&affine, &l).unwrap(), base);
            prop_assert_eq!(auc(&squashed, &l).unwrap(), base);
        }

        #[test]
        fn negation_complements_without_ties(
            l in prop::collection::vec(0u8..2, 2..200), seed in any::<u64>()
        ) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<f64> = l.iter().map(|_| rng.random::<f64>()).collect();
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let sum = auc(&s, &l).unwrap() + auc(&neg, &l).unwrap();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}
