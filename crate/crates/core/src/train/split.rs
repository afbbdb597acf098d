use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row indices of a train/validation/test split, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn get(&self, name: &str) -> Option<&[usize]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Shuffle whole groups and allocate them to train/val/test so no group
/// spans two splits. Group counts are rounded from `fractions`, with every
/// split receiving at least one group.
pub fn group_split<G: Ord + Clone>(group_ids: &[G], fractions: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if fractions.iter().any(|f| f.is_nan() || *f <= 0.0) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let mut groups: Vec<G> = group_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let n_groups = groups.len();
    if n_groups < 3 {
        return Err(Error::Infeasible(format!(
            "{n_groups} distinct groups cannot fill three splits"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);

    let n_train = ((fractions[0] * n_groups as f64).round() as usize).clamp(1, n_groups - 2);
    let n_val = ((fractions[1] * n_groups as f64).round() as usize).clamp(1, n_groups - 1 - n_train);
    let split_of: BTreeMap<&G, u8> = groups
        .iter()
        .enumerate()
        .map(|(pos, g)| {
            let s = if pos < n_train {
                0
            } else if pos < n_train + n_val {
                1
            } else {
                2
            };
            (g, s)
        })
        .collect();

    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (row, g) in group_ids.iter().enumerate() {
        match split_of[g] {
            0 => out.train.push(row),
            1 => out.val.push(row),
            _ => out.test.push(row),
        }
    }
    Ok(out)
}

/// Every row its own group.
pub fn row_split(n_rows: usize, fractions: [f64; 3], seed: u64) -> Result<SplitIndices> {
    let ids: Vec<usize> = (0..n_rows).collect();
    group_split(&ids, fractions, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn three_groups_one_each() {
        let ids = ["a", "a", "b", "c", "c", "c"];
        let s = group_split(&ids, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0).unwrap();
        assert!(!s.train.is_empty() && !s.val.is_empty() && !s.test.is_empty());
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 6);
    }

    #[test]
    fn single_group_is_infeasible() {
        assert!(matches!(
            group_split(&[7, 7, 7, 7], [0.6, 0.2, 0.2], 1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn bad_fractions() {
        assert!(group_split(&[1, 2, 3], [0.5, 0.5, 0.5], 1).is_err());
        assert!(group_split(&[1, 2, 3], [1.0, 0.0, 0.0], 1).is_err());
    }

    #[test]
    fn thousand_groups_never_straddle_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut ids = Vec::new();
        for g in 0..1000 {
            for _ in 0..rng.random_range(1..6) {
                ids.push(g);
            }
        }
        let s = group_split(&ids, [0.6, 0.2, 0.2], 3).unwrap();
        let groups_of = |rows: &[usize]| rows.iter().map(|&r| ids[r]).collect::<HashSet<_>>();
        let (a, b, c) = (groups_of(&s.train), groups_of(&s.val), groups_of(&s.test));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        assert_eq!(a.len() + b.len() + c.len(), 1000);
        for (got, target) in [(a.len(), 600.0), (b.len(), 200.0), (c.len(), 200.0)] {
            assert!((got as f64 - target).abs() <= 1.0);
        }
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..ids.len()).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_per_seed() {
        let ids: Vec<u32> = (0..50).collect();
        assert_eq!(
            group_split(&ids, [0.6, 0.2, 0.2], 9).unwrap(),
            group_split(&ids, [0.6, 0.2, 0.2], 9).unwrap()
        );
    }
}
