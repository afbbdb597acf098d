//! Weighted k-means with k-means++ seeding and seeded restarts.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    /// Restarts that end with an empty cluster are retried; this many
    /// failures abort the fit.
    pub max_failures: usize,
    pub max_iterations: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 10,
            max_failures: 10,
            max_iterations: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Weighted inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lower index.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(k, c)| (k, sq_dist(point, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn sample_index(rng: &mut ChaCha8Rng, mass: &[f64]) -> Option<usize> {
    let total: f64 = mass.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let mut target = rng.random::<f64>() * total;
    let mut last_positive = None;
    for (i, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            last_positive = Some(i);
            if target < m {
                return Some(i);
            }
            target -= m;
        }
    }
    last_positive
}

fn plus_plus(points: &[Vec<f64>], weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<f64>>> {
    let first = sample_index(rng, weights)?;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let mass: Vec<f64> = d2.iter().zip(weights).map(|(d, w)| d * w).collect();
        let next = sample_index(rng, &mass)?;
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    Some(centroids)
}

/// One Lloyd run. `None` if a cluster empties.
fn lloyd(
    points: &[Vec<f64>],
    weights: &[f64],
    mut centroids: Vec<Vec<f64>>,
    max_iterations: usize,
) -> Option<KMeansFit> {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignment: Vec<usize> = vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    for _ in 0..max_iterations {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            inertia += weights[i] * d;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        if let Some(&prev) = history.last() {
            debug_assert!(
                inertia <= prev * (1.0 + 1e-9) + 1e-12,
                "k-means inertia increased: {prev} -> {inertia}"
            );
        }
        history.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut mass = vec![0.0; k];
        for (i, p) in points.iter().enumerate() {
            let c = assignment[i];
            mass[c] += weights[i];
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += weights[i] * v;
            }
        }
        if mass.contains(&0.0) {
            return None;
        }
        for ((centroid, sum), m) in centroids.iter_mut().zip(sums).zip(mass) {
            *centroid = sum.into_iter().map(|s| s / m).collect();
        }
    }
    // Final state against the final centroids (differs from the last
    // history entry only when the iteration cap was hit).
    let mut inertia = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest(p, &centroids);
        assignment[i] = c;
        inertia += weights[i] * d;
    }
    let mut used = vec![false; k];
    assignment.iter().for_each(|&c| used[c] = true);
    if used.contains(&false) {
        return None;
    }
    Some(KMeansFit {
        centroids,
        assignment,
        inertia,
        inertia_history: history,
    })
}

/// Best-of-`restarts` weighted k-means. Restart `r` draws from the seeded
/// ChaCha stream `r`, so results depend only on `seed`.
pub fn weighted_kmeans(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    seed: u64,
    options: &KMeansOptions,
) -> Result<KMeansFit> {
    if k == 0 || k > points.len() {
        return Err(Error::Infeasible(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    if weights.len() != points.len() {
        return Err(Error::Dimension {
            context: "k-means weights",
            expected: points.len(),
            got: weights.len(),
        });
    }
    let mut best: Option<KMeansFit> = None;
    let mut successes = 0;
    let mut failures = 0;
    let mut stream = 0u64;
    while successes < options.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        stream += 1;
        let fit = plus_plus(points, weights, k, &mut rng)
            .and_then(|init| lloyd(points, weights, init, options.max_iterations));
        match fit {
            Some(fit) => {
                successes += 1;
                if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
                    best = Some(fit);
                }
            }
            None => {
                failures += 1;
                if failures >= options.max_failures {
                    return Err(Error::Infeasible(format!(
                        "k-means with k={k} produced an empty cluster {failures} times"
                    )));
                }
            }
        }
    }
    Ok(best.expect("at least one successful restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_blobs() -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut points = Vec::new();
        for (cx, cy) in [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)] {
            for i in 0..5 {
                points.push(vec![cx + 0.1 * i as f64, cy - 0.1 * i as f64]);
            }
        }
        let weights = (0..15).map(|i| 1.0 + (i % 3) as f64).collect();
        (points, weights)
    }

    #[test]
    fn recovers_separated_blobs() {
        let (points, weights) = three_blobs();
        let fit = weighted_kmeans(&points, &weights, 3, 7, &KMeansOptions::default()).unwrap();
        for blob in 0..3 {
            let ids: Vec<usize> = fit.assignment[blob * 5..blob * 5 + 5].to_vec();
            assert!(ids.iter().all(|&c| c == ids[0]));
        }
        // Within-blob spread alone: 2 * (0.04 + 0.01 + 0 + 0.01 + 0.04) per unit weight.
        assert!(fit.inertia <= 3.0 * 0.2 * 3.0);
        let mut firsts = vec![fit.assignment[0], fit.assignment[5], fit.assignment[10]];
        firsts.sort_unstable();
        firsts.dedup();
        assert_eq!(firsts.len(), 3);
    }

    #[test]
    fn k_equal_to_points_is_identity_partition() {
        let (points, weights) = three_blobs();
        let fit = weighted_kmeans(&points, &weights, 15, 1, &KMeansOptions::default()).unwrap();
        let mut ids = fit.assignment.clone();
        ids.sort_unstable();
        assert_eq!(ids, (0..15).collect::<Vec<_>>());
        assert!(fit.inertia <= 1e-20);
    }

    #[test]
    fn infeasible_k() {
        let (points, weights) = three_blobs();
        assert!(matches!(
            weighted_kmeans(&points, &weights, 16, 1, &KMeansOptions::default()),
            Err(Error::Infeasible(_))
        ));
        // Two distinct locations cannot host three nonempty clusters.
        let dup = vec![vec![0.0], vec![0.0], vec![1.0]];
        assert!(weighted_kmeans(&dup, &[1.0; 3], 3, 1, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let (points, weights) = three_blobs();
        let a = weighted_kmeans(&points, &weights, 4, 42, &KMeansOptions::default()).unwrap();
        let b = weighted_kmeans(&points, &weights, 4, 42, &KMeansOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn inertia_never_increases(
            raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 1u32..20), 4..60),
            k in 1usize..4,
            seed in any::<u64>(),
        ) {
            let points: Vec<Vec<f64>> = raw.iter().map(|&(a, b, _)| vec![a, b]).collect();
            let weights: Vec<f64> = raw.iter().map(|&(_, _, w)| f64::from(w)).collect();
            if let Ok(fit) = weighted_kmeans(&points, &weights, k, seed, &KMeansOptions::default()) {
                for w in fit.inertia_history.windows(2) {
                    prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
                }
                let recomputed: f64 = points
                    .iter()
                    .zip(&weights)
                    .map(|(p, w)| w * nearest(p, &fit.centroids).1)
                    .sum();
                prop_assert!((recomputed - fit.inertia).abs() <= 1e-9 * (1.0 + fit.inertia));
            }
        }
    }
}
