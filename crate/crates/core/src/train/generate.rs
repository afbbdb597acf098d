//! Synthetic datasets.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

pub const COCIRCLES_N: usize = 2000;
pub const COCIRCLES_FACTOR: f64 = 0.5;
pub const COCIRCLES_NOISE: f64 = 0.1;

/// Column of the balanced-default generator whose effect on risk is increasing.
pub const INCREASING_RISK_FEATURE: usize = 0;
/// Column whose effect on risk is decreasing.
pub const DECREASING_RISK_FEATURE: usize = 1;
/// Observation index within a synthetic account.
pub const HORIZON_FEATURE: usize = 2;

/// Two concentric circles: the first `n/2` rows lie on the unit circle
/// (label 0), the rest on the circle of radius `factor` (label 1), each
/// with isotropic Gaussian noise of standard deviation `noise_sd`.
pub fn gen_cocircles(n: usize, noise_sd: f64, factor: f64, seed: u64) -> Result<(Array2<f64>, Vec<u8>)> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::Input(format!("n must be positive and even, got {n}")));
    }
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::Input(format!("factor must lie in (0, 1), got {factor}")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::Input(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    let noise = Normal::new(0.0, noise_sd).expect("validated standard deviation");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut y = vec![0u8; n];
    for i in 0..n {
        let inner = i >= n / 2;
        let radius = if inner { factor } else { 1.0 };
        let angle = rng.random_range(0.0..TAU);
        x[[i, 0]] = radius * angle.cos() + noise.sample(&mut rng);
        x[[i, 1]] = radius * angle.sin() + noise.sample(&mut rng);
        y[i] = u8::from(inner);
    }
    Ok((x, y))
}

pub fn balanced_default_feature_names(d: usize) -> Vec<String> {
    (0..d)
        .map(|j| match j {
            INCREASING_RISK_FEATURE => "ltv".to_string(),
            DECREASING_RISK_FEATURE => "fico".to_string(),
            HORIZON_FEATURE => "horizon".to_string(),
            _ => format!("aux{}", j - 2),
        })
        .collect()
}

/// Synthetic panel of credit accounts with exact class balance.
///
/// Each account id contributes 2–4 rows. Column 0 raises default risk and
/// column 1 lowers it (both monotone, with a kink), column 2 is the
/// observation index within the account, further columns are nuisance
/// variables (column 3 correlated with column 1). Labels: the `n/2` rows
/// with the highest noisy risk score are defaults.
pub fn gen_balanced_default(n: usize, d: usize, seed: u64) -> Result<(Array2<f64>, Vec<u8>, Vec<String>)> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::Input(format!("n must be even and at least 4, got {n}")));
    }
    if d < 3 {
        return Err(Error::Input(format!("d must be at least 3, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let size = rng.random_range(2..=4).min(remaining);
        sizes.push(size);
        remaining -= size;
    }
    if *sizes.last().expect("n > 0") < 2 {
        let last = sizes.pop().expect("n > 0");
        *sizes.last_mut().expect("at least two groups") += last;
    }

    let mut x = Array2::zeros((n, d));
    let mut group_ids = Vec::with_capacity(n);
    let mut score = Vec::with_capacity(n);
    let mut row = 0;
    for (g, &size) in sizes.iter().enumerate() {
        let ltv0: f64 = rng.sample(StandardNormal);
        let fico0: f64 = rng.sample(StandardNormal);
        for obs in 0..size {
            let ltv = ltv0 + 0.3 * rng.sample::<f64, _>(StandardNormal);
            let fico = fico0 + 0.2 * rng.sample::<f64, _>(StandardNormal);
            let horizon = (obs + 1) as f64;
            x[[row, INCREASING_RISK_FEATURE]] = ltv;
            x[[row, DECREASING_RISK_FEATURE]] = fico;
            x[[row, HORIZON_FEATURE]] = horizon;
            for j in 3..d {
                let noise: f64 = rng.sample(StandardNormal);
                x[[row, j]] = if j == 3 { 0.6 * fico + 0.8 * noise } else { noise };
            }
            let latent = 1.2 * ltv + 0.8 * (ltv - 0.5).max(0.0) - 1.2 * fico - 0.8 * (-fico - 0.5).max(0.0)
                + 0.1 * (horizon - 2.0);
            let u: f64 = rng.random_range(1e-12..1.0 - 1e-12);
            score.push(latent + (u / (1.0 - u)).ln());
            group_ids.push(format!("acct{g:06}"));
            row += 1;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let mut y = vec![0u8; n];
    for &i in &order[..n / 2] {
        y[i] = 1;
    }
    Ok((x, y, group_ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnose::auc;
    use std::collections::HashMap;

    #[test]
    fn noiseless_inner_circle_has_exact_radius() {
        let (x, y) = gen_cocircles(200, 0.0, 0.3, 1).unwrap();
        for (row, &label) in x.outer_iter().zip(&y) {
            let r = row[0].hypot(row[1]);
            let expected = if label == 1 { 0.3 } else { 1.0 };
            assert!((r - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn cocircles_balance_and_errors() {
        let (_, y) = gen_cocircles(100, 0.1, 0.5, 2).unwrap();
        assert_eq!(y.iter().filter(|&&l| l == 1).count(), 50);
        assert!(gen_cocircles(101, 0.1, 0.5, 2).is_err());
        assert!(gen_cocircles(100, 0.1, 1.0, 2).is_err());
        assert!(gen_cocircles(100, -0.1, 0.5, 2).is_err());
    }

    #[test]
    fn radial_threshold_oracle_separates_defaults() {
        let (x, y) = gen_cocircles(COCIRCLES_N, COCIRCLES_NOISE, COCIRCLES_FACTOR, 3).unwrap();
        let cut = (1.0 + COCIRCLES_FACTOR) / 2.0;
        let scores: Vec<f64> = x.outer_iter().map(|r| cut - r[0].hypot(r[1])).collect();
        assert!(auc(&scores, &y).unwrap() >= 0.95);
    }

    #[test]
    fn cocircles_deterministic() {
        assert_eq!(gen_cocircles(50, 0.1, 0.5, 4).unwrap(), gen_cocircles(50, 0.1, 0.5, 4).unwrap());
    }

    fn average_ranks(v: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &order[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let (ra, rb) = (average_ranks(a), average_ranks(b));
        let n = a.len() as f64;
        let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
        let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn balanced_default_contract() {
        let (x, y, groups) = gen_balanced_default(2000, 6, 5).unwrap();
        assert_eq!(x.dim(), (2000, 6));
        assert_eq!(y.iter().filter(|&&l| l == 1).count(), 1000);
        let mut sizes: HashMap<&str, usize> = HashMap::new();
        for g in &groups {
            *sizes.entry(g.as_str()).or_default() += 1;
        }
        assert!(sizes.values().all(|&s| s >= 2));

        let labels: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let dec: Vec<f64> = x.column(DECREASING_RISK_FEATURE).to_vec();
        let inc: Vec<f64> = x.column(INCREASING_RISK_FEATURE).to_vec();
        assert!(spearman(&dec, &labels) < 0.0);
        assert!(spearman(&inc, &labels) > 0.0);
    }

    #[test]
    fn balanced_default_odd_sizes() {
        for n in [4, 6, 10, 102] {
            let (_, y, groups) = gen_balanced_default(n, 3, n as u64).unwrap();
            assert_eq!(y.len(), n);
            let mut sizes: HashMap<&str, usize> = HashMap::new();
            for g in &groups {
                *sizes.entry(g.as_str()).or_default() += 1;
            }
            assert!(sizes.values().all(|&s| s >= 2), "n={n}");
        }
        assert!(gen_balanced_default(7, 3, 0).is_err());
        assert!(gen_balanced_default(8, 2, 0).is_err());
    }
}
