//! Diagnostics on unwrapped regions: ranking metrics, the coefficient
//! matrix behind parallel-coordinate plots, feature importance and
//! per-region profiles.

pub mod metrics;
pub mod svg;

use std::io::Write;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unwrap::{NontrivialRule, RegionSet};

pub use metrics::{accuracy, auc, auc_if_defined};

/// Per-feature location and scale (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Standardizer {
        let n = x.nrows() as f64;
        let mean: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.sum() / n).collect();
        let std = x
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        Standardizer { mean, std }
    }

    pub fn identity(dim: usize) -> Standardizer {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// One row per region: standardized coefficients `w_j * std_j` followed by
/// the intercept evaluated at the feature means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMatrix {
    pub rows: Vec<Vec<f64>>,
    /// Features with zero spread; their coefficients are emitted as 0.
    pub zero_std_features: Vec<usize>,
}

pub fn coefficient_matrix(
    regions: &RegionSet,
    standardizer: Option<&Standardizer>,
) -> Result<CoefficientMatrix> {
    let dim = regions.regions()[0].affine.dim();
    let identity;
    let st = match standardizer {
        Some(s) => s,
        None => {
            identity = Standardizer::identity(dim);
            &identity
        }
    };
    if st.dim() != dim {
        return Err(Error::Dimension {
            context: "standardizer",
            expected: dim,
            got: st.dim(),
        });
    }
    let zero_std_features: Vec<usize> = (0..dim).filter(|&j| st.std[j] == 0.0).collect();
    let rows = regions
        .regions()
        .iter()
        .map(|r| {
            let mut row: Vec<f64> = r
                .affine
                .w
                .iter()
                .zip(&st.std)
                .map(|(w, s)| if *s == 0.0 { 0.0 } else { w * s })
                .collect();
            let at_means = r.affine.b + r.affine.w.iter().zip(&st.mean).map(|(w, m)| w * m).sum::<f64>();
            row.push(at_means);
            row
        })
        .collect();
    Ok(CoefficientMatrix {
        rows,
        zero_std_features,
    })
}

pub fn write_coefficient_csv<W: Write>(
    matrix: &CoefficientMatrix,
    feature_names: &[String],
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["region_id".to_string()];
    header.extend(feature_names.iter().cloned());
    header.push("intercept".into());
    wtr.write_record(&header)?;
    for (r, row) in matrix.rows.iter().enumerate() {
        let mut rec = vec![r.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Feature importance as the count-weighted mean absolute standardized
/// coefficient, normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub scores: Vec<f64>,
    /// 1 = most important. Ties go to the lower feature index.
    pub ranks: Vec<usize>,
    /// `coefficients[r][j]`: standardized coefficient of feature `j` in region `r`.
    pub coefficients: Vec<Vec<f64>>,
    pub region_counts: Vec<usize>,
}

impl ImportanceReport {
    /// Feature indices from most to least important.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (j, &r) in self.ranks.iter().enumerate() {
            order[r - 1] = j;
        }
        order
    }
}

pub fn feature_importance(regions: &RegionSet, x: &Array2<f64>) -> Result<ImportanceReport> {
    regions.check_data(x)?;
    let st = Standardizer::fit(x);
    let n = regions.n_samples() as f64;
    let dim = st.dim();
    let coefficients: Vec<Vec<f64>> = regions
        .regions()
        .iter()
        .map(|r| r.affine.w.iter().zip(&st.std).map(|(w, s)| w * s).collect())
        .collect();
    let mut raw = vec![0.0; dim];
    for (r, coefs) in regions.regions().iter().zip(&coefficients) {
        let weight = r.count as f64 / n;
        for (acc, c) in raw.iter_mut().zip(coefs) {
            *acc += weight * c.abs();
        }
    }
    let total: f64 = raw.iter().sum();
    let scores: Vec<f64> = if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        raw
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; dim];
    for (pos, &j) in order.iter().enumerate() {
        ranks[j] = pos + 1;
    }
    Ok(ImportanceReport {
        scores,
        ranks,
        coefficients,
        region_counts: regions.regions().iter().map(|r| r.count).collect(),
    })
}

pub fn write_importance_csv<W: Write>(
    report: &ImportanceReport,
    feature_names: &[String],
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["feature", "importance", "rank"])?;
    for j in report.order() {
        wtr.write_record([
            feature_names[j].clone(),
            report.scores[j].to_string(),
            report.ranks[j].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// A region's linear effect of one feature, with the other features held
/// at the region's means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSegment {
    pub region_id: usize,
    pub feature: usize,
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
    pub intercept: f64,
    pub weight: usize,
}

impl ProfileSegment {
    pub fn eval(&self, value: f64) -> f64 {
        self.slope * value + self.intercept
    }
}

/// One segment per region with at least the rule's count threshold of
/// samples; the class-mix part of the rule is not used here.
pub fn profile(
    regions: &RegionSet,
    x: &Array2<f64>,
    feature: usize,
    rule: &NontrivialRule,
) -> Result<Vec<ProfileSegment>> {
    regions.check_data(x)?;
    if feature >= x.ncols() {
        return Err(Error::Dimension {
            context: "profile feature",
            expected: x.ncols(),
            got: feature,
        });
    }
    let threshold = rule.count_threshold(regions.n_samples());
    Ok(regions
        .regions()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.count >= threshold)
        .map(|(region_id, r)| {
            let rows = x.select(Axis(0), &r.sample_indices);
            let means = rows.mean_axis(Axis(0)).expect("region is nonempty");
            let column = rows.column(feature);
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let others: f64 = (0..x.ncols())
                .filter(|&k| k != feature)
                .map(|k| r.affine.w[k] * means[k])
                .sum();
            ProfileSegment {
                region_id,
                feature,
                lo,
                hi,
                slope: r.affine.w[feature],
                intercept: r.affine.b + others,
                weight: r.count,
            }
        })
        .collect())
}

pub fn write_profile_csv<W: Write>(segments: &[ProfileSegment], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["region_id", "feature", "lo", "hi", "slope", "intercept", "weight"])?;
    for s in segments {
        wtr.write_record([
            s.region_id.to_string(),
            s.feature.to_string(),
            s.lo.to_string(),
            s.hi.to_string(),
            s.slope.to_string(),
            s.intercept.to_string(),
            s.weight.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DenseLayer, NetworkSpec};
    use crate::test_support::{identity_net, random_net};
    use crate::unwrap::unwrap;
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A net whose only hidden unit is always active on positive inputs,
    /// so it is the single linear map `w·x + b` there.
    fn linear_net(w: &[f64], b: f64) -> NetworkSpec {
        let d = w.len();
        let hidden = DenseLayer::new(
            Array2::from_shape_vec((1, d), w.to_vec()).unwrap(),
            array![b],
        );
        NetworkSpec::new(d, vec![hidden, DenseLayer::new(array![[1.0]], array![0.0])]).unwrap()
    }

    #[test]
    fn identity_net_coefficient_rows() {
        let set = unwrap(&identity_net(), &array![[2.0], [-3.0], [5.0]]).unwrap();
        let m = coefficient_matrix(&set, None).unwrap();
        assert_eq!(m.rows, vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn single_region_rows_are_scaled_weights() {
        let net = linear_net(&[3.0, 1.0], 10.0);
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 0.0]];
        let set = unwrap(&net, &x).unwrap();
        assert_eq!(set.len(), 1);
        let st = Standardizer::fit(&x);
        let m = coefficient_matrix(&set, Some(&st)).unwrap();
        assert_eq!(m.rows.len(), 1);
        assert!((m.rows[0][0] - 3.0 * st.std[0]).abs() < 1e-12);
        assert!((m.rows[0][1] - st.std[1]).abs() < 1e-12);
        assert!((m.rows[0][2] - (10.0 + 3.0 * st.mean[0] + st.mean[1])).abs() < 1e-12);
    }

    #[test]
    fn zero_std_feature_is_flagged() {
        let net = linear_net(&[3.0, 1.0], 10.0);
        let x = array![[1.0, 2.0], [3.0, 2.0]];
        let set = unwrap(&net, &x).unwrap();
        let m = coefficient_matrix(&set, Some(&Standardizer::fit(&x))).unwrap();
        assert_eq!(m.zero_std_features, vec![1]);
        assert_eq!(m.rows[0][1], 0.0);
    }

    #[test]
    fn importance_single_region_formula() {
        let net = linear_net(&[3.0, 1.0], 10.0);
        let x = array![[1.0, 1.0], [3.0, 3.0], [2.0, 2.0]];
        let set = unwrap(&net, &x).unwrap();
        let report = feature_importance(&set, &x).unwrap();
        assert!((report.scores[0] - 0.75).abs() < 1e-12);
        assert!((report.scores[1] - 0.25).abs() < 1e-12);
        assert_eq!(report.ranks, vec![1, 2]);
        assert_eq!(report.order(), vec![0, 1]);
    }

    #[test]
    fn constant_feature_has_no_importance() {
        let net = linear_net(&[3.0, 1.0], 10.0);
        let x = array![[1.0, 5.0], [3.0, 5.0], [2.0, 5.0]];
        let set = unwrap(&net, &x).unwrap();
        let report = feature_importance(&set, &x).unwrap();
        assert_eq!(report.scores[1], 0.0);
        assert!((report.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn importance_invariant_to_feature_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = random_net(&mut rng, &[3, 6, 4, 1]);
        let x = Array2::from_shape_fn((400, 3), |_| rng.random_range(-1.0..1.0));
        let base = feature_importance(&unwrap(&net, &x).unwrap(), &x).unwrap();

        let scale = 7.5;
        let mut layers = net.into_layers();
        layers[0].weights.column_mut(1).mapv_inplace(|w| w / scale);
        let rescaled_net = NetworkSpec::new(3, layers).unwrap();
        let mut x2 = x.clone();
        x2.column_mut(1).mapv_inplace(|v| v * scale);
        let other = feature_importance(&unwrap(&rescaled_net, &x2).unwrap(), &x2).unwrap();
        for (a, b) in base.scores.iter().zip(&other.scores) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_single_region_full_range() {
        let net = linear_net(&[-2.0, 0.0], 20.0);
        let x = Array2::from_shape_fn((50, 2), |(i, j)| (i * (j + 1)) as f64 / 10.0);
        let set = unwrap(&net, &x).unwrap();
        let segs = profile(&set, &x, 0, &NontrivialRule::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].slope, -2.0);
        assert_eq!((segs[0].lo, segs[0].hi), (0.0, 4.9));
        let flat = profile(&set, &x, 1, &NontrivialRule::default()).unwrap();
        assert_eq!(flat[0].slope, 0.0);
    }

    #[test]
    fn profile_decomposition_reproduces_llm() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let net = random_net(&mut rng, &[3, 5, 1]);
        let x = Array2::from_shape_fn((600, 3), |_| rng.random_range(-1.0..1.0));
        let set = unwrap(&net, &x).unwrap();
        let rule = NontrivialRule {
            min_count: 1,
            min_fraction: 0.0,
            require_both_classes: false,
        };
        for j in 0..3 {
            for seg in profile(&set, &x, j, &rule).unwrap() {
                let region = &set.regions()[seg.region_id];
                let rows = x.select(Axis(0), &region.sample_indices);
                let means: Array1<f64> = rows.mean_axis(Axis(0)).unwrap();
                assert!(seg.lo <= seg.hi);
                for row in rows.outer_iter() {
                    let rest: f64 = (0..3)
                        .filter(|&k| k != j)
                        .map(|k| region.affine.w[k] * (row[k] - means[k]))
                        .sum();
                    let total = seg.eval(row[j]) + rest;
                    assert!((total - net.logit(row).unwrap()).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn profile_feature_out_of_range() {
        let set = unwrap(&identity_net(), &array![[1.0]]).unwrap();
        assert!(profile(&set, &array![[1.0]], 1, &NontrivialRule::default()).is_err());
    }
}
