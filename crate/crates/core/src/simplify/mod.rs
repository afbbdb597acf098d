//! Model simplification: merge regions into a few refitted logistic models,
//! then optionally flatten those into a single-hidden-layer network.

pub mod kmeans;
pub mod logistic;

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::check_labels;
use crate::diagnose::Standardizer;
use crate::error::{Error, Result};
use crate::network::{relu, ActivationPattern, AffineMap, DenseLayer, NetworkSpec};
use crate::unwrap::{summarize_segments, RegionSet, RegionSummaryRow};

pub use kmeans::{weighted_kmeans, KMeansFit, KMeansOptions};
pub use logistic::{fit_logistic, refit_local, LogisticFit, RefitOptions};

pub const DEFAULT_C: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedCluster {
    pub refit: AffineMap,
    pub members: Vec<ActivationPattern>,
    /// Cluster centre in standardized coefficient space (`d + 1` entries).
    pub centroid: Vec<f64>,
    pub count: usize,
    /// Rows of the fitting dataset covered by this cluster. Not serialized.
    #[serde(skip)]
    pub sample_indices: Vec<usize>,
}

/// K refitted local linear models plus the pattern → cluster lookup.
/// Clusters are numbered by sample count, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedModel {
    pub net_fingerprint: String,
    pub k: usize,
    pub c: f64,
    pub seed: u64,
    /// Feature means and standard deviations of the fitting data.
    pub feature_scale: Standardizer,
    pub clusters: Vec<MergedCluster>,
    pub lookup: BTreeMap<ActivationPattern, usize>,
}

/// Clustering coordinates of a local linear model: coefficients rescaled
/// to unit feature spread (`w_j * std_j`, intercept at the feature means),
/// then normalized to unit length so that models differing only by a
/// positive factor, and hence sharing a decision boundary, coincide.
fn standardize(affine: &AffineMap, scale: &Standardizer) -> Vec<f64> {
    let mut v: Vec<f64> = affine.w.iter().zip(&scale.std).map(|(w, s)| w * s).collect();
    v.push(affine.b + affine.w.iter().zip(&scale.mean).map(|(w, m)| w * m).sum::<f64>());
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
    v
}

/// Cluster regions on their standardized `(w, b)` vectors (see
/// [`standardize`]) with
/// count-weighted k-means, pool each cluster's samples and refit one
/// penalized logistic regression per cluster.
pub fn merge_regions(
    regions: &RegionSet,
    x: &Array2<f64>,
    y: &[u8],
    k: usize,
    c: f64,
    seed: u64,
) -> Result<MergedModel> {
    if regions.is_empty() {
        return Err(Error::Input("region set is empty".into()));
    }
    if k == 0 || k > regions.len() {
        return Err(Error::Infeasible(format!(
            "K={k} but the region set has {} regions",
            regions.len()
        )));
    }
    regions.check_data(x)?;
    if y.len() != x.nrows() {
        return Err(Error::Dimension {
            context: "merge labels",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    check_labels(y)?;

    let scale = Standardizer::fit(x);
    let points: Vec<Vec<f64>> = regions
        .regions()
        .iter()
        .map(|r| standardize(&r.affine, &scale))
        .collect();
    let weights: Vec<f64> = regions.regions().iter().map(|r| r.count as f64).collect();
    let fit = weighted_kmeans(&points, &weights, k, seed, &KMeansOptions::default())?;

    // Renumber clusters by pooled sample count, ties by first member region.
    let mut pooled: Vec<(usize, usize)> = (0..k)
        .map(|cl| {
            let count = regions
                .regions()
                .iter()
                .zip(&fit.assignment)
                .filter(|(_, &a)| a == cl)
                .map(|(r, _)| r.count)
                .sum();
            let first = fit.assignment.iter().position(|&a| a == cl).unwrap_or(usize::MAX);
            (count, first)
        })
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| pooled[b].0.cmp(&pooled[a].0).then(pooled[a].1.cmp(&pooled[b].1)));
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    pooled.clear();

    let mut members: Vec<Vec<ActivationPattern>> = vec![Vec::new(); k];
    let mut samples: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut lookup = BTreeMap::new();
    for (region, &old) in regions.regions().iter().zip(&fit.assignment) {
        let id = relabel[old];
        members[id].push(region.pattern.clone());
        samples[id].extend_from_slice(&region.sample_indices);
        lookup.insert(region.pattern.clone(), id);
    }
    for s in &mut samples {
        s.sort_unstable();
    }

    let refits: Vec<AffineMap> = samples
        .par_iter()
        .map(|idx| {
            let xs = x.select(Axis(0), idx);
            let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
            refit_local(xs.view(), &ys, c)
        })
        .collect::<Result<_>>()?;

    let clusters = order
        .iter()
        .enumerate()
        .map(|(new, &old)| MergedCluster {
            refit: refits[new].clone(),
            members: std::mem::take(&mut members[new]),
            centroid: fit.centroids[old].clone(),
            count: samples[new].len(),
            sample_indices: std::mem::take(&mut samples[new]),
        })
        .collect();

    Ok(MergedModel {
        net_fingerprint: regions.net_fingerprint().to_owned(),
        k,
        c,
        seed,
        feature_scale: scale,
        clusters,
        lookup,
    })
}

impl MergedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("merged model serializes")
    }

    pub fn from_json(text: &str) -> Result<MergedModel> {
        let model: MergedModel = serde_json::from_str(text)?;
        if model.clusters.len() != model.k || model.k == 0 {
            return Err(Error::Document(format!(
                "k={} but {} clusters",
                model.k,
                model.clusters.len()
            )));
        }
        if let Some((p, &id)) = model.lookup.iter().find(|(_, &id)| id >= model.k) {
            return Err(Error::Document(format!("pattern {p} maps to cluster {id}")));
        }
        let d = model.feature_scale.dim();
        if model.feature_scale.std.len() != d
            || model
                .clusters
                .iter()
                .any(|c| c.refit.dim() != d || c.centroid.len() != d + 1)
        {
            return Err(Error::Document(format!(
                "clusters disagree with the {d}-feature scale"
            )));
        }
        Ok(model)
    }

    fn check_fingerprint(&self, net: &NetworkSpec) -> Result<()> {
        let found = net.fingerprint();
        if found != self.net_fingerprint {
            return Err(Error::StaleIndex {
                expected: self.net_fingerprint.clone(),
                found,
            });
        }
        Ok(())
    }

    /// Cluster of an input: lookup by pattern, otherwise the centroid
    /// nearest to the standardized exact affine map of the new pattern.
    pub fn cluster_of(&self, net: &NetworkSpec, x: ArrayView1<'_, f64>) -> Result<usize> {
        self.check_fingerprint(net)?;
        let pattern = net.forward(x)?.pattern;
        if let Some(&id) = self.lookup.get(&pattern) {
            return Ok(id);
        }
        let affine = net.affine_for_pattern(&pattern)?;
        let point = standardize(&affine, &self.feature_scale);
        let centroids: Vec<Vec<f64>> = self.clusters.iter().map(|c| c.centroid.clone()).collect();
        Ok(kmeans::nearest(&point, &centroids).0)
    }

    pub fn predict(&self, net: &NetworkSpec, x: ArrayView1<'_, f64>) -> Result<(f64, usize)> {
        let id = self.cluster_of(net, x)?;
        Ok((self.clusters[id].refit.eval(x), id))
    }

    /// Logits and cluster ids for every row.
    pub fn predict_all(&self, net: &NetworkSpec, x: &Array2<f64>) -> Result<(Vec<f64>, Vec<usize>)> {
        self.check_fingerprint(net)?;
        let pairs: Vec<(f64, usize)> = x
            .axis_iter(Axis(0))
            .into_par_iter()
            .map(|row| self.predict(net, row))
            .collect::<Result<_>>()?;
        Ok(pairs.into_iter().unzip())
    }
}

/// Score `x` with the merged model.
pub fn predict_merged(merged: &MergedModel, net: &NetworkSpec, x: ArrayView1<'_, f64>) -> Result<(f64, usize)> {
    merged.predict(net, x)
}

/// Summary rows (count, response mean/std, local and global AUC) for the
/// merged clusters on any dataset, routing rows through `net`.
pub fn merged_table(
    merged: &MergedModel,
    net: &NetworkSpec,
    x: &Array2<f64>,
    y: &[u8],
) -> Result<Vec<RegionSummaryRow>> {
    let (_, ids) = merged.predict_all(net, x)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); merged.k];
    for (i, id) in ids.into_iter().enumerate() {
        members[id].push(i);
    }
    summarize_segments(
        merged
            .clusters
            .iter()
            .zip(&members)
            .enumerate()
            .filter(|(_, (_, m))| !m.is_empty())
            .map(|(id, (c, m))| (id, &c.refit, m.as_slice())),
        x,
        y,
    )
}

/// Single-hidden-layer network: hidden unit `k` is cluster `k`'s refit
/// affine map behind a ReLU, output weights retrained.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatNet(NetworkSpec);

impl FlatNet {
    pub fn network(&self) -> &NetworkSpec {
        &self.0
    }

    pub fn into_network(self) -> NetworkSpec {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.layers()[0].out_dim()
    }
}

/// Count-weighted mean silhouette of the region clustering for each K in
/// `ks` that the region count allows. Guidance for choosing K only.
pub fn silhouette_scan(regions: &RegionSet, x: &Array2<f64>, ks: RangeInclusive<usize>, seed: u64) -> Result<Vec<(usize, f64)>> {
    if regions.is_empty() {
        return Err(Error::Input("region set is empty".into()));
    }
    regions.check_data(x)?;
    let scale = Standardizer::fit(x);
    let points: Vec<Vec<f64>> = regions.regions().iter().map(|r| standardize(&r.affine, &scale)).collect();
    let weights: Vec<f64> = regions.regions().iter().map(|r| r.count as f64).collect();
    let dist: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|q| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for k in ks.filter(|&k| k >= 2 && k < points.len()) {
        let fit = weighted_kmeans(&points, &weights, k, seed, &KMeansOptions::default())?;
        let mut total = 0.0;
        for i in 0..points.len() {
            let mut sum = vec![0.0; k];
            let mut mass = vec![0.0; k];
            for j in (0..points.len()).filter(|&j| j != i) {
                sum[fit.assignment[j]] += weights[j] * dist[i][j];
                mass[fit.assignment[j]] += weights[j];
            }
            let own = fit.assignment[i];
            if mass[own] == 0.0 {
                continue;
            }
            let a = sum[own] / mass[own];
            let b = (0..k)
                .filter(|&c| c != own && mass[c] > 0.0)
                .map(|c| sum[c] / mass[c])
                .fold(f64::INFINITY, f64::min);
            let spread = a.max(b);
            if spread > 0.0 {
                total += weights[i] * (b - a) / spread;
            }
        }
        out.push((k, total / weights.iter().sum::<f64>()));
    }
    Ok(out)
}

/// Flatten with output-layer regularization `c`; hidden weights are frozen.
pub fn flatten(merged: &MergedModel, x: &Array2<f64>, y: &[u8], c: f64) -> Result<FlatNet> {
    if merged.clusters.is_empty() {
        return Err(Error::Input("merged model has no clusters".into()));
    }
    let d = merged.clusters[0].refit.dim();
    if x.ncols() != d {
        return Err(Error::Dimension {
            context: "flatten data",
            expected: d,
            got: x.ncols(),
        });
    }
    let k = merged.clusters.len();
    let mut weights = Array2::zeros((k, d));
    let mut bias = Array1::zeros(k);
    for (i, cluster) in merged.clusters.iter().enumerate() {
        weights.row_mut(i).assign(&ArrayView1::from(&cluster.refit.w));
        bias[i] = cluster.refit.b;
    }
    let hidden = DenseLayer::new(weights, bias);
    let mut features = x.dot(&hidden.weights.t()) + &hidden.bias;
    features.mapv_inplace(relu);
    let output = refit_local(features.view(), y, c)?;
    let out_layer = DenseLayer::new(
        Array2::from_shape_vec((1, k), output.w).expect("1 × k output"),
        Array1::from(vec![output.b]),
    );
    NetworkSpec::new(d, vec![hidden, out_layer]).map(FlatNet)
}
