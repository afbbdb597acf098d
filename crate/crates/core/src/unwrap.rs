//! Data-supported activation regions and their local linear models.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::check_labels;
use crate::diagnose::metrics::{auc, auc_if_defined};
use crate::error::{Error, Result};
use crate::network::{ActivationPattern, AffineMap, NetworkSpec};

/// One region: the samples sharing an activation pattern and the exact
/// affine map the network computes on them.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinearModel {
    pub pattern: ActivationPattern,
    pub affine: AffineMap,
    pub count: usize,
    pub sample_indices: Vec<usize>,
}

/// Partition of a dataset by activation pattern. Regions are ordered by
/// count descending, then pattern ascending.
#[derive(Debug, Clone)]
pub struct RegionSet {
    net_fingerprint: String,
    n_samples: usize,
    split: Option<String>,
    regions: Vec<LocalLinearModel>,
    index: HashMap<ActivationPattern, usize>,
}

impl PartialEq for RegionSet {
    fn eq(&self, other: &Self) -> bool {
        self.net_fingerprint == other.net_fingerprint
            && self.n_samples == other.n_samples
            && self.split == other.split
            && self.regions == other.regions
    }
}

/// Result of routing a new input through a region set.
#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    Region(usize),
    Unseen(ActivationPattern),
}

/// When a region counts as a non-trivial LLM: at least
/// `max(min_count, ceil(min_fraction * n))` samples and, optionally, both
/// classes present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NontrivialRule {
    pub min_count: usize,
    pub min_fraction: f64,
    pub require_both_classes: bool,
}

impl Default for NontrivialRule {
    fn default() -> Self {
        NontrivialRule {
            min_count: 5,
            min_fraction: 0.005,
            require_both_classes: true,
        }
    }
}

impl NontrivialRule {
    pub fn count_threshold(&self, n_samples: usize) -> usize {
        let frac = (self.min_fraction * n_samples as f64).ceil() as usize;
        self.min_count.max(frac)
    }

    pub fn is_nontrivial(&self, region: &LocalLinearModel, y: &[u8], n_samples: usize) -> bool {
        if region.count < self.count_threshold(n_samples) {
            return false;
        }
        if !self.require_both_classes {
            return true;
        }
        let pos = region.sample_indices.iter().filter(|&&i| y[i] == 1).count();
        pos > 0 && pos < region.count
    }
}

/// Group the rows of `x` by activation pattern and attach exact LLMs.
pub fn unwrap(net: &NetworkSpec, x: &Array2<f64>) -> Result<RegionSet> {
    if x.ncols() != net.input_dim() {
        return Err(Error::Dimension {
            context: "unwrap data",
            expected: net.input_dim(),
            got: x.ncols(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::Input("cannot unwrap an empty dataset".into()));
    }
    let patterns: Vec<ActivationPattern> = x
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|row| net.forward(row).map(|f| f.pattern))
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<ActivationPattern, Vec<usize>> = BTreeMap::new();
    for (i, p) in patterns.into_iter().enumerate() {
        groups.entry(p).or_default().push(i);
    }
    let regions = groups
        .into_iter()
        .map(|(pattern, sample_indices)| {
            let affine = net.affine_for_pattern(&pattern)?;
            Ok(LocalLinearModel {
                pattern,
                affine,
                count: sample_indices.len(),
                sample_indices,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionSet::from_parts(net.fingerprint(), x.nrows(), regions))
}

impl RegionSet {
    fn from_parts(
        net_fingerprint: String,
        n_samples: usize,
        mut regions: Vec<LocalLinearModel>,
    ) -> RegionSet {
        regions.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.pattern.cmp(&b.pattern)));
        let index = regions
            .iter()
            .enumerate()
            .map(|(i, r)| (r.pattern.clone(), i))
            .collect();
        RegionSet {
            net_fingerprint,
            n_samples,
            split: None,
            regions,
            index,
        }
    }

    /// Label the dataset the regions were computed on (e.g. `train`).
    pub fn with_split(mut self, split: impl Into<String>) -> Self {
        self.split = Some(split.into());
        self
    }

    pub fn split(&self) -> Option<&str> {
        self.split.as_deref()
    }

    pub fn net_fingerprint(&self) -> &str {
        &self.net_fingerprint
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn regions(&self) -> &[LocalLinearModel] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region_of(&self, pattern: &ActivationPattern) -> Option<usize> {
        self.index.get(pattern).copied()
    }

    /// Region id for every sample.
    pub fn sample_regions(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_samples];
        for (r, region) in self.regions.iter().enumerate() {
            for &i in &region.sample_indices {
                out[i] = r;
            }
        }
        out
    }

    pub fn count_nontrivial(&self, y: &[u8], rule: &NontrivialRule) -> Result<usize> {
        self.check_labels(y)?;
        Ok(self
            .regions
            .iter()
            .filter(|r| rule.is_nontrivial(r, y, self.n_samples))
            .count())
    }

    pub(crate) fn check_data(&self, x: &Array2<f64>) -> Result<()> {
        if x.nrows() != self.n_samples {
            return Err(Error::Dimension {
                context: "rows for region set",
                expected: self.n_samples,
                got: x.nrows(),
            });
        }
        let dim = self.regions[0].affine.dim();
        if x.ncols() != dim {
            return Err(Error::Dimension {
                context: "features for region set",
                expected: dim,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    fn check_labels(&self, y: &[u8]) -> Result<()> {
        if y.len() != self.n_samples {
            return Err(Error::Dimension {
                context: "labels for region set",
                expected: self.n_samples,
                got: y.len(),
            });
        }
        check_labels(y)
    }

    pub(crate) fn check_fingerprint(&self, net: &NetworkSpec) -> Result<()> {
        let found = net.fingerprint();
        if found != self.net_fingerprint {
            return Err(Error::StaleIndex {
                expected: self.net_fingerprint.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn to_document(&self, include_indices: bool) -> RegionSetDocument {
        RegionSetDocument {
            fingerprint: self.net_fingerprint.clone(),
            n_samples: self.n_samples,
            split: self.split.clone(),
            regions: self
                .regions
                .iter()
                .map(|r| RegionDocument {
                    pattern: r.pattern.clone(),
                    w: r.affine.w.clone(),
                    b: r.affine.b,
                    count: r.count,
                    sample_indices: include_indices.then(|| r.sample_indices.clone()),
                })
                .collect(),
        }
    }

    pub fn to_json(&self, include_indices: bool) -> String {
        serde_json::to_string_pretty(&self.to_document(include_indices))
            .expect("region set document serializes")
    }

    /// Rebuild from a document that carries sample indices, checking the
    /// partition invariants.
    pub fn from_document(doc: RegionSetDocument) -> Result<RegionSet> {
        if doc.regions.is_empty() {
            return Err(Error::Document("region set has no regions".into()));
        }
        let pattern_len = doc.regions[0].pattern.len();
        let dim = doc.regions[0].w.len();
        let mut seen = vec![false; doc.n_samples];
        let mut regions = Vec::with_capacity(doc.regions.len());
        for (r, region) in doc.regions.into_iter().enumerate() {
            if region.pattern.len() != pattern_len || region.w.len() != dim {
                return Err(Error::Document(format!("region {r} has inconsistent shape")));
            }
            let indices = region.sample_indices.ok_or_else(|| {
                Error::Document(format!("region {r} has no sample_indices"))
            })?;
            if indices.len() != region.count {
                return Err(Error::Document(format!(
                    "region {r}: count {} but {} sample indices",
                    region.count,
                    indices.len()
                )));
            }
            for &i in &indices {
                match seen.get_mut(i) {
                    Some(slot) if !*slot => *slot = true,
                    Some(_) => {
                        return Err(Error::Document(format!("sample {i} appears twice")))
                    }
                    None => {
                        return Err(Error::Document(format!(
                            "sample index {i} out of range {}",
                            doc.n_samples
                        )))
                    }
                }
            }
            regions.push(LocalLinearModel {
                pattern: region.pattern,
                affine: AffineMap {
                    w: region.w,
                    b: region.b,
                },
                count: region.count,
                sample_indices: indices,
            });
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Document(format!("sample {i} is in no region")));
        }
        let mut set = RegionSet::from_parts(doc.fingerprint, doc.n_samples, regions);
        set.split = doc.split;
        Ok(set)
    }

    pub fn from_json(text: &str) -> Result<RegionSet> {
        RegionSet::from_document(serde_json::from_str(text)?)
    }
}

/// On-disk region set schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSetDocument {
    pub fingerprint: String,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub regions: Vec<RegionDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDocument {
    pub pattern: ActivationPattern,
    pub w: Vec<f64>,
    pub b: f64,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_indices: Option<Vec<usize>>,
}

/// Route `x` to the region with its activation pattern.
pub fn assign_region(net: &NetworkSpec, regions: &RegionSet, x: ArrayView1<'_, f64>) -> Result<Assignment> {
    regions.check_fingerprint(net)?;
    let pattern = net.forward(x)?.pattern;
    Ok(match regions.region_of(&pattern) {
        Some(id) => Assignment::Region(id),
        None => Assignment::Unseen(pattern),
    })
}

/// One summary line per region or merged segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummaryRow {
    pub region_id: usize,
    pub count: usize,
    pub response_mean: f64,
    /// Population standard deviation of the 0/1 labels.
    pub response_std: f64,
    /// AUC of the segment's affine map on its own samples; `None` for a
    /// single-class segment.
    pub local_auc: Option<f64>,
    /// AUC of the same affine map scored over the whole dataset.
    pub global_auc: f64,
}

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "region_id",
    "count",
    "response_mean",
    "response_std",
    "local_auc",
    "global_auc",
];

/// Summary rows for segments given as (id, affine map, member rows), sorted
/// by count descending. Shared by region and merged-cluster tables.
pub fn summarize_segments<'a, I>(segments: I, x: &Array2<f64>, y: &[u8]) -> Result<Vec<RegionSummaryRow>>
where
    I: IntoIterator<Item = (usize, &'a AffineMap, &'a [usize])>,
{
    check_labels(y)?;
    if y.len() != x.nrows() {
        return Err(Error::Dimension {
            context: "labels",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let segments: Vec<_> = segments.into_iter().collect();
    let mut rows = segments
        .par_iter()
        .map(|&(region_id, affine, members)| {
            let global_scores: Vec<f64> = x.axis_iter(Axis(0)).map(|row| affine.eval(row)).collect();
            let local_scores: Vec<f64> = members.iter().map(|&i| global_scores[i]).collect();
            let local_labels: Vec<u8> = members.iter().map(|&i| y[i]).collect();
            let count = members.len();
            let mean = local_labels.iter().map(|&l| f64::from(l)).sum::<f64>() / count as f64;
            Ok(RegionSummaryRow {
                region_id,
                count,
                response_mean: mean,
                response_std: (mean * (1.0 - mean)).max(0.0).sqrt(),
                local_auc: auc_if_defined(&local_scores, &local_labels)?,
                global_auc: auc(&global_scores, y)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.region_id.cmp(&b.region_id)));
    Ok(rows)
}

/// Count, response mean/std, local and global AUC for every region.
pub fn region_table(regions: &RegionSet, x: &Array2<f64>, y: &[u8]) -> Result<Vec<RegionSummaryRow>> {
    regions.check_data(x)?;
    regions.check_labels(y)?;
    summarize_segments(
        regions
            .regions
            .iter()
            .enumerate()
            .map(|(i, r)| (i, &r.affine, r.sample_indices.as_slice())),
        x,
        y,
    )
}

pub fn write_summary_csv<W: Write>(rows: &[RegionSummaryRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SUMMARY_COLUMNS)?;
    for row in rows {
        wtr.write_record([
            row.region_id.to_string(),
            row.count.to_string(),
            format!("{:.6}", row.response_mean),
            format!("{:.6}", row.response_std),
            row.local_auc.map(|v| format!("{v:.6}")).unwrap_or_default(),
            format!("{:.6}", row.global_auc),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
