//! Exact local linear interpretation of ReLU feed-forward networks.
//!
//! A ReLU network with a linear logit output is piecewise affine: every
//! activation pattern of its hidden neurons selects one affine map. This
//! crate evaluates such networks, groups a dataset by activation pattern
//! into regions carrying their exact local linear model (LLM), computes
//! diagnostics on those LLMs, and simplifies the network by merging regions
//! into a few refitted logistic models or flattening them into a
//! single-hidden-layer network.
//!
//! Module map:
//!
//! - [`network`]: network representation, forward pass, pattern-to-affine composition, JSON documents.
//! - [`unwrap`]: partition a dataset into regions and summarize them.
//! - [`diagnose`]: AUC / accuracy, coefficient matrices, feature importance, profiles, SVG.
//! - [`simplify`]: penalized logistic refits, weighted k-means, merging and flattening.
//! - [`train`]: mini-batch training with an l1 proximal step, synthetic generators, grouped splits.
//! - [`data`]: dataset CSV reading and writing.

pub mod data;
pub mod diagnose;
pub mod error;
pub mod network;
pub mod simplify;
pub mod train;
pub mod unwrap;

pub use data::Dataset;
pub use diagnose::{accuracy, auc, ImportanceReport, ProfileSegment, Standardizer};
pub use error::{Error, ErrorKind, Result};
pub use network::{ActivationPattern, AffineMap, DenseLayer, NetworkSpec};
pub use simplify::{flatten, merge_regions, refit_local, silhouette_scan, FlatNet, MergedModel};
pub use train::{train, SweepRow, TrainConfig};
pub use unwrap::{
    assign_region, region_table, unwrap, Assignment, LocalLinearModel, NontrivialRule, RegionSet,
    RegionSummaryRow,
};
