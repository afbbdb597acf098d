//! Mini-batch training of ReLU networks with an optional l1 penalty on the
//! weight matrices, plus the l1 sweep and data utilities used to exercise
//! the pipeline without proprietary data.
//!
//! The smooth part of the objective (mean binary cross-entropy on logits)
//! is minimized with Adam; after each step every weight is soft-thresholded
//! by `l1_lambda * learning_rate`, so weights can become exactly zero.
//! Biases are never penalized.

pub mod generate;
pub mod split;

use log::debug;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_labels, Dataset};
use crate::diagnose::auc;
use crate::error::{Error, Result};
use crate::network::{DenseLayer, NetworkSpec};
use crate::unwrap::{unwrap, NontrivialRule};

pub use generate::{gen_balanced_default, gen_cocircles};
pub use split::{group_split, row_split, SplitIndices};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub l1_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![5, 5],
            l1_lambda: 0.0,
            learning_rate: 0.005,
            batch_size: 64,
            max_epochs: 300,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Input(format!(
                "hidden widths must be positive, got {:?}",
                self.hidden
            )));
        }
        if !(self.l1_lambda >= 0.0 && self.l1_lambda.is_finite()) {
            return Err(Error::Input(format!("l1_lambda must be >= 0, got {}", self.l1_lambda)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Input(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Input("batch size and max epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean cross-entropy plus l1 penalty on the full training set.
    pub objective: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub network: NetworkSpec,
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub history: Vec<EpochLog>,
}

struct Checkpoint {
    layers: Vec<DenseLayer>,
    epoch: usize,
    val_auc: f64,
    val_loss: f64,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    crate::network::sigmoid(z)
}

/// Batched forward pass keeping pre-activations for backprop.
struct Trace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    logits: Array1<f64>,
}

fn forward_trace(layers: &[DenseLayer], x: &Array2<f64>) -> Trace {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len() - 1);
    let mut act = x.clone();
    let (output, hidden) = layers.split_last().expect("at least one layer");
    for layer in hidden {
        let z = act.dot(&layer.weights.t()) + &layer.bias;
        let a = z.mapv(|v| if v > 0.0 { v } else { 0.0 });
        inputs.push(act);
        pre.push(z);
        act = a;
    }
    let logits = act.dot(&output.weights.row(0)) + output.bias[0];
    inputs.push(act);
    Trace { inputs, pre, logits }
}

fn mean_cross_entropy(logits: &Array1<f64>, y: &[u8]) -> f64 {
    logits
        .iter()
        .zip(y)
        .map(|(&z, &l)| softplus(z) - f64::from(l) * z)
        .sum::<f64>()
        / y.len() as f64
}

fn l1_penalty(layers: &[DenseLayer]) -> f64 {
    layers.iter().map(|l| l.weights.iter().map(|w| w.abs()).sum::<f64>()).sum()
}

/// Gradient of the mean cross-entropy only.
fn cross_entropy_gradient(layers: &[DenseLayer], x: &Array2<f64>, y: &[u8]) -> (f64, Vec<DenseLayer>) {
    let trace = forward_trace(layers, x);
    let n = y.len() as f64;
    let loss = mean_cross_entropy(&trace.logits, y);
    // dL/dz for the output logits, one column.
    let mut delta: Array2<f64> = Array2::from_shape_fn((y.len(), 1), |(i, _)| {
        (sigmoid(trace.logits[i]) - f64::from(y[i])) / n
    });
    let mut grads: Vec<DenseLayer> = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let gw = delta.t().dot(&trace.inputs[l]);
        let gb = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut back = delta.dot(&layers[l].weights);
            back.zip_mut_with(&trace.pre[l - 1], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = back;
        }
        grads.push(DenseLayer::new(gw, gb));
    }
    grads.reverse();
    (loss, grads)
}

/// Objective `mean BCE + l1 * Σ|W|` and its (sub)gradient, with
/// `sign(0) = 0` for the penalty term.
pub fn loss_and_gradient(net: &NetworkSpec, x: &Array2<f64>, y: &[u8], l1_lambda: f64) -> Result<(f64, Vec<DenseLayer>)> {
    check_xy(net.input_dim(), x, y)?;
    let (loss, mut grads) = cross_entropy_gradient(net.layers(), x, y);
    if l1_lambda > 0.0 {
        for (g, layer) in grads.iter_mut().zip(net.layers()) {
            g.weights.zip_mut_with(&layer.weights, |gw, &w| {
                if w != 0.0 {
                    *gw += l1_lambda * w.signum();
                }
            });
        }
    }
    Ok((loss + l1_lambda * l1_penalty(net.layers()), grads))
}

/// Objective value only.
pub fn objective(net: &NetworkSpec, x: &Array2<f64>, y: &[u8], l1_lambda: f64) -> Result<f64> {
    check_xy(net.input_dim(), x, y)?;
    let trace = forward_trace(net.layers(), x);
    Ok(mean_cross_entropy(&trace.logits, y) + l1_lambda * l1_penalty(net.layers()))
}

fn check_xy(dim: usize, x: &Array2<f64>, y: &[u8]) -> Result<()> {
    if x.ncols() != dim {
        return Err(Error::Dimension {
            context: "training features",
            expected: dim,
            got: x.ncols(),
        });
    }
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            context: "training labels",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    check_labels(y)
}

fn init_layers(input_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Vec<DenseLayer> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(1);
    dims.windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = Array2::from_shape_fn((fan_out, fan_in), |_| std * rng.sample::<f64, _>(StandardNormal));
            let bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound));
            DenseLayer::new(weights, bias)
        })
        .collect()
}

struct Adam {
    m: Vec<DenseLayer>,
    v: Vec<DenseLayer>,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(layers: &[DenseLayer]) -> Adam {
        let zeros: Vec<DenseLayer> = layers.iter().map(|l| DenseLayer::zeros(l.out_dim(), l.in_dim())).collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    fn update(&mut self, layers: &mut [DenseLayer], grads: &[DenseLayer], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let apply = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (((layer, g), m), v) in layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, g), m), v) in layer
                .weights
                .iter_mut()
                .zip(&g.weights)
                .zip(m.weights.iter_mut())
                .zip(v.weights.iter_mut())
            {
                apply(p, *g, m, v);
            }
            for (((p, g), m), v) in layer.bias.iter_mut().zip(&g.bias).zip(m.bias.iter_mut()).zip(v.bias.iter_mut()) {
                apply(p, *g, m, v);
            }
        }
    }
}

fn soft_threshold(layers: &mut [DenseLayer], threshold: f64) {
    for layer in layers {
        layer.weights.mapv_inplace(|w| w.signum() * (w.abs() - threshold).max(0.0));
    }
}

/// Train and return the parameters with the best validation AUC.
pub fn train(config: &TrainConfig, x: &Array2<f64>, y: &[u8], x_val: &Array2<f64>, y_val: &[u8]) -> Result<NetworkSpec> {
    train_with_report(config, x, y, x_val, y_val).map(|r| r.network)
}

pub fn train_with_report(
    config: &TrainConfig,
    x: &Array2<f64>,
    y: &[u8],
    x_val: &Array2<f64>,
    y_val: &[u8],
) -> Result<TrainReport> {
    config.validate()?;
    let d = x.ncols();
    check_xy(d, x, y)?;
    check_xy(d, x_val, y_val)?;
    if !y_val.contains(&0) || !y_val.contains(&1) {
        return Err(Error::SingleClass("validation AUC"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut layers = init_layers(d, &config.hidden, &mut rng);
    let mut adam = Adam::new(&layers);
    let shrink = config.l1_lambda * config.learning_rate;

    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut best: Option<Checkpoint> = None;
    let mut since_best = 0;
    let mut history = Vec::new();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<u8> = batch.iter().map(|&i| y[i]).collect();
            let (_, grads) = cross_entropy_gradient(&layers, &xb, &yb);
            adam.update(&mut layers, &grads, config.learning_rate);
            if shrink > 0.0 {
                soft_threshold(&mut layers, shrink);
            }
        }

        let train_trace = forward_trace(&layers, x);
        let objective = mean_cross_entropy(&train_trace.logits, y) + config.l1_lambda * l1_penalty(&layers);
        if !objective.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let val_logits = forward_trace(&layers, x_val).logits;
        if val_logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let val_auc = auc(val_logits.as_slice().expect("contiguous"), y_val)?;
        let val_loss = mean_cross_entropy(&val_logits, y_val);
        debug!("epoch {epoch}: objective {objective:.6}, val auc {val_auc:.4}, val loss {val_loss:.6}");
        history.push(EpochLog {
            epoch,
            objective,
            val_auc,
        });

        // A tie in validation AUC (common once it saturates) is broken by
        // validation cross-entropy.
        let improved = best
            .as_ref()
            .is_none_or(|b| val_auc > b.val_auc || (val_auc == b.val_auc && val_loss < b.val_loss));
        if improved {
            best = Some(Checkpoint {
                layers: layers.clone(),
                epoch,
                val_auc,
                val_loss,
            });
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    let best = best.expect("at least one epoch");
    Ok(TrainReport {
        network: NetworkSpec::new(d, best.layers)?,
        best_epoch: best.epoch,
        best_val_auc: best.val_auc,
        history,
    })
}

/// Train / validation / test datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl Splits {
    pub fn from_indices(data: &Dataset, idx: &SplitIndices) -> Splits {
        Splits {
            train: data.subset(&idx.train),
            val: data.subset(&idx.val),
            test: data.subset(&idx.test),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub train_auc: f64,
    pub test_auc: f64,
    pub n_regions: usize,
    pub n_nontrivial_regions: usize,
}

pub const SWEEP_COLUMNS: [&str; 5] = ["lambda", "train_auc", "test_auc", "n_regions", "n_nontrivial_regions"];

/// Train one network per λ (same seed, fresh initialization each), unwrap
/// it on the training split and report performance and region counts,
/// sorted by λ. λ values train in parallel.
pub fn l1_sweep(config: &TrainConfig, lambdas: &[f64], splits: &Splits, rule: &NontrivialRule) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() {
        return Err(Error::Input("no lambda values given".into()));
    }
    let mut lambdas = lambdas.to_vec();
    lambdas.sort_by(f64::total_cmp);
    lambdas
        .par_iter()
        .map(|&lambda| {
            sweep_one(config, lambda, splits, rule).map_err(|e| Error::Sweep {
                lambda,
                source: Box::new(e),
            })
        })
        .collect()
}

fn sweep_one(config: &TrainConfig, lambda: f64, splits: &Splits, rule: &NontrivialRule) -> Result<SweepRow> {
    let cfg = TrainConfig {
        l1_lambda: lambda,
        ..config.clone()
    };
    let net = train(&cfg, &splits.train.x, &splits.train.y, &splits.val.x, &splits.val.y)?;
    let regions = unwrap(&net, &splits.train.x)?;
    Ok(SweepRow {
        lambda,
        train_auc: auc(&net.logits(&splits.train.x)?, &splits.train.y)?,
        test_auc: auc(&net.logits(&splits.test.x)?, &splits.test.y)?,
        n_regions: regions.len(),
        n_nontrivial_regions: regions.count_nontrivial(&splits.train.y, rule)?,
    })
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        wtr.write_record([
            r.lambda.to_string(),
            format!("{:.6}", r.train_auc),
            format!("{:.6}", r.test_auc),
            r.n_regions.to_string(),
            r.n_nontrivial_regions.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
