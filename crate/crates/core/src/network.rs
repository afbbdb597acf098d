//! ReLU networks with a single logit output.
//!
//! The hidden layers use ReLU, the last layer is linear and produces one
//! logit; probabilities come from the logistic link. Every input falls in
//! exactly one activation region and inside that region the logit is the
//! affine map returned by [`NetworkSpec::affine_for_pattern`].

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One fully connected layer: `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Self {
        DenseLayer { weights, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        DenseLayer {
            weights: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }
}

/// A validated ReLU MLP. Immutable once constructed.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    input_dim: usize,
    layers: Vec<DenseLayer>,
    fingerprint: OnceLock<String>,
}

impl PartialEq for NetworkSpec {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim && self.layers == other.layers
    }
}

/// On/off state of every hidden neuron, layer-major, neuron index minor.
/// A bit is set iff the neuron's pre-activation is strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActivationPattern(Vec<bool>);

/// `x ↦ w·x + b` on the logit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub logit: f64,
    pub pattern: ActivationPattern,
}

impl ActivationPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        ActivationPattern(bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_active(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &bit in &self.0 {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ActivationPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Document(format!(
                    "activation pattern contains `{other}`"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(ActivationPattern)
    }
}

impl Serialize for ActivationPattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ActivationPattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl AffineMap {
    pub fn eval(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.w.iter().zip(x.iter()).map(|(w, x)| w * x).sum::<f64>() + self.b
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Coefficients followed by the intercept.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.w.clone();
        v.push(self.b);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.w.iter().all(|w| w.is_finite())
    }
}

pub(crate) fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl NetworkSpec {
    /// Validates the dimension chain and finiteness of all parameters.
    /// Layer numbers in errors are 1-based.
    pub fn new(input_dim: usize, layers: Vec<DenseLayer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Input("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::Input("network has no layers".into()));
        }
        let mut expected_in = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            let number = i + 1;
            if layer.in_dim() != expected_in {
                return Err(Error::Layer {
                    layer: number,
                    message: format!(
                        "weights have {} columns, expected {expected_in}",
                        layer.in_dim()
                    ),
                });
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::Layer {
                    layer: number,
                    message: format!(
                        "bias has length {}, expected {}",
                        layer.bias.len(),
                        layer.out_dim()
                    ),
                });
            }
            if layer.out_dim() == 0 {
                return Err(Error::Layer {
                    layer: number,
                    message: "layer has zero outputs".into(),
                });
            }
            if !layer.weights.iter().chain(layer.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::Layer {
                    layer: number,
                    message: "non-finite parameter".into(),
                });
            }
            expected_in = layer.out_dim();
        }
        if expected_in != 1 {
            return Err(Error::Layer {
                layer: layers.len(),
                message: format!("output layer must have 1 unit, has {expected_in}"),
            });
        }
        Ok(NetworkSpec {
            input_dim,
            layers,
            fingerprint: OnceLock::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<DenseLayer> {
        self.layers
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(DenseLayer::out_dim)
            .collect()
    }

    /// Total number of hidden neurons, i.e. the pattern length.
    pub fn hidden_count(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    fn check_input(&self, x: ArrayView1<'_, f64>) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Forward> {
        self.check_input(x)?;
        let mut bits = Vec::with_capacity(self.hidden_count());
        let mut act = x.to_owned();
        let (output, hidden) = self.layers.split_last().expect("at least one layer");
        for layer in hidden {
            let mut z = layer.weights.dot(&act) + &layer.bias;
            for v in z.iter_mut() {
                bits.push(*v > 0.0);
                *v = relu(*v);
            }
            act = z;
        }
        let logit = output.weights.row(0).dot(&act) + output.bias[0];
        if !logit.is_finite() {
            return Err(Error::NonFinite("forward pass".into()));
        }
        Ok(Forward {
            logit,
            pattern: ActivationPattern(bits),
        })
    }

    pub fn logit(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.forward(x).map(|f| f.logit)
    }

    /// Logits for every row of `x`.
    pub fn logits(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        x.axis_iter(Axis(0)).map(|row| self.logit(row)).collect()
    }

    /// Compose the layer maps with the 0/1 masks selected by `pattern`.
    pub fn affine_for_pattern(&self, pattern: &ActivationPattern) -> Result<AffineMap> {
        if pattern.len() != self.hidden_count() {
            return Err(Error::Dimension {
                context: "activation pattern",
                expected: self.hidden_count(),
                got: pattern.len(),
            });
        }
        // Running map: act = a · x + c.
        let mut a: Array2<f64> = Array2::eye(self.input_dim);
        let mut c: Array1<f64> = Array1::zeros(self.input_dim);
        let mut offset = 0;
        let (output, hidden) = self.layers.split_last().expect("at least one layer");
        for layer in hidden {
            let mut next_a = layer.weights.dot(&a);
            let mut next_c = layer.weights.dot(&c) + &layer.bias;
            for i in 0..layer.out_dim() {
                if !pattern.0[offset + i] {
                    next_a.row_mut(i).fill(0.0);
                    next_c[i] = 0.0;
                }
            }
            offset += layer.out_dim();
            a = next_a;
            c = next_c;
        }
        let w = output.weights.row(0).dot(&a);
        let b = output.weights.row(0).dot(&c) + output.bias[0];
        Ok(AffineMap { w: w.to_vec(), b })
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerDocument {
                    weights: l.weights.outer_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            activation: "relu".into(),
            link: "logit".into(),
        }
    }

    pub fn from_document(doc: NetworkDocument) -> Result<Self> {
        if doc.activation != "relu" {
            return Err(Error::Document(format!(
                "unsupported activation `{}`",
                doc.activation
            )));
        }
        if doc.link != "logit" {
            return Err(Error::Document(format!("unsupported link `{}`", doc.link)));
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (i, layer) in doc.layers.into_iter().enumerate() {
            let rows = layer.weights.len();
            let cols = layer.weights.first().map_or(0, Vec::len);
            if let Some(bad) = layer.weights.iter().position(|r| r.len() != cols) {
                return Err(Error::Layer {
                    layer: i + 1,
                    message: format!(
                        "weight row {bad} has {} entries, expected {cols}",
                        layer.weights[bad].len()
                    ),
                });
            }
            let flat: Vec<f64> = layer.weights.into_iter().flatten().collect();
            let weights = Array2::from_shape_vec((rows, cols), flat)
                .map_err(|e| Error::Layer {
                    layer: i + 1,
                    message: e.to_string(),
                })?;
            layers.push(DenseLayer::new(weights, Array1::from(layer.bias)));
        }
        NetworkSpec::new(doc.input_dim, layers)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("network document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(text)?;
        NetworkSpec::from_document(doc)
    }

    /// SHA-256 over the compact JSON document.
    pub fn fingerprint(&self) -> String {
        self.fingerprint
            .get_or_init(|| {
                let compact =
                    serde_json::to_vec(&self.to_document()).expect("network document serializes");
                hex::encode(Sha256::digest(&compact))
            })
            .clone()
    }
}

/// On-disk network schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub input_dim: usize,
    pub layers: Vec<LayerDocument>,
    pub activation: String,
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDocument {
    /// Row-major, `out × in`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}
