//! Forward pass: neighborhood tree in, embedding out, with every
//! intermediate kept for the backward pass.
//!
//! The tree is processed as rows. Row level 0 is the root, row level `r >= 1`
//! is sample level `r - 1`. Layer `k` consumes the states the previous layer
//! produced (raw attribute vectors for `k = 0`) and emits new states for row
//! levels `0 .. depth - k`; after the last layer only the root state is left,
//! and that is the embedding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::encode::FeatureMatrix;
use crate::linalg::{axpy, dot, l2_norm};
use crate::network::Network;
use crate::{Error, Result};

use super::sample::{sample_neighborhood, NodeSample};
use super::SageModel;

/// Link probabilities are kept this far away from 0 and 1 so the
/// cross-entropy loss stays finite no matter how confident the model gets.
pub const PROB_EPSILON: f64 = 1e-7;

/// How two endpoint embeddings combine into the classifier's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOp {
    /// Scalar dot product; the default.
    InnerProduct,
    /// Elementwise product, keeps the embedding width.
    Hadamard,
    /// Elementwise mean, keeps the embedding width.
    Average,
    /// Concatenation; the only order-sensitive choice.
    Concat,
}

impl EdgeOp {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeOp::InnerProduct => "inner-product",
            EdgeOp::Hadamard => "hadamard",
            EdgeOp::Average => "average",
            EdgeOp::Concat => "concat",
        }
    }

    pub fn parse(s: &str) -> Result<EdgeOp> {
        match s {
            "inner-product" => Ok(EdgeOp::InnerProduct),
            "hadamard" => Ok(EdgeOp::Hadamard),
            "average" => Ok(EdgeOp::Average),
            "concat" => Ok(EdgeOp::Concat),
            _ => Err(Error::Validation(format!(
                "unknown edge operator '{s}' (expected inner-product, hadamard, average, or concat)"
            ))),
        }
    }

    /// Width of the combined pair representation.
    pub fn edge_dim(self, embedding_dim: usize) -> usize {
        match self {
            EdgeOp::InnerProduct => 1,
            EdgeOp::Hadamard | EdgeOp::Average => embedding_dim,
            EdgeOp::Concat => 2 * embedding_dim,
        }
    }
}

/// Everything one layer did to one tree row.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// Post-dropout `[self ; mean of children]`, the affine map's input.
    pub input: Vec<f64>,
    /// Dropout multipliers (all 1.0 in evaluation mode).
    pub mask: Vec<f64>,
    /// Rectified affine output.
    pub relu: Vec<f64>,
    /// L2 norm of `relu`; zero means the row died and emitted zeros.
    pub norm: f64,
    /// Normalized state handed to the next layer.
    pub out: Vec<f64>,
}

/// Full forward record for one node: the sampled tree plus a
/// `[layer][row level][position]` grid of [`LayerTrace`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrace {
    pub sample: NodeSample,
    pub traces: Vec<Vec<Vec<LayerTrace>>>,
    pub embedding: Vec<f64>,
}

impl NodeTrace {
    /// True when every rectifier output died and the embedding is all zeros.
    pub fn is_degenerate(&self) -> bool {
        self.embedding.iter().all(|&x| x == 0.0)
    }
}

pub(crate) fn row_count(sample_sizes: &[usize], r: usize) -> usize {
    sample_sizes[..r].iter().product()
}

fn node_at(sample: &NodeSample, r: usize, p: usize) -> usize {
    if r == 0 {
        sample.root
    } else {
        sample.level(r - 1)[p]
    }
}

/// State consumed by layer `k` for tree row `(r, p)`: raw attributes when
/// `k == 0`, the previous layer's normalized output otherwise.
fn layer_state<'a>(
    k: usize,
    features: &'a FeatureMatrix,
    traces: &'a [Vec<Vec<LayerTrace>>],
    sample: &NodeSample,
    r: usize,
    p: usize,
) -> &'a [f64] {
    if k == 0 {
        features.row(node_at(sample, r, p))
    } else {
        &traces[k - 1][r][p].out
    }
}

/// Run the model over a sampled tree. Pass a generator to enable dropout
/// (training); pass `None` to evaluate. The mask stream depends only on the
/// tree shape, never on parameter values, so two calls with equally seeded
/// generators drop the same components even if the weights differ.
pub fn forward_embed(
    model: &SageModel,
    features: &FeatureMatrix,
    sample: &NodeSample,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<NodeTrace> {
    if features.dim() != model.input_dim {
        return Err(Error::Dimension(format!(
            "feature width {} does not match model input {}",
            features.dim(),
            model.input_dim
        )));
    }
    if sample.branching != model.sample_sizes {
        return Err(Error::Dimension(format!(
            "sample branching {:?} does not match model sample sizes {:?}",
            sample.branching, model.sample_sizes
        )));
    }
    let n = features.len();
    if sample.root >= n || sample.levels.iter().any(|l| l.iter().any(|&v| v >= n)) {
        return Err(Error::Validation(format!(
            "sampled node index out of range for {n} feature rows"
        )));
    }

    let depth = model.depth();
    let mut traces: Vec<Vec<Vec<LayerTrace>>> = Vec::with_capacity(depth);
    for k in 0..depth {
        let in_dim = model.layer_input_dim(k);
        let layer = &model.layers[k];
        let mut row_levels: Vec<Vec<LayerTrace>> = Vec::with_capacity(depth - k);
        for r in 0..depth - k {
            let count = row_count(&model.sample_sizes, r);
            let b = model.sample_sizes[r];
            let mut rows = Vec::with_capacity(count);
            for p in 0..count {
                let mut concat = vec![0.0; 2 * in_dim];
                concat[..in_dim].copy_from_slice(layer_state(k, features, &traces, sample, r, p));
                {
                    let (_, agg) = concat.split_at_mut(in_dim);
                    for c in 0..b {
                        let child = layer_state(k, features, &traces, sample, r + 1, p * b + c);
                        axpy(1.0, child, agg);
                    }
                    let inv = 1.0 / b as f64;
                    for a in agg.iter_mut() {
                        *a *= inv;
                    }
                }

                let mut mask = vec![1.0; 2 * in_dim];
                if model.dropout > 0.0 {
                    if let Some(rng) = dropout_rng.as_deref_mut() {
                        let keep = 1.0 - model.dropout;
                        for m in mask.iter_mut() {
                            *m = if rng.random::<f64>() < model.dropout {
                                0.0
                            } else {
                                1.0 / keep
                            };
                        }
                    }
                }
                let input: Vec<f64> = concat.iter().zip(&mask).map(|(x, m)| x * m).collect();

                let mut pre = vec![0.0; layer.weight.rows()];
                layer.weight.mul_vec(&input, &mut pre);
                for (x, &bias) in pre.iter_mut().zip(&layer.bias) {
                    *x += bias;
                }
                let relu: Vec<f64> = pre.iter().map(|&x| x.max(0.0)).collect();
                let norm = l2_norm(&relu);
                let out = if norm > 0.0 {
                    relu.iter().map(|&x| x / norm).collect()
                } else {
                    vec![0.0; relu.len()]
                };
                rows.push(LayerTrace {
                    input,
                    mask,
                    relu,
                    norm,
                    out,
                });
            }
            row_levels.push(rows);
        }
        traces.push(row_levels);
    }

    let embedding = traces[depth - 1][0][0].out.clone();
    Ok(NodeTrace {
        sample: sample.clone(),
        traces,
        embedding,
    })
}

/// Sample a neighborhood for `node` and embed it in evaluation mode.
pub fn embed(
    model: &SageModel,
    network: &Network,
    features: &FeatureMatrix,
    node: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let sample = sample_neighborhood(network, node, &model.sample_sizes, rng)?;
    Ok(forward_embed(model, features, &sample, None)?.embedding)
}

/// Combine two endpoint embeddings into the classifier's input vector.
pub fn edge_features(op: EdgeOp, zu: &[f64], zv: &[f64]) -> Vec<f64> {
    debug_assert_eq!(zu.len(), zv.len());
    match op {
        EdgeOp::InnerProduct => vec![dot(zu, zv)],
        EdgeOp::Hadamard => zu.iter().zip(zv).map(|(a, b)| a * b).collect(),
        EdgeOp::Average => zu.iter().zip(zv).map(|(a, b)| 0.5 * (a + b)).collect(),
        EdgeOp::Concat => zu.iter().chain(zv).copied().collect(),
    }
}

/// Gradients of [`edge_features`] with respect to both endpoints.
pub(crate) fn edge_features_backward(
    op: EdgeOp,
    zu: &[f64],
    zv: &[f64],
    d_feat: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    match op {
        EdgeOp::InnerProduct => (
            zv.iter().map(|&x| d_feat[0] * x).collect(),
            zu.iter().map(|&x| d_feat[0] * x).collect(),
        ),
        EdgeOp::Hadamard => (
            d_feat.iter().zip(zv).map(|(d, b)| d * b).collect(),
            d_feat.iter().zip(zu).map(|(d, a)| d * a).collect(),
        ),
        EdgeOp::Average => {
            let half: Vec<f64> = d_feat.iter().map(|d| 0.5 * d).collect();
            (half.clone(), half)
        }
        EdgeOp::Concat => (d_feat[..zu.len()].to_vec(), d_feat[zu.len()..].to_vec()),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Probability that the pair links, clamped into
/// `[PROB_EPSILON, 1 - PROB_EPSILON]`.
pub fn edge_probability(model: &SageModel, zu: &[f64], zv: &[f64]) -> f64 {
    let feat = edge_features(model.edge_op, zu, zv);
    let logit = dot(&model.classifier_weight, &feat) + model.classifier_bias;
    sigmoid(logit).clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

/// Binary cross-entropy of one prediction.
pub fn bce_loss(p: f64, exists: bool) -> f64 {
    let p = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    if exists {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}
