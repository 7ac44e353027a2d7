//! Hand-derived gradients for the embedding layers and the link classifier.
//!
//! The chain runs loss -> logit -> edge features -> both endpoint embeddings
//! -> back down each sampled tree. Inside a tree the gradient at a row
//! reverses exactly what the forward pass recorded: normalization, rectifier,
//! affine map, dropout mask, and finally the split into the row's own state
//! and the mean over its children (each child receiving `1/b` of the
//! aggregate's share). Every step is checked against central finite
//! differences in the tests below.

use rand_chacha::ChaCha8Rng;

use crate::encode::FeatureMatrix;
use crate::linalg::{axpy, dot, Mat};
use crate::network::{LabeledPair, Network};
use crate::{Error, Result};

use super::forward::{
    bce_loss, edge_features, edge_features_backward, forward_embed, row_count, sigmoid, NodeTrace,
    PROB_EPSILON,
};
use super::sample::{sample_neighborhood, NodeSample};
use super::SageModel;

/// Gradient of one aggregation layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Mat,
    pub bias: Vec<f64>,
}

/// Gradients for every trainable parameter, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub classifier_weight: Vec<f64>,
    pub classifier_bias: f64,
}

impl Gradients {
    pub fn zeros(model: &SageModel) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Mat::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            classifier_weight: vec![0.0; model.classifier_weight.len()],
            classifier_bias: 0.0,
        }
    }

    pub fn scale(&mut self, s: f64) {
        for lg in &mut self.layers {
            for w in lg.weight.data_mut() {
                *w *= s;
            }
            for b in &mut lg.bias {
                *b *= s;
            }
        }
        for w in &mut self.classifier_weight {
            *w *= s;
        }
        self.classifier_bias *= s;
    }

    /// Same ordering as [`SageModel::flatten_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for lg in &self.layers {
            out.extend_from_slice(lg.weight.data());
            out.extend_from_slice(&lg.bias);
        }
        out.extend_from_slice(&self.classifier_weight);
        out.push(self.classifier_bias);
        out
    }
}

/// One SGD step: `param -= learning_rate * grad`.
pub fn apply_gradients(model: &mut SageModel, grads: &Gradients, learning_rate: f64) {
    for (layer, lg) in model.layers.iter_mut().zip(&grads.layers) {
        layer.weight.add_scaled(-learning_rate, &lg.weight);
        axpy(-learning_rate, &lg.bias, &mut layer.bias);
    }
    axpy(
        -learning_rate,
        &grads.classifier_weight,
        &mut model.classifier_weight,
    );
    model.classifier_bias -= learning_rate * grads.classifier_bias;
}

/// Draw one neighborhood tree per pair endpoint, in pair order. Keeping the
/// trees separate from the loss lets tests perturb parameters while holding
/// the sampled structure fixed.
pub fn draw_pair_samples(
    network: &Network,
    pairs: &[LabeledPair],
    sample_sizes: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(NodeSample, NodeSample)>> {
    pairs
        .iter()
        .map(|pair| {
            Ok((
                sample_neighborhood(network, pair.u, sample_sizes, rng)?,
                sample_neighborhood(network, pair.v, sample_sizes, rng)?,
            ))
        })
        .collect()
}

/// Mean cross-entropy of a batch over fixed neighborhood trees.
pub fn batch_loss(
    model: &SageModel,
    features: &FeatureMatrix,
    samples: &[(NodeSample, NodeSample)],
    pairs: &[LabeledPair],
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<f64> {
    check_batch(samples, pairs)?;
    let mut total = 0.0;
    for (pair, (su, sv)) in pairs.iter().zip(samples) {
        let zu = forward_embed(model, features, su, dropout_rng.as_deref_mut())?.embedding;
        let zv = forward_embed(model, features, sv, dropout_rng.as_deref_mut())?.embedding;
        total += bce_loss(super::edge_probability(model, &zu, &zv), pair.exists);
    }
    Ok(total / pairs.len() as f64)
}

/// Mean loss and mean parameter gradients of a batch. The generator, when
/// present, is consumed in the same order as in [`batch_loss`], so equally
/// seeded calls see identical dropout masks.
pub fn batch_gradients(
    model: &SageModel,
    features: &FeatureMatrix,
    samples: &[(NodeSample, NodeSample)],
    pairs: &[LabeledPair],
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Gradients)> {
    check_batch(samples, pairs)?;
    let mut grads = Gradients::zeros(model);
    let mut total = 0.0;
    for (pair, (su, sv)) in pairs.iter().zip(samples) {
        let tu = forward_embed(model, features, su, dropout_rng.as_deref_mut())?;
        let tv = forward_embed(model, features, sv, dropout_rng.as_deref_mut())?;
        total += parameter_gradients(model, &tu, &tv, pair.exists, &mut grads);
    }
    let scale = 1.0 / pairs.len() as f64;
    grads.scale(scale);
    Ok((total * scale, grads))
}

fn check_batch(samples: &[(NodeSample, NodeSample)], pairs: &[LabeledPair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Validation("cannot process an empty batch".into()));
    }
    if samples.len() != pairs.len() {
        return Err(Error::Dimension(format!(
            "{} neighborhood samples for {} pairs",
            samples.len(),
            pairs.len()
        )));
    }
    Ok(())
}

/// Accumulate the gradients of one pair's cross-entropy into `grads` and
/// return that pair's loss. Both traces must come from the same model.
pub fn parameter_gradients(
    model: &SageModel,
    u: &NodeTrace,
    v: &NodeTrace,
    exists: bool,
    grads: &mut Gradients,
) -> f64 {
    let feat = edge_features(model.edge_op, &u.embedding, &v.embedding);
    let logit = dot(&model.classifier_weight, &feat) + model.classifier_bias;
    let s = sigmoid(logit);
    let p = s.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    let loss = bce_loss(p, exists);

    // where the clamp is active the loss is locally flat in the logit
    let y = if exists { 1.0 } else { 0.0 };
    let d_logit = if s > PROB_EPSILON && s < 1.0 - PROB_EPSILON {
        s - y
    } else {
        0.0
    };

    axpy(d_logit, &feat, &mut grads.classifier_weight);
    grads.classifier_bias += d_logit;

    let d_feat: Vec<f64> = model
        .classifier_weight
        .iter()
        .map(|&w| w * d_logit)
        .collect();
    let (d_zu, d_zv) = edge_features_backward(model.edge_op, &u.embedding, &v.embedding, &d_feat);
    backward_tree(model, u, &d_zu, grads);
    backward_tree(model, v, &d_zv, grads);
    loss
}

/// Push a gradient at the embedding back through every recorded row of the
/// tree, accumulating layer parameter gradients along the way.
fn backward_tree(model: &SageModel, trace: &NodeTrace, d_embedding: &[f64], grads: &mut Gradients) {
    let depth = model.depth();
    // d_out[r][p] holds the gradient at the output of traces[k][r][p]
    let mut d_out: Vec<Vec<Vec<f64>>> = vec![vec![d_embedding.to_vec()]];
    for k in (0..depth).rev() {
        let in_dim = model.layer_input_dim(k);
        let layer = &model.layers[k];
        let lgrad = &mut grads.layers[k];
        let mut d_below: Vec<Vec<Vec<f64>>> = if k > 0 {
            (0..=depth - k)
                .map(|r| vec![vec![0.0; in_dim]; row_count(&model.sample_sizes, r)])
                .collect()
        } else {
            Vec::new()
        };

        for (r, level) in d_out.iter().enumerate() {
            let b = model.sample_sizes[r];
            let inv_b = 1.0 / b as f64;
            for (p, d_o) in level.iter().enumerate() {
                let tr = &trace.traces[k][r][p];

                // out = relu / norm, so the gradient is the component of
                // d_o orthogonal to out, scaled back by the norm
                let mut d_pre = vec![0.0; d_o.len()];
                if tr.norm > 0.0 {
                    let proj = dot(&tr.out, d_o);
                    for i in 0..d_o.len() {
                        d_pre[i] = (d_o[i] - tr.out[i] * proj) / tr.norm;
                    }
                }
                for (g, &rl) in d_pre.iter_mut().zip(&tr.relu) {
                    if rl <= 0.0 {
                        *g = 0.0;
                    }
                }

                lgrad.weight.add_outer(1.0, &d_pre, &tr.input);
                axpy(1.0, &d_pre, &mut lgrad.bias);

                if k > 0 {
                    let mut d_input = vec![0.0; 2 * in_dim];
                    layer.weight.mul_transpose_vec(&d_pre, &mut d_input);
                    for (g, &m) in d_input.iter_mut().zip(&tr.mask) {
                        *g *= m;
                    }
                    axpy(1.0, &d_input[..in_dim], &mut d_below[r][p]);
                    for c in 0..b {
                        axpy(inv_b, &d_input[in_dim..], &mut d_below[r + 1][p * b + c]);
                    }
                }
            }
        }
        if k > 0 {
            d_out = d_below;
        }
    }
}
