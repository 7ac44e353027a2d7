//! Minibatch SGD over labeled node pairs, plus the scoring entry points the
//! rest of the pipeline uses once a model exists.

use std::collections::BTreeSet;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encode::FeatureMatrix;
use crate::metrics::roc_auc;
use crate::mix_seed;
use crate::network::{LabeledPair, Network};
use crate::{Error, Result};

use super::forward::{edge_probability, forward_embed};
use super::grad::{apply_gradients, batch_gradients, draw_pair_samples};
use super::sample::sample_neighborhood;
use super::SageModel;

/// Optimization settings. Defaults match the configuration the engine was
/// tuned with: 100 epochs of minibatch-20 SGD at rate 0.02.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Score the held-out pairs after every epoch (costs one evaluation
    /// sweep per epoch; useful for convergence plots).
    pub track_heldout: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            minibatch: 20,
            learning_rate: 0.02,
            seed: 42,
            track_heldout: false,
        }
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTrace {
    /// Mean training cross-entropy per epoch.
    pub epoch_loss: Vec<f64>,
    /// Held-out ranking quality per epoch; empty unless tracking was on and
    /// held-out pairs were supplied.
    pub heldout_auc: Vec<f64>,
}

fn check_alignment(model: &SageModel, network: &Network, features: &FeatureMatrix) -> Result<()> {
    model.validate()?;
    if features.dim() != model.input_dim {
        return Err(Error::Dimension(format!(
            "feature width {} does not match model input {}",
            features.dim(),
            model.input_dim
        )));
    }
    if features.node_ids() != network.node_ids() {
        return Err(Error::Validation(
            "feature rows and network nodes must list the same ids in the same order".into(),
        ));
    }
    Ok(())
}

fn check_pairs(pairs: &[LabeledPair], node_count: usize) -> Result<()> {
    for pair in pairs {
        if pair.u >= node_count || pair.v >= node_count {
            return Err(Error::Validation(format!(
                "pair ({}, {}) out of range for {node_count} nodes",
                pair.u, pair.v
            )));
        }
    }
    Ok(())
}

/// Fit the model in place and return the loss history. Each epoch reshuffles
/// the pairs, then walks them in minibatches: sample neighborhoods, take the
/// mean gradient, step. Everything is driven by generators derived from
/// `config.seed`, so a rerun with the same inputs is bit-identical.
pub fn train(
    model: &mut SageModel,
    network: &Network,
    features: &FeatureMatrix,
    pairs: &[LabeledPair],
    heldout: Option<&[LabeledPair]>,
    config: &TrainConfig,
) -> Result<LossTrace> {
    check_alignment(model, network, features)?;
    check_pairs(pairs, network.node_count())?;
    if let Some(h) = heldout {
        check_pairs(h, network.node_count())?;
    }
    if pairs.is_empty() {
        return Err(Error::Validation("no training pairs supplied".into()));
    }
    if config.epochs == 0 || config.minibatch == 0 {
        return Err(Error::Validation(
            "epochs and minibatch size must be positive".into(),
        ));
    }
    if !config.learning_rate.is_finite() || config.learning_rate < 0.0 {
        return Err(Error::Validation(format!(
            "learning rate must be finite and non-negative, got {}",
            config.learning_rate
        )));
    }

    let mut trace = LossTrace {
        epoch_loss: Vec::with_capacity(config.epochs),
        heldout_auc: Vec::new(),
    };
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, "train-epoch", epoch as u64));
        order.shuffle(&mut rng);

        let mut total = 0.0;
        for chunk in order.chunks(config.minibatch) {
            let batch: Vec<LabeledPair> = chunk.iter().map(|&i| pairs[i]).collect();
            let samples = draw_pair_samples(network, &batch, &model.sample_sizes, &mut rng)?;
            let (loss, grads) = batch_gradients(model, features, &samples, &batch, Some(&mut rng))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training loss became non-finite in epoch {epoch}"
                )));
            }
            apply_gradients(model, &grads, config.learning_rate);
            total += loss * batch.len() as f64;
        }
        trace.epoch_loss.push(total / pairs.len() as f64);

        if config.track_heldout {
            if let Some(h) = heldout {
                let scores = score_pairs(
                    model,
                    network,
                    features,
                    h,
                    mix_seed(config.seed, "heldout-epoch", epoch as u64),
                )?;
                let labels: Vec<bool> = h.iter().map(|p| p.exists).collect();
                trace.heldout_auc.push(roc_auc(&labels, &scores)?.auc);
            }
        }
    }
    Ok(trace)
}

/// Link probability for each pair, in order. Every distinct node is embedded
/// once with its own generator seeded by `mix(seed, node)`, so a pair's score
/// does not depend on which other pairs happen to be in the list — rescoring
/// any subset with the same seed reproduces the same values.
pub fn score_pairs(
    model: &SageModel,
    network: &Network,
    features: &FeatureMatrix,
    pairs: &[LabeledPair],
    seed: u64,
) -> Result<Vec<f64>> {
    check_alignment(model, network, features)?;
    check_pairs(pairs, network.node_count())?;

    let nodes: BTreeSet<usize> = pairs.iter().flat_map(|p| [p.u, p.v]).collect();
    let mut embeddings: HashMap<usize, Vec<f64>> = HashMap::with_capacity(nodes.len());
    for node in nodes {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, "embed-node", node as u64));
        let sample = sample_neighborhood(network, node, &model.sample_sizes, &mut rng)?;
        let trace = forward_embed(model, features, &sample, None)?;
        embeddings.insert(node, trace.embedding);
    }
    Ok(pairs
        .iter()
        .map(|p| edge_probability(model, &embeddings[&p.u], &embeddings[&p.v]))
        .collect())
}

/// Score pairs named by product id on an arbitrary adjacency (typically an
/// approximated one when no survey exists for the market). Returns the
/// probabilities in input order.
pub fn predict_links(
    model: &SageModel,
    network: &Network,
    features: &FeatureMatrix,
    id_pairs: &[(String, String)],
    seed: u64,
) -> Result<Vec<f64>> {
    let mut pairs = Vec::with_capacity(id_pairs.len());
    for (a, b) in id_pairs {
        let u = network
            .index_of(a)
            .ok_or_else(|| Error::Validation(format!("unknown product id '{a}'")))?;
        let v = network
            .index_of(b)
            .ok_or_else(|| Error::Validation(format!("unknown product id '{b}'")))?;
        if u == v {
            return Err(Error::Validation(format!(
                "cannot score product '{a}' against itself"
            )));
        }
        pairs.push(LabeledPair {
            u,
            v,
            exists: false,
        });
    }
    score_pairs(model, network, features, &pairs, seed)
}
