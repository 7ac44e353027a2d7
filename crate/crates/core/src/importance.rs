//! Permutation importance: which attributes the link model actually relies
//! on.
//!
//! The idea: score a labeled pair set, then break one attribute at a time by
//! shuffling its values across products (all of an attribute's encoded
//! columns move together under one shared row permutation, so a one-hot
//! block stays a valid one-hot row) and measure how far the ranking quality
//! falls. An attribute the model ignores leaves the score untouched —
//! exactly, because the evaluation reuses the same neighborhood samples —
//! while a load-bearing one drags it toward chance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encode::{AttributeBlock, FeatureMatrix};
use crate::metrics::roc_auc;
use crate::mix_seed;
use crate::network::{LabeledPair, Network};
use crate::sage::{score_pairs, SageModel};
use crate::{Error, Result};

/// Settings for an importance run.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceConfig {
    /// Independent permutations averaged per attribute.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            repeats: 10,
            seed: 42,
        }
    }
}

/// One attribute's drop in ranking quality, averaged over repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeImportance {
    pub name: String,
    /// Mean of `1 - permuted_auc / baseline_auc`; negative values mean the
    /// shuffle accidentally helped.
    pub mean: f64,
    /// Population standard deviation over the repeats.
    pub std_dev: f64,
}

/// Full importance ranking, most important attribute first.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub baseline_auc: f64,
    pub repeats: usize,
    pub rows: Vec<AttributeImportance>,
}

impl ImportanceReport {
    /// CSV rendering: `attribute,mean_importance,std_dev` plus a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attribute,mean_importance,std_dev\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{}\n", row.name, row.mean, row.std_dev));
        }
        out
    }
}

/// Copy `features` with `block`'s columns rearranged by `perm`: row `i` of
/// the result carries row `perm[i]`'s values inside the block and its own
/// values everywhere else.
pub(crate) fn apply_row_permutation(
    features: &FeatureMatrix,
    block: &AttributeBlock,
    perm: &[usize],
) -> FeatureMatrix {
    debug_assert_eq!(perm.len(), features.len());
    let mut out = features.clone();
    for (i, &src) in perm.iter().enumerate() {
        let values = features.row(src)[block.start..block.end].to_vec();
        out.row_mut(i)[block.start..block.end].copy_from_slice(&values);
    }
    out
}

/// Shuffle one attribute's values across products with a permutation drawn
/// from `rng`. Every column of the block moves under the same permutation.
pub fn permute_attribute_block(
    features: &FeatureMatrix,
    block: &AttributeBlock,
    rng: &mut ChaCha8Rng,
) -> FeatureMatrix {
    let mut perm: Vec<usize> = (0..features.len()).collect();
    perm.shuffle(rng);
    apply_row_permutation(features, block, &perm)
}

/// Rank attributes by how much shuffling them degrades the model's scoring
/// of `pairs`. The same evaluation seed drives the baseline and every
/// permuted pass, so neighborhood sampling is held fixed and only the
/// feature change can move the score.
pub fn permutation_importance(
    model: &SageModel,
    network: &Network,
    features: &FeatureMatrix,
    blocks: &[AttributeBlock],
    pairs: &[LabeledPair],
    config: &ImportanceConfig,
) -> Result<ImportanceReport> {
    if config.repeats == 0 {
        return Err(Error::Validation(
            "importance needs at least one repeat".into(),
        ));
    }
    if blocks.is_empty() {
        return Err(Error::Validation("no attribute blocks to rank".into()));
    }
    if pairs.is_empty() {
        return Err(Error::Validation("no pairs to score".into()));
    }
    for block in blocks {
        if block.start >= block.end || block.end > features.dim() {
            return Err(Error::Dimension(format!(
                "attribute '{}' spans columns {}..{} outside the {}-wide features",
                block.name,
                block.start,
                block.end,
                features.dim()
            )));
        }
    }

    let labels: Vec<bool> = pairs.iter().map(|p| p.exists).collect();
    let eval_seed = mix_seed(config.seed, "importance-eval", 0);
    let baseline_scores = score_pairs(model, network, features, pairs, eval_seed)?;
    let baseline_auc = roc_auc(&labels, &baseline_scores)?.auc;
    if baseline_auc == 0.0 {
        return Err(Error::Numeric(
            "baseline ranking quality is zero; importance ratios are undefined".into(),
        ));
    }

    let mut rows = Vec::with_capacity(blocks.len());
    for (b, block) in blocks.iter().enumerate() {
        let mut drops = Vec::with_capacity(config.repeats);
        for r in 0..config.repeats {
            let tag_index = (b * config.repeats + r) as u64;
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix_seed(config.seed, "permute-block", tag_index));
            let shuffled = permute_attribute_block(features, block, &mut rng);
            let scores = score_pairs(model, network, &shuffled, pairs, eval_seed)?;
            let auc = roc_auc(&labels, &scores)?.auc;
            drops.push(1.0 - auc / baseline_auc);
        }
        let mean = drops.iter().sum::<f64>() / drops.len() as f64;
        let var = drops.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / drops.len() as f64;
        rows.push(AttributeImportance {
            name: block.name.clone(),
            mean,
            std_dev: var.max(0.0).sqrt(),
        });
    }

    rows.sort_by(|a, b| {
        b.mean
            .partial_cmp(&a.mean)
            .expect("importance means are finite")
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(ImportanceReport {
        baseline_auc,
        repeats: config.repeats,
        rows,
    })
}
