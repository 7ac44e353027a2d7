//! Inductive node embeddings with a link classifier.
//!
//! Each node's embedding is computed by sampling a fixed-size neighborhood
//! tree and repeatedly aggregating neighbor states: at every layer the mean
//! of the sampled neighbors' previous-layer states is concatenated with the
//! node's own state, pushed through an affine map and a rectifier, and
//! L2-normalized. Because the model only ever consumes attribute vectors and
//! an adjacency, it transfers to markets it never trained on.
//!
//! A pair of embeddings turns into a link probability through an edge
//! operator (inner product by default) followed by a dense layer and a
//! logistic. Training minimizes binary cross-entropy by minibatch SGD with
//! gradients derived by hand; `tests` verify every path against central
//! finite differences.

mod forward;
mod grad;
mod sample;
mod train;

pub use forward::{
    bce_loss, edge_features, edge_probability, embed, forward_embed, EdgeOp, LayerTrace, NodeTrace,
    PROB_EPSILON,
};
pub use grad::{
    apply_gradients, batch_gradients, batch_loss, draw_pair_samples, parameter_gradients,
    Gradients, LayerGrad,
};
pub use sample::{sample_neighborhood, NodeSample};
pub use train::{predict_links, score_pairs, train, LossTrace, TrainConfig};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::Mat;
use crate::textio::{f64_from_hex, f64_to_hex};
use crate::{mix_seed, Error, Result};

/// One aggregation layer: an affine map applied to the concatenation of a
/// node's own state and its aggregated neighbor state, so the weight has
/// `out_dim` rows and `2 * in_dim` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayer {
    pub weight: Mat,
    pub bias: Vec<f64>,
}

/// Structural hyperparameters for a new model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Output width of each layer, shallowest first.
    pub hidden_dims: Vec<usize>,
    /// Neighbors sampled per node at each depth: `sample_sizes[0]` direct
    /// neighbors, `sample_sizes[1]` neighbors of each of those, and so on.
    pub sample_sizes: Vec<usize>,
    /// Dropout rate on layer inputs during training.
    pub dropout: f64,
    pub edge_op: EdgeOp,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dims: vec![20, 20],
            sample_sizes: vec![20, 10],
            dropout: 0.3,
            edge_op: EdgeOp::InnerProduct,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SageModel {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub dropout: f64,
    pub edge_op: EdgeOp,
    pub layers: Vec<SageLayer>,
    /// Dense layer mapping the edge-operator output to a single logit.
    pub classifier_weight: Vec<f64>,
    pub classifier_bias: f64,
    /// Mean degree of the network the model was trained on; drives the
    /// automatic K choice when predicting a market without a survey.
    pub train_mean_degree: Option<f64>,
    /// Fingerprint of the attribute schema the features were encoded with.
    pub schema_hash: Option<u64>,
}

impl SageModel {
    /// Fresh model with uniform Glorot-style weight init and zero biases.
    pub fn new(input_dim: usize, config: &ModelConfig, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Dimension("input dimension must be positive".into()));
        }
        if config.hidden_dims.is_empty() || config.hidden_dims.len() != config.sample_sizes.len() {
            return Err(Error::Dimension(format!(
                "{} hidden dims vs {} sample sizes; need one sample size per layer",
                config.hidden_dims.len(),
                config.sample_sizes.len()
            )));
        }
        if config.hidden_dims.contains(&0) || config.sample_sizes.contains(&0) {
            return Err(Error::Dimension(
                "hidden dims and sample sizes must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::Validation(format!(
                "dropout must be in [0, 1), got {}",
                config.dropout
            )));
        }

        fn uniform(limit: f64, rng: &mut ChaCha8Rng) -> f64 {
            rng.random::<f64>() * 2.0 * limit - limit
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, "model-init", 0));

        let mut layers = Vec::with_capacity(config.hidden_dims.len());
        let mut in_dim = input_dim;
        for &out_dim in &config.hidden_dims {
            let fan_in = 2 * in_dim;
            let limit = (6.0 / (fan_in + out_dim) as f64).sqrt();
            let weight = Mat::from_fn(out_dim, fan_in, |_, _| uniform(limit, &mut rng));
            layers.push(SageLayer {
                weight,
                bias: vec![0.0; out_dim],
            });
            in_dim = out_dim;
        }

        let edge_dim = config.edge_op.edge_dim(in_dim);
        let limit = (6.0 / (edge_dim + 1) as f64).sqrt();
        let classifier_weight = (0..edge_dim).map(|_| uniform(limit, &mut rng)).collect();

        Ok(SageModel {
            input_dim,
            hidden_dims: config.hidden_dims.clone(),
            sample_sizes: config.sample_sizes.clone(),
            dropout: config.dropout,
            edge_op: config.edge_op,
            layers,
            classifier_weight,
            classifier_bias: 0.0,
            train_mean_degree: None,
            schema_hash: None,
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn embedding_dim(&self) -> usize {
        *self
            .hidden_dims
            .last()
            .expect("constructor enforces depth >= 1")
    }

    /// Check internal dimension consistency, including that the classifier
    /// width matches the edge operator's output.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != self.hidden_dims.len()
            || self.layers.len() != self.sample_sizes.len()
            || self.layers.is_empty()
        {
            return Err(Error::Dimension("layer count mismatch".into()));
        }
        let mut in_dim = self.input_dim;
        for (k, (layer, &out_dim)) in self.layers.iter().zip(&self.hidden_dims).enumerate() {
            if layer.weight.rows() != out_dim
                || layer.weight.cols() != 2 * in_dim
                || layer.bias.len() != out_dim
            {
                return Err(Error::Dimension(format!(
                    "layer {k} weight is {}x{}, expected {}x{}",
                    layer.weight.rows(),
                    layer.weight.cols(),
                    out_dim,
                    2 * in_dim
                )));
            }
            in_dim = out_dim;
        }
        let edge_dim = self.edge_op.edge_dim(self.embedding_dim());
        if self.classifier_weight.len() != edge_dim {
            return Err(Error::Dimension(format!(
                "classifier width {} does not match {} operator output {edge_dim}",
                self.classifier_weight.len(),
                self.edge_op.as_str()
            )));
        }
        Ok(())
    }

    /// All trainable parameters flattened in a fixed order (layer weights
    /// row-major, layer biases, classifier weights, classifier bias).
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(layer.weight.data());
            out.extend_from_slice(&layer.bias);
        }
        out.extend_from_slice(&self.classifier_weight);
        out.push(self.classifier_bias);
        out
    }

    /// Inverse of [`flatten_params`](Self::flatten_params).
    pub fn assign_params(&mut self, params: &[f64]) -> Result<()> {
        let expected: usize = self
            .layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum::<usize>()
            + self.classifier_weight.len()
            + 1;
        if params.len() != expected {
            return Err(Error::Dimension(format!(
                "{} parameters supplied, model has {expected}",
                params.len()
            )));
        }
        let mut at = 0;
        for layer in &mut self.layers {
            let w = layer.weight.data_mut();
            let wn = w.len();
            w.copy_from_slice(&params[at..at + wn]);
            at += wn;
            let bn = layer.bias.len();
            layer.bias.copy_from_slice(&params[at..at + bn]);
            at += bn;
        }
        let cn = self.classifier_weight.len();
        self.classifier_weight.copy_from_slice(&params[at..at + cn]);
        at += cn;
        self.classifier_bias = params[at];
        Ok(())
    }

    /// Serialize to the versioned model document. Weights are written as raw
    /// float bits, so the round trip is exact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("coconet-model v1\n");
        out.push_str(&format!(
            "schema-hash {}\n",
            self.schema_hash
                .map(|h| format!("{h:016x}"))
                .unwrap_or_else(|| "none".into())
        ));
        out.push_str(&format!("edge-op {}\n", self.edge_op.as_str()));
        out.push_str(&format!("input-dim {}\n", self.input_dim));
        out.push_str(&format!("hidden-dims {}\n", join_usizes(&self.hidden_dims)));
        out.push_str(&format!(
            "sample-sizes {}\n",
            join_usizes(&self.sample_sizes)
        ));
        out.push_str(&format!("dropout {}\n", f64_to_hex(self.dropout)));
        out.push_str(&format!(
            "train-mean-degree {}\n",
            self.train_mean_degree
                .map(f64_to_hex)
                .unwrap_or_else(|| "none".into())
        ));
        for (k, layer) in self.layers.iter().enumerate() {
            out.push_str(&format!(
                "layer {k} weight {} {}\n",
                layer.weight.rows(),
                layer.weight.cols()
            ));
            for r in 0..layer.weight.rows() {
                out.push_str(&hex_row(layer.weight.row(r)));
                out.push('\n');
            }
            out.push_str(&format!("layer {k} bias {}\n", layer.bias.len()));
            out.push_str(&hex_row(&layer.bias));
            out.push('\n');
        }
        out.push_str(&format!("classifier {}\n", self.classifier_weight.len()));
        out.push_str(&hex_row(&self.classifier_weight));
        out.push('\n');
        out.push_str(&format!(
            "classifier-bias {}\n",
            f64_to_hex(self.classifier_bias)
        ));
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("model document truncated before {what}")))
        };

        if next("header")? != "coconet-model v1" {
            return Err(Error::Format("unknown model header".into()));
        }
        let schema_hash = match field(next("schema-hash")?, "schema-hash")? {
            "none" => None,
            h => Some(
                u64::from_str_radix(h, 16)
                    .map_err(|_| Error::Format(format!("bad schema hash '{h}'")))?,
            ),
        };
        let edge_op = EdgeOp::parse(field(next("edge-op")?, "edge-op")?)?;
        let input_dim: usize = parse_num(field(next("input-dim")?, "input-dim")?)?;
        let hidden_dims = split_usizes(field(next("hidden-dims")?, "hidden-dims")?)?;
        let sample_sizes = split_usizes(field(next("sample-sizes")?, "sample-sizes")?)?;
        let dropout = f64_from_hex(field(next("dropout")?, "dropout")?)?;
        let train_mean_degree = match field(next("train-mean-degree")?, "train-mean-degree")? {
            "none" => None,
            h => Some(f64_from_hex(h)?),
        };

        let mut layers = Vec::with_capacity(hidden_dims.len());
        for k in 0..hidden_dims.len() {
            let head = next("layer weight header")?;
            let (rows, cols) = parse_layer_head(head, k, "weight")?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                parse_hex_row(next("weight row")?, cols, &mut data)?;
            }
            let weight = Mat::from_rows(rows, cols, data);
            let head = next("layer bias header")?;
            let (n, _) = parse_layer_head(head, k, "bias")?;
            let mut bias = Vec::with_capacity(n);
            parse_hex_row(next("bias row")?, n, &mut bias)?;
            layers.push(SageLayer { weight, bias });
        }

        let n: usize = parse_num(field(next("classifier")?, "classifier")?)?;
        let mut classifier_weight = Vec::with_capacity(n);
        parse_hex_row(next("classifier row")?, n, &mut classifier_weight)?;
        let classifier_bias = f64_from_hex(field(next("classifier-bias")?, "classifier-bias")?)?;
        if next("end")? != "end" {
            return Err(Error::Format("model document missing 'end'".into()));
        }

        let model = SageModel {
            input_dim,
            hidden_dims,
            sample_sizes,
            dropout,
            edge_op,
            layers,
            classifier_weight,
            classifier_bias,
            train_mean_degree,
            schema_hash,
        };
        model.validate()?;
        Ok(model)
    }

    pub(crate) fn layer_input_dim(&self, k: usize) -> usize {
        if k == 0 {
            self.input_dim
        } else {
            self.hidden_dims[k - 1]
        }
    }
}

fn join_usizes(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn split_usizes(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(parse_num).collect()
}

fn parse_num(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Format(format!("bad number '{s}'")))
}

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::Format(format!("expected '{key} ...', got '{line}'")))
}

fn parse_layer_head(line: &str, k: usize, part: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = line.split(' ').collect();
    match fields.as_slice() {
        ["layer", idx, p, rows, cols] if *p == part && *idx == k.to_string() => {
            Ok((parse_num(rows)?, parse_num(cols)?))
        }
        ["layer", idx, p, n] if *p == part && *idx == k.to_string() => Ok((parse_num(n)?, 0)),
        _ => Err(Error::Format(format!(
            "expected 'layer {k} {part} ...', got '{line}'"
        ))),
    }
}

fn hex_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| f64_to_hex(v))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_hex_row(line: &str, expected: usize, out: &mut Vec<f64>) -> Result<()> {
    let before = out.len();
    for tok in line.split(' ').filter(|t| !t.is_empty()) {
        out.push(f64_from_hex(tok)?);
    }
    if out.len() - before != expected {
        return Err(Error::Format(format!(
            "expected {expected} values on row, got {}",
            out.len() - before
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_model_has_consistent_shapes() {
        let model = SageModel::new(7, &ModelConfig::default(), 1).unwrap();
        model.validate().unwrap();
        assert_eq!(model.depth(), 2);
        assert_eq!(model.embedding_dim(), 20);
        assert_eq!(model.layers[0].weight.rows(), 20);
        assert_eq!(model.layers[0].weight.cols(), 14);
        assert_eq!(model.layers[1].weight.cols(), 40);
        // inner product edge operator produces a scalar
        assert_eq!(model.classifier_weight.len(), 1);
        assert_eq!(model.classifier_bias, 0.0);
    }

    #[test]
    fn operator_decides_classifier_width() {
        let mk = |op| {
            SageModel::new(
                5,
                &ModelConfig {
                    hidden_dims: vec![4, 3],
                    sample_sizes: vec![2, 2],
                    dropout: 0.0,
                    edge_op: op,
                },
                1,
            )
            .unwrap()
        };
        assert_eq!(mk(EdgeOp::InnerProduct).classifier_weight.len(), 1);
        assert_eq!(mk(EdgeOp::Hadamard).classifier_weight.len(), 3);
        assert_eq!(mk(EdgeOp::Average).classifier_weight.len(), 3);
        assert_eq!(mk(EdgeOp::Concat).classifier_weight.len(), 6);
    }

    #[test]
    fn mismatched_classifier_width_fails_validation() {
        let mut model = SageModel::new(5, &ModelConfig::default(), 1).unwrap();
        model.classifier_weight.push(0.0);
        assert!(model.validate().is_err());
    }

    #[test]
    fn constructor_rejects_bad_configs() {
        let config = ModelConfig {
            sample_sizes: vec![20],
            ..ModelConfig::default()
        };
        assert!(SageModel::new(5, &config, 1).is_err());
        let config = ModelConfig {
            dropout: 1.0,
            ..ModelConfig::default()
        };
        assert!(SageModel::new(5, &config, 1).is_err());
        assert!(SageModel::new(0, &ModelConfig::default(), 1).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let a = SageModel::new(6, &ModelConfig::default(), 9).unwrap();
        let b = SageModel::new(6, &ModelConfig::default(), 9).unwrap();
        let c = SageModel::new(6, &ModelConfig::default(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn params_flatten_and_assign_round_trip() {
        let mut model = SageModel::new(4, &ModelConfig::default(), 3).unwrap();
        let params = model.flatten_params();
        let mut bumped = params.clone();
        bumped[0] += 1.0;
        *bumped.last_mut().unwrap() = 7.0;
        model.assign_params(&bumped).unwrap();
        assert_eq!(model.flatten_params(), bumped);
        assert_eq!(model.classifier_bias, 7.0);
        assert!(model.assign_params(&params[1..]).is_err());
    }

    #[test]
    fn model_text_round_trip_is_bit_exact() {
        let mut model = SageModel::new(9, &ModelConfig::default(), 5).unwrap();
        model.train_mean_degree = Some(57.25);
        model.schema_hash = Some(0xdead_beef_0011_2233);
        let text = model.to_text();
        let back = SageModel::from_text(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn model_parser_rejects_corruption() {
        let model = SageModel::new(3, &ModelConfig::default(), 5).unwrap();
        let text = model.to_text();
        assert!(SageModel::from_text(&text.replace("coconet-model v1", "v0")).is_err());
        assert!(SageModel::from_text(text.trim_end_matches("end\n")).is_err());
        // truncating a weight row changes the count on that line
        let butchered: String = text
            .lines()
            .map(|l| {
                if l.contains(' ') && l.len() > 100 {
                    l.rsplit_once(' ')
                        .map(|(head, _)| head.to_string())
                        .unwrap()
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        assert!(SageModel::from_text(&butchered).is_err());
    }
}
