//! `coconet`: build product co-consideration networks from consideration
//! surveys, train an inductive link-prediction model on them, and apply it
//! to markets that have no survey yet.
//!
//! Every subcommand reads defaults from an optional flat `key = value`
//! config file; each flag overrides its key of the same name. Exit status:
//! 0 success, 1 usage or configuration error, 2 data validation error,
//! 3 numeric failure.

/// Progress line on stdout. Write errors (say, a downstream `head` closing
/// the pipe) are ignored rather than aborting mid-run.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Diagnostic line on stderr, same tolerance as [`say`].
macro_rules! note {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stderr(), $($arg)*);
    }};
}

mod artifact;
mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Command failures, bucketed by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration (exit 1).
    Usage(String),
    /// Input data failed validation (exit 2).
    Data(String),
    /// A computation produced non-finite or degenerate numbers (exit 3).
    Numeric(String),
}

impl CliError {
    fn status(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) | CliError::Numeric(msg) => f.write_str(msg),
        }
    }
}

impl From<coconet::Error> for CliError {
    fn from(err: coconet::Error) -> Self {
        match err {
            coconet::Error::Numeric(_) => CliError::Numeric(err.to_string()),
            coconet::Error::Io(_) => CliError::Usage(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "coconet",
    version,
    about = "Co-consideration networks: build, train, predict, evaluate",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the co-consideration network from a survey and emit its edge
    /// list, node manifest, and a density report.
    BuildNetwork(BuildNetworkArgs),
    /// Train a link-prediction model on a survey year and emit the model
    /// bundle, the loss trace, and a held-out evaluation report.
    Train(TrainArgs),
    /// Score product pairs in a market with no survey, using a
    /// nearest-neighbor adjacency over the product attributes (or an
    /// explicitly supplied adjacency).
    Predict(PredictArgs),
    /// Compare a prediction table against a truth edge list.
    Evaluate(EvaluateArgs),
    /// Rank attributes by how much shuffling each one hurts held-out
    /// ranking quality.
    Importance(ImportanceArgs),
    /// Generate a synthetic market with a planted similarity rule.
    Synth(SynthArgs),
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` config file; every flag overrides its key.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory artifacts are written into (created if missing).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<String>,
}

#[derive(Args)]
struct BuildNetworkArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Consideration survey CSV (customer_id plus one column per slot).
    #[arg(long, value_name = "FILE")]
    survey: Option<String>,
    /// Product attribute CSV (product_id plus one column per attribute).
    #[arg(long, value_name = "FILE")]
    products: Option<String>,
    /// Attribute schema CSV (`name,kind` per line).
    #[arg(long, value_name = "FILE")]
    schema: Option<String>,
    /// Minimum distinct customers that must co-consider a pair to link it.
    #[arg(long, value_name = "N")]
    cutoff: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Consideration survey CSV.
    #[arg(long, value_name = "FILE")]
    survey: Option<String>,
    /// Product attribute CSV.
    #[arg(long, value_name = "FILE")]
    products: Option<String>,
    /// Attribute schema CSV.
    #[arg(long, value_name = "FILE")]
    schema: Option<String>,
    /// Minimum distinct customers that must co-consider a pair to link it.
    #[arg(long, value_name = "N")]
    cutoff: Option<usize>,
    /// Fraction of edges held out for evaluation, in (0, 1).
    #[arg(long, value_name = "F")]
    test_fraction: Option<f64>,
    /// Training epochs.
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Minibatch size.
    #[arg(long, value_name = "N")]
    minibatch: Option<usize>,
    /// SGD learning rate.
    #[arg(long, value_name = "RATE")]
    learning_rate: Option<f64>,
    /// Dropout rate on layer inputs during training, in [0, 1).
    #[arg(long, value_name = "RATE")]
    dropout: Option<f64>,
    /// Edge operator combining two embeddings into classifier input:
    /// inner-product, hadamard, average, or concat.
    #[arg(long, value_name = "OP")]
    edge_op: Option<String>,
    /// Layer output widths, comma-separated, shallowest first.
    #[arg(long, value_name = "D,D,...")]
    hidden_dims: Option<String>,
    /// Neighbors sampled per node at each depth, comma-separated.
    #[arg(long, value_name = "S,S,...")]
    sample_sizes: Option<String>,
    /// Seed for the edge split, minibatch order, and held-out scoring.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Seed for weight initialization.
    #[arg(long, value_name = "SEED")]
    model_seed: Option<u64>,
    /// Record held-out ranking quality after every epoch.
    #[arg(long)]
    track_heldout: bool,
    /// Decision threshold for the held-out confusion matrix, in (0, 1).
    #[arg(long, value_name = "T")]
    threshold: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Model bundle written by `train`.
    #[arg(long, value_name = "FILE")]
    model: Option<String>,
    /// Product attribute CSV for the target market.
    #[arg(long, value_name = "FILE")]
    products: Option<String>,
    /// Optional schema CSV cross-checked against the bundle's codec;
    /// prediction is refused on a fingerprint mismatch.
    #[arg(long, value_name = "FILE")]
    schema: Option<String>,
    /// Neighbors per node for the attribute-similarity adjacency;
    /// defaults to half the mean degree of the training network.
    #[arg(long, value_name = "K")]
    knn_k: Option<usize>,
    /// Node manifest of an explicit adjacency (one id per line), replacing
    /// the nearest-neighbor construction. Requires --adjacency-edges.
    #[arg(long, value_name = "FILE")]
    adjacency_nodes: Option<String>,
    /// Edge list of the explicit adjacency (`u,v` per line).
    #[arg(long, value_name = "FILE")]
    adjacency_edges: Option<String>,
    /// Pair table to score (`u,v` per line); default scores every
    /// unordered product pair.
    #[arg(long, value_name = "FILE")]
    pairs: Option<String>,
    /// Seed for neighborhood sampling while scoring.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Prediction table written by `predict` (`u,v,probability`).
    #[arg(long, value_name = "FILE")]
    predictions: Option<String>,
    /// Truth edge list (`u,v` per line); pairs absent from it count as
    /// non-links.
    #[arg(long, value_name = "FILE")]
    truth: Option<String>,
    /// Decision threshold for the confusion matrix, in (0, 1).
    #[arg(long, value_name = "T")]
    threshold: Option<f64>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Consideration survey CSV the model was trained on.
    #[arg(long, value_name = "FILE")]
    survey: Option<String>,
    /// Product attribute CSV the model was trained on.
    #[arg(long, value_name = "FILE")]
    products: Option<String>,
    /// Model bundle written by `train`.
    #[arg(long, value_name = "FILE")]
    model: Option<String>,
    /// Minimum distinct customers that must co-consider a pair to link it.
    #[arg(long, value_name = "N")]
    cutoff: Option<usize>,
    /// Fraction of edges held out, matching the training run.
    #[arg(long, value_name = "F")]
    test_fraction: Option<f64>,
    /// Which side of the edge split to score: train or test.
    #[arg(long, value_name = "SIDE")]
    pairs: Option<String>,
    /// Independent permutations averaged per attribute.
    #[arg(long, value_name = "N")]
    repeats: Option<usize>,
    /// Seed for the edge split and the permutations; match the training
    /// seed to reproduce its split.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Market preset: benchmark (400 products) or small (40 products).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Seed for market generation.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests land here too; they are not errors.
            let status = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(status);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            note!("error: {err}");
            ExitCode::from(err.status())
        }
    }
}
