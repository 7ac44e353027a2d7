//! The six subcommand pipelines. Each one resolves its settings (flag over
//! config key over default), runs the corresponding engine calls, and writes
//! self-describing artifacts into the output directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use coconet::encode::FeatureCodec;
use coconet::importance::{permutation_importance, ImportanceConfig};
use coconet::ingest::{
    parse_products, parse_survey, validate_dataset, write_products, write_survey, AttributeSchema,
    ConsiderationRecord, ProductRecord, RejectedRow,
};
use coconet::metrics::evaluate;
use coconet::network::{build_network, knn_adjacency, split_edges, Network};
use coconet::sage::{
    predict_links, score_pairs, train, EdgeOp, ModelConfig, SageModel, TrainConfig,
};
use coconet::synth::{generate_market, SynthConfig};
use coconet::textio::{escape, unescape};

use crate::artifact::{
    comment_header, ensure_out_dir, read_bundle, read_text, report_header, strip_comments,
    write_artifact, write_bundle,
};
use crate::config::{resolve, resolve_optional, resolve_required, Effective, KvConfig};
use crate::{
    BuildNetworkArgs, CliError, Command, CommonArgs, EvaluateArgs, ImportanceArgs, PredictArgs,
    SynthArgs, TrainArgs,
};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::BuildNetwork(args) => build_network_cmd(args),
        Command::Train(args) => train_cmd(args),
        Command::Predict(args) => predict_cmd(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Importance(args) => importance_cmd(args),
        Command::Synth(args) => synth_cmd(args),
    }
}

// ---------------------------------------------------------------- shared

fn setup(common: &CommonArgs) -> Result<(KvConfig, Effective, PathBuf), CliError> {
    let kv = match &common.config {
        Some(path) => {
            let text = read_text(path)?;
            KvConfig::parse(&text, &path.display().to_string())?
        }
        None => KvConfig::default(),
    };
    let mut effective = Effective::default();
    let out_dir = resolve(
        common.out_dir.clone(),
        &kv,
        "out-dir",
        ".".to_string(),
        &mut effective,
    )?;
    let out_dir = PathBuf::from(out_dir);
    ensure_out_dir(&out_dir)?;
    Ok((kv, effective, out_dir))
}

fn read_stripped(path: &str) -> Result<String, CliError> {
    Ok(strip_comments(&read_text(Path::new(path))?))
}

fn note_rejected(what: &str, rejected: &[RejectedRow]) {
    if rejected.is_empty() {
        return;
    }
    note!("note: {} {what} row(s) rejected:", rejected.len());
    for row in rejected.iter().take(5) {
        note!("note:   line {}: {}", row.line, row.reason);
    }
    if rejected.len() > 5 {
        note!("note:   ... and {} more", rejected.len() - 5);
    }
}

struct Dataset {
    schema: AttributeSchema,
    products: Vec<ProductRecord>,
    records: Vec<ConsiderationRecord>,
}

/// Load schema, products, and survey; reject the run if the survey mentions
/// products the table does not list.
fn load_dataset(
    survey_path: &str,
    products_path: &str,
    schema_path: &str,
) -> Result<Dataset, CliError> {
    let schema = AttributeSchema::parse(&read_stripped(schema_path)?)?;
    let dataset = load_dataset_with_schema(survey_path, products_path, schema)?;
    Ok(dataset)
}

fn load_dataset_with_schema(
    survey_path: &str,
    products_path: &str,
    schema: AttributeSchema,
) -> Result<Dataset, CliError> {
    let product_parse = parse_products(&read_stripped(products_path)?, &schema)?;
    note_rejected("product", &product_parse.rejected_rows);

    let survey_parse = parse_survey(&read_stripped(survey_path)?)?;
    note_rejected("survey", &survey_parse.rejected_rows);
    if survey_parse.duplicate_warnings > 0 {
        note!(
            "note: {} duplicate consideration(s) dropped",
            survey_parse.duplicate_warnings
        );
    }
    if survey_parse.oversize_warnings > 0 {
        note!(
            "note: {} survey row(s) list more than three products",
            survey_parse.oversize_warnings
        );
    }

    let summary = validate_dataset(&survey_parse.records, &product_parse.products);
    if !summary.is_valid() {
        let shown: Vec<&str> = summary
            .unknown_ids
            .iter()
            .take(5)
            .map(String::as_str)
            .collect();
        return Err(CliError::Data(format!(
            "survey mentions {} product(s) absent from the product table: {}{}",
            summary.unknown_ids.len(),
            shown.join(", "),
            if summary.unknown_ids.len() > 5 {
                ", ..."
            } else {
                ""
            }
        )));
    }

    Ok(Dataset {
        schema,
        products: product_parse.products,
        records: survey_parse.records,
    })
}

fn check_unit_interval(name: &str, value: f64) -> Result<(), CliError> {
    if !value.is_finite() || value <= 0.0 || value >= 1.0 {
        return Err(CliError::Usage(format!(
            "{name} must be strictly between 0 and 1, got {value}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, value: usize) -> Result<(), CliError> {
    if value == 0 {
        return Err(CliError::Usage(format!("{name} must be at least 1")));
    }
    Ok(())
}

/// Parse a `u,v`-per-line pair table (no header) into id pairs.
fn parse_pair_lines(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(CliError::Data(format!(
                "{origin}:{}: expected exactly 'u,v', got '{line}'",
                idx + 1
            )));
        };
        pairs.push((unescape(a)?, unescape(b)?));
    }
    Ok(pairs)
}

fn parse_usize_list(raw: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    let values: Result<Vec<usize>, _> = raw.split(',').map(|s| s.trim().parse()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::Usage(format!(
            "{flag} expects a comma-separated list of positive integers, got '{raw}'"
        ))),
    }
}

// ---------------------------------------------------------- build-network

fn build_network_cmd(args: BuildNetworkArgs) -> Result<(), CliError> {
    let (kv, mut eff, out_dir) = setup(&args.common)?;
    let survey = resolve_required(args.survey, &kv, "survey", &mut eff)?;
    let products = resolve_required(args.products, &kv, "products", &mut eff)?;
    let schema = resolve_required(args.schema, &kv, "schema", &mut eff)?;
    let cutoff = resolve(args.cutoff, &kv, "cutoff", 1usize, &mut eff)?;
    check_positive("cutoff", cutoff)?;

    let dataset = load_dataset(&survey, &products, &schema)?;
    let network = build_network(&dataset.records, &dataset.products, cutoff as u32)?;

    let header = comment_header("build-network", &eff);
    let nodes_path = write_artifact(
        &out_dir,
        "network-nodes.csv",
        &format!("{header}{}", network.write_manifest()),
    )?;
    let edges_path = write_artifact(
        &out_dir,
        "network-edges.csv",
        &format!("{header}{}", network.write_edge_list()),
    )?;

    let mut report = report_header("build-network", &eff);
    report.push('\n');
    report.push_str(&format!("cutoff: {cutoff}\n"));
    report.push_str(&format!("survey-rows: {}\n", dataset.records.len()));
    report.push_str(&format!("nodes: {}\n", network.node_count()));
    report.push_str(&format!("edges: {}\n", network.edge_count()));
    report.push_str(&format!(
        "possible-pairs: {}\n",
        network.node_count() * network.node_count().saturating_sub(1) / 2
    ));
    report.push_str(&format!("density: {:.6}\n", network.density()));
    report.push_str(&format!("mean-degree: {:.6}\n", network.mean_degree()));
    let report_path = write_artifact(&out_dir, "density-report.txt", &report)?;

    say!(
        "built network: {} nodes, {} edges, density {:.4}, mean degree {:.2}",
        network.node_count(),
        network.edge_count(),
        network.density(),
        network.mean_degree()
    );
    say!("wrote {}", nodes_path.display());
    say!("wrote {}", edges_path.display());
    say!("wrote {}", report_path.display());
    Ok(())
}

// ------------------------------------------------------------------ train

fn train_cmd(args: TrainArgs) -> Result<(), CliError> {
    let (kv, mut eff, out_dir) = setup(&args.common)?;
    let survey = resolve_required(args.survey, &kv, "survey", &mut eff)?;
    let products = resolve_required(args.products, &kv, "products", &mut eff)?;
    let schema = resolve_required(args.schema, &kv, "schema", &mut eff)?;
    let cutoff = resolve(args.cutoff, &kv, "cutoff", 1usize, &mut eff)?;
    let test_fraction = resolve(args.test_fraction, &kv, "test-fraction", 0.1, &mut eff)?;
    let epochs = resolve(args.epochs, &kv, "epochs", 100usize, &mut eff)?;
    let minibatch = resolve(args.minibatch, &kv, "minibatch", 20usize, &mut eff)?;
    let learning_rate = resolve(args.learning_rate, &kv, "learning-rate", 0.02, &mut eff)?;
    let dropout = resolve(args.dropout, &kv, "dropout", 0.3, &mut eff)?;
    let edge_op_raw = resolve(
        args.edge_op,
        &kv,
        "edge-op",
        "inner-product".to_string(),
        &mut eff,
    )?;
    let hidden_raw = resolve(
        args.hidden_dims,
        &kv,
        "hidden-dims",
        "20,20".to_string(),
        &mut eff,
    )?;
    let samples_raw = resolve(
        args.sample_sizes,
        &kv,
        "sample-sizes",
        "20,10".to_string(),
        &mut eff,
    )?;
    let seed = resolve(args.seed, &kv, "seed", 42u64, &mut eff)?;
    let model_seed = resolve(args.model_seed, &kv, "model-seed", 77u64, &mut eff)?;
    let track_heldout = resolve(
        if args.track_heldout { Some(true) } else { None },
        &kv,
        "track-heldout",
        false,
        &mut eff,
    )?;
    let threshold = resolve(args.threshold, &kv, "threshold", 0.5, &mut eff)?;

    check_positive("cutoff", cutoff)?;
    check_positive("epochs", epochs)?;
    check_positive("minibatch", minibatch)?;
    check_unit_interval("test-fraction", test_fraction)?;
    check_unit_interval("threshold", threshold)?;
    if !learning_rate.is_finite() || learning_rate <= 0.0 {
        return Err(CliError::Usage(format!(
            "learning-rate must be positive, got {learning_rate}"
        )));
    }
    if !dropout.is_finite() || !(0.0..1.0).contains(&dropout) {
        return Err(CliError::Usage(format!(
            "dropout must be in [0, 1), got {dropout}"
        )));
    }
    let edge_op = EdgeOp::parse(&edge_op_raw).map_err(|_| {
        CliError::Usage(format!(
            "edge-op must be one of inner-product, hadamard, average, concat; got '{edge_op_raw}'"
        ))
    })?;
    let hidden_dims = parse_usize_list(&hidden_raw, "hidden-dims")?;
    let sample_sizes = parse_usize_list(&samples_raw, "sample-sizes")?;

    let dataset = load_dataset(&survey, &products, &schema)?;
    let network = build_network(&dataset.records, &dataset.products, cutoff as u32)?;
    let codec = FeatureCodec::fit(&dataset.products, &dataset.schema)?;
    let features = codec.encode(&dataset.products)?.matrix;
    let split = split_edges(&network, test_fraction, seed)?;

    let model_config = ModelConfig {
        hidden_dims,
        sample_sizes,
        dropout,
        edge_op,
    };
    let mut model = SageModel::new(codec.dim(), &model_config, model_seed)?;
    model.train_mean_degree = Some(network.mean_degree());
    model.schema_hash = Some(codec.schema_hash());

    let train_config = TrainConfig {
        epochs,
        minibatch,
        learning_rate,
        seed,
        track_heldout,
    };
    say!(
        "training on {} nodes, {} train pairs ({} held out): {} epochs, minibatch {}, rate {}",
        network.node_count(),
        split.train.len(),
        split.test.len(),
        epochs,
        minibatch,
        learning_rate
    );
    let started = Instant::now();
    let trace = train(
        &mut model,
        &split.train_graph,
        &features,
        &split.train,
        Some(&split.test),
        &train_config,
    )?;
    let train_secs = started.elapsed().as_secs_f64();

    let probabilities = score_pairs(&model, &split.train_graph, &features, &split.test, seed)?;
    let labels: Vec<bool> = split.test.iter().map(|p| p.exists).collect();
    let report = evaluate(&labels, &probabilities, threshold)?;

    let bundle_path = write_bundle(&out_dir, "model.txt", "train", &eff, &codec, &model)?;

    let mut trace_csv = comment_header("train", &eff);
    if track_heldout {
        trace_csv.push_str("epoch,loss,heldout_auc\n");
        for (i, (loss, auc)) in trace.epoch_loss.iter().zip(&trace.heldout_auc).enumerate() {
            trace_csv.push_str(&format!("{},{loss},{auc}\n", i + 1));
        }
    } else {
        trace_csv.push_str("epoch,loss\n");
        for (i, loss) in trace.epoch_loss.iter().enumerate() {
            trace_csv.push_str(&format!("{},{loss}\n", i + 1));
        }
    }
    let trace_path = write_artifact(&out_dir, "loss-trace.csv", &trace_csv)?;

    let mut report_text = report_header("train", &eff);
    report_text.push('\n');
    report_text.push_str(&report.to_text());
    let report_path = write_artifact(&out_dir, "eval-report.txt", &report_text)?;
    let roc_path = write_artifact(
        &out_dir,
        "roc.csv",
        &format!("{}{}", comment_header("train", &eff), report.roc_csv()),
    )?;

    say!(
        "trained in {train_secs:.1}s: final loss {:.4}, held-out auc {:.4}, f1 {:.4}",
        trace.epoch_loss.last().copied().unwrap_or(f64::NAN),
        report.roc.auc,
        report.f1
    );
    say!("wrote {}", bundle_path.display());
    say!("wrote {}", trace_path.display());
    say!("wrote {}", report_path.display());
    say!("wrote {}", roc_path.display());
    Ok(())
}

// ---------------------------------------------------------------- predict

fn predict_cmd(args: PredictArgs) -> Result<(), CliError> {
    let (kv, mut eff, out_dir) = setup(&args.common)?;
    let model_path = resolve_required(args.model, &kv, "model", &mut eff)?;
    let products_path = resolve_required(args.products, &kv, "products", &mut eff)?;
    let schema_path = resolve_optional(args.schema, &kv, "schema", &mut eff);
    let adjacency_nodes = resolve_optional(args.adjacency_nodes, &kv, "adjacency-nodes", &mut eff);
    let adjacency_edges = resolve_optional(args.adjacency_edges, &kv, "adjacency-edges", &mut eff);
    let pairs_path = resolve_optional(args.pairs, &kv, "pairs", &mut eff);
    let knn_k_flag = match args.knn_k {
        Some(k) => Some(k),
        None => match kv.get("knn-k") {
            Some(raw) => Some(raw.parse::<usize>().map_err(|_| {
                CliError::Usage(format!("config key 'knn-k': cannot parse '{raw}'"))
            })?),
            None => None,
        },
    };
    let seed = resolve(args.seed, &kv, "seed", 42u64, &mut eff)?;

    let (codec, model) = read_bundle(Path::new(&model_path))?;

    if let Some(schema_path) = &schema_path {
        let supplied = AttributeSchema::parse(&read_stripped(schema_path)?)?;
        if supplied.fingerprint() != codec.schema_hash() {
            return Err(CliError::Data(format!(
                "schema fingerprint {:016x} from {} does not match the fingerprint {:016x} the model was trained with; refusing to predict",
                supplied.fingerprint(),
                schema_path,
                codec.schema_hash()
            )));
        }
    }

    let product_parse = parse_products(&read_stripped(&products_path)?, codec.schema())?;
    note_rejected("product", &product_parse.rejected_rows);
    if product_parse.products.is_empty() {
        return Err(CliError::Data(format!(
            "{products_path}: no products parsed"
        )));
    }
    let encoded = codec.encode(&product_parse.products)?;
    if encoded.unseen_categories > 0 {
        note!(
            "note: {} attribute value(s) unseen at training time encode as zero blocks",
            encoded.unseen_categories
        );
    }
    let features = encoded.matrix;

    let network = match (&adjacency_nodes, &adjacency_edges) {
        (Some(nodes), Some(edges)) => {
            if knn_k_flag.is_some() {
                return Err(CliError::Usage(
                    "pass either an explicit adjacency or --knn-k, not both".into(),
                ));
            }
            eff.record("adjacency", "explicit");
            Network::from_edge_list(&read_stripped(nodes)?, &read_stripped(edges)?)?
        }
        (None, None) => {
            let k = match knn_k_flag {
                Some(k) => {
                    check_positive("knn-k", k)?;
                    k
                }
                None => match model.train_mean_degree {
                    Some(mean) => ((mean / 2.0).round() as usize).max(1),
                    None => {
                        return Err(CliError::Usage(
                            "the bundle does not record the training network's mean degree; \
                             pass --knn-k or an explicit adjacency (--adjacency-nodes/--adjacency-edges)"
                                .into(),
                        ))
                    }
                },
            };
            let k = k.min(features.len().saturating_sub(1)).max(1);
            eff.record("knn-k", k);
            knn_adjacency(&features, k)?
        }
        _ => {
            return Err(CliError::Usage(
                "--adjacency-nodes and --adjacency-edges must be passed together".into(),
            ))
        }
    };

    let id_pairs = match &pairs_path {
        Some(path) => parse_pair_lines(&read_stripped(path)?, path)?,
        None => {
            let ids = features.node_ids();
            let mut all = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1) / 2);
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    all.push((ids[i].clone(), ids[j].clone()));
                }
            }
            all
        }
    };
    if id_pairs.is_empty() {
        return Err(CliError::Data("no pairs to score".into()));
    }

    let probabilities = predict_links(&model, &network, &features, &id_pairs, seed)?;

    let mut table = comment_header("predict", &eff);
    table.push_str("u,v,probability\n");
    for ((u, v), p) in id_pairs.iter().zip(&probabilities) {
        table.push_str(&format!("{},{},{p}\n", escape(u), escape(v)));
    }
    let table_path = write_artifact(&out_dir, "predictions.csv", &table)?;

    say!(
        "scored {} pair(s) over {} products (adjacency: {} edges, density {:.4})",
        id_pairs.len(),
        features.len(),
        network.edge_count(),
        network.density()
    );
    say!("wrote {}", table_path.display());
    Ok(())
}

// --------------------------------------------------------------- evaluate

fn evaluate_cmd(args: EvaluateArgs) -> Result<(), CliError> {
    let (kv, mut eff, out_dir) = setup(&args.common)?;
    let predictions_path = resolve_required(args.predictions, &kv, "predictions", &mut eff)?;
    let truth_path = resolve_required(args.truth, &kv, "truth", &mut eff)?;
    let threshold = resolve(args.threshold, &kv, "threshold", 0.5, &mut eff)?;
    check_unit_interval("threshold", threshold)?;

    let predictions_text = read_stripped(&predictions_path)?;
    let mut lines = predictions_text
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == "u,v,probability" => {}
        _ => {
            return Err(CliError::Data(format!(
                "{predictions_path}: expected a 'u,v,probability' header"
            )))
        }
    }
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut probabilities: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let mut fields = line.split(',');
        let (Some(u), Some(v), Some(p), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(CliError::Data(format!(
                "{predictions_path}:{}: expected 'u,v,probability', got '{line}'",
                idx + 1
            )));
        };
        let probability: f64 = p.trim().parse().map_err(|_| {
            CliError::Data(format!(
                "{predictions_path}:{}: bad probability '{p}'",
                idx + 1
            ))
        })?;
        pairs.push((unescape(u)?, unescape(v)?));
        probabilities.push(probability);
    }
    if pairs.is_empty() {
        return Err(CliError::Data(format!(
            "{predictions_path}: no prediction rows"
        )));
    }

    let truth_pairs = parse_pair_lines(&read_stripped(&truth_path)?, &truth_path)?;
    let truth: HashSet<(String, String)> = truth_pairs
        .into_iter()
        .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
        .collect();

    let labels: Vec<bool> = pairs
        .iter()
        .map(|(u, v)| {
            let key = if u <= v {
                (u.clone(), v.clone())
            } else {
                (v.clone(), u.clone())
            };
            truth.contains(&key)
        })
        .collect();
    let covered: HashSet<(String, String)> = pairs
        .iter()
        .map(|(u, v)| {
            if u <= v {
                (u.clone(), v.clone())
            } else {
                (v.clone(), u.clone())
            }
        })
        .collect();
    let unscored = truth.iter().filter(|pair| !covered.contains(*pair)).count();
    if unscored > 0 {
        note!("note: {unscored} truth edge(s) have no prediction row and were ignored");
    }

    let report = evaluate(&labels, &probabilities, threshold)?;

    let mut report_text = report_header("evaluate", &eff);
    report_text.push('\n');
    report_text.push_str(&report.to_text());
    let report_path = write_artifact(&out_dir, "eval-report.txt", &report_text)?;
    let roc_path = write_artifact(
        &out_dir,
        "roc.csv",
        &format!("{}{}", comment_header("evaluate", &eff), report.roc_csv()),
    )?;

    say!(
        "evaluated {} pair(s): auc {:.4}, f1 {:.4}, accuracy {:.4}",
        report.confusion.total(),
        report.roc.auc,
        report.f1,
        report.confusion.accuracy()
    );
    say!("wrote {}", report_path.display());
    say!("wrote {}", roc_path.display());
    Ok(())
}

// ------------------------------------------------------------- importance

fn importance_cmd(args: ImportanceArgs) -> Result<(), CliError> {
    let (kv, mut eff, out_dir) = setup(&args.common)?;
    let survey = resolve_required(args.survey, &kv, "survey", &mut eff)?;
    let products = resolve_required(args.products, &kv, "products", &mut eff)?;
    let model_path = resolve_required(args.model, &kv, "model", &mut eff)?;
    let cutoff = resolve(args.cutoff, &kv, "cutoff", 1usize, &mut eff)?;
    let test_fraction = resolve(args.test_fraction, &kv, "test-fraction", 0.1, &mut eff)?;
    let side = resolve(args.pairs, &kv, "pairs", "train".to_string(), &mut eff)?;
    let repeats = resolve(args.repeats, &kv, "repeats", 10usize, &mut eff)?;
    let seed = resolve(args.seed, &kv, "seed", 42u64, &mut eff)?;
    check_positive("cutoff", cutoff)?;
    check_positive("repeats", repeats)?;
    check_unit_interval("test-fraction", test_fraction)?;
    if side != "train" && side != "test" {
        return Err(CliError::Usage(format!(
            "pairs must be 'train' or 'test', got '{side}'"
        )));
    }

    let (codec, model) = read_bundle(Path::new(&model_path))?;
    let dataset = load_dataset_with_schema(&survey, &products, codec.schema().clone())?;
    let network = build_network(&dataset.records, &dataset.products, cutoff as u32)?;
    let features = codec.encode(&dataset.products)?.matrix;
    let split = split_edges(&network, test_fraction, seed)?;
    let pairs = if side == "train" {
        &split.train
    } else {
        &split.test
    };

    let report = permutation_importance(
        &model,
        &split.train_graph,
        &features,
        &codec.blocks(),
        pairs,
        &ImportanceConfig { repeats, seed },
    )?;

    let csv_path = write_artifact(
        &out_dir,
        "importance.csv",
        &format!("{}{}", comment_header("importance", &eff), report.to_csv()),
    )?;
    let mut text = report_header("importance", &eff);
    text.push('\n');
    text.push_str(&format!("baseline-auc: {:.6}\n", report.baseline_auc));
    text.push_str(&format!("repeats: {}\n", report.repeats));
    text.push_str(&format!("pairs: {side}\n"));
    for row in &report.rows {
        text.push_str(&format!("importance.{}.mean: {:.6}\n", row.name, row.mean));
        text.push_str(&format!(
            "importance.{}.std-dev: {:.6}\n",
            row.name, row.std_dev
        ));
    }
    let text_path = write_artifact(&out_dir, "importance-report.txt", &text)?;

    say!(
        "ranked {} attribute(s) over {} {side} pair(s), baseline auc {:.4}",
        report.rows.len(),
        pairs.len(),
        report.baseline_auc
    );
    for row in &report.rows {
        say!("  {}: {:.4} (sd {:.4})", row.name, row.mean, row.std_dev);
    }
    say!("wrote {}", csv_path.display());
    say!("wrote {}", text_path.display());
    Ok(())
}

// ------------------------------------------------------------------ synth

fn synth_cmd(args: SynthArgs) -> Result<(), CliError> {
    let (kv, mut eff, out_dir) = setup(&args.common)?;
    let preset = resolve(args.preset, &kv, "preset", "small".to_string(), &mut eff)?;
    let seed = resolve(args.seed, &kv, "seed", 42u64, &mut eff)?;
    let config = match preset.as_str() {
        "benchmark" => SynthConfig::benchmark(seed),
        "small" => SynthConfig::small(seed),
        other => {
            return Err(CliError::Usage(format!(
                "preset must be 'benchmark' or 'small', got '{other}'"
            )))
        }
    };

    let market = generate_market(&config)?;
    let header = comment_header("synth", &eff);

    let mut paths = Vec::new();
    paths.push(write_artifact(
        &out_dir,
        "schema.csv",
        &format!("{header}{}", market.schema.to_text()),
    )?);
    paths.push(write_artifact(
        &out_dir,
        "products.csv",
        &format!(
            "{header}{}",
            write_products(&market.year1.products, &market.schema)?
        ),
    )?);
    paths.push(write_artifact(
        &out_dir,
        "survey.csv",
        &format!("{header}{}", write_survey(&market.year1.records)),
    )?);
    paths.push(write_artifact(
        &out_dir,
        "products-year2.csv",
        &format!(
            "{header}{}",
            write_products(&market.year2.products, &market.schema)?
        ),
    )?);
    paths.push(write_artifact(
        &out_dir,
        "survey-year2.csv",
        &format!("{header}{}", write_survey(&market.year2.records)),
    )?);
    paths.push(write_artifact(
        &out_dir,
        "truth.csv",
        &format!("{header}{}", market.year1.truth.to_csv()),
    )?);
    paths.push(write_artifact(
        &out_dir,
        "truth-year2.csv",
        &format!("{header}{}", market.year2.truth.to_csv()),
    )?);

    let year1_ids: HashSet<&str> = market
        .year1
        .products
        .iter()
        .map(|p| p.product_id.as_str())
        .collect();
    let carried = market
        .year2
        .products
        .iter()
        .filter(|p| year1_ids.contains(p.product_id.as_str()))
        .count();

    let mut report = report_header("synth", &eff);
    report.push('\n');
    report.push_str(&format!("preset: {preset}\n"));
    report.push_str(&format!("products-per-year: {}\n", config.products));
    report.push_str(&format!("customers-per-year: {}\n", config.customers));
    report.push_str(&format!("attributes: {}\n", config.attributes.len()));
    report.push_str(&format!("carried-into-year2: {carried}\n"));
    report.push_str(&format!(
        "new-in-year2: {}\n",
        market.year2.products.len() - carried
    ));
    paths.push(write_artifact(&out_dir, "market-report.txt", &report)?);

    say!(
        "generated '{preset}' market: {} products x 2 years, {} survey rows per year, {} new in year 2",
        config.products,
        market.year1.records.len(),
        market.year2.products.len() - carried
    );
    for path in paths {
        say!("wrote {}", path.display());
    }
    Ok(())
}
