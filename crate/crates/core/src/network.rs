//! Co-consideration networks: construction from survey records, train/test
//! edge splits, and the cosine-KNN approximate adjacency used for markets
//! where no survey exists yet.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encode::FeatureMatrix;
use crate::ingest::{ConsiderationRecord, ProductRecord};
use crate::textio::{escape, unescape};
use crate::{mix_seed, Error, Result};

/// Undirected product graph. Symmetric, no self loops, neighbor lists kept
/// sorted. Networks built from survey records also carry the pair counts and
/// the cutoff that produced the edges; derived graphs (splits, KNN) do not.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    node_ids: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
    pair_counts: BTreeMap<(usize, usize), u32>,
    cutoff: Option<u32>,
}

impl Network {
    /// Build a graph from an explicit edge list over the given nodes.
    pub fn from_edges(
        node_ids: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = node_ids.len();
        let mut seen_ids = HashSet::new();
        for id in &node_ids {
            if !seen_ids.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate node id '{id}'")));
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u},{v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::Validation(format!("self loop on node {u}")));
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let index = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(Network {
            node_ids,
            index,
            neighbors,
            pair_counts: BTreeMap::new(),
            cutoff: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.node_ids.is_empty() {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, v: usize) -> &str {
        &self.node_ids[v]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// All edges as `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Fraction of unordered node pairs that are linked. Needs at least two
    /// nodes to be meaningful.
    pub fn density(&self) -> f64 {
        let n = self.node_count();
        assert!(n >= 2, "density needs at least two nodes");
        let pairs = n * (n - 1) / 2;
        self.edge_count() as f64 / pairs as f64
    }

    /// Co-consideration count for a pair, if this network was built from
    /// survey records.
    pub fn pair_count(&self, u: usize, v: usize) -> u32 {
        let key = (u.min(v), u.max(v));
        self.pair_counts.get(&key).copied().unwrap_or(0)
    }

    pub fn cutoff(&self) -> Option<u32> {
        self.cutoff
    }

    /// Node manifest: one id per line, in index order. Needed to round-trip
    /// isolated nodes, which never appear in the edge list.
    pub fn write_manifest(&self) -> String {
        let mut out = String::new();
        for id in &self.node_ids {
            out.push_str(&escape(id));
            out.push('\n');
        }
        out
    }

    /// Edge list: one `u,v` pair of node ids per line, `u < v` by index.
    pub fn write_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edges() {
            out.push_str(&escape(&self.node_ids[u]));
            out.push(',');
            out.push_str(&escape(&self.node_ids[v]));
            out.push('\n');
        }
        out
    }

    /// Rebuild a network from a manifest and an edge list. Pair counts and
    /// cutoff are not part of the serialized form.
    pub fn from_edge_list(manifest: &str, edges: &str) -> Result<Self> {
        let mut node_ids = Vec::new();
        for line in manifest.lines() {
            if !line.is_empty() {
                node_ids.push(unescape(line)?);
            }
        }
        let index: HashMap<&str, usize> = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut parsed = Vec::new();
        for (lineno, line) in edges.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: format!("expected 'u,v', got '{line}'"),
            })?;
            let (a, b) = (unescape(a)?, unescape(b)?);
            let u = *index.get(a.as_str()).ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: format!("edge references unknown node '{a}'"),
            })?;
            let v = *index.get(b.as_str()).ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: format!("edge references unknown node '{b}'"),
            })?;
            parsed.push((u, v));
        }
        Network::from_edges(node_ids, parsed)
    }
}

/// Build the co-consideration network: nodes are the products (in table
/// order), and two products are linked when at least `cutoff` distinct
/// customers considered both in the same response. A customer contributes at
/// most one count per unordered pair, no matter how many responses they file.
pub fn build_network(
    records: &[ConsiderationRecord],
    products: &[ProductRecord],
    cutoff: u32,
) -> Result<Network> {
    if cutoff == 0 {
        return Err(Error::Validation("cutoff must be at least 1".into()));
    }
    let node_ids: Vec<String> = products.iter().map(|p| p.product_id.clone()).collect();
    let index: HashMap<&str, usize> = node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    // group responses by customer so repeat responders count once per pair
    let mut by_customer: BTreeMap<&str, Vec<&ConsiderationRecord>> = BTreeMap::new();
    for r in records {
        by_customer
            .entry(r.customer_id.as_str())
            .or_default()
            .push(r);
    }

    let mut counts: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for (customer, responses) in &by_customer {
        let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        for r in responses {
            let mut ids = Vec::with_capacity(r.considered.len());
            for p in &r.considered {
                let i = index.get(p.as_str()).ok_or_else(|| {
                    Error::Validation(format!(
                        "customer '{customer}' considers unknown product '{p}'"
                    ))
                })?;
                ids.push(*i);
            }
            for a in 0..ids.len() {
                for b in a + 1..ids.len() {
                    let (u, v) = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                    pairs.insert((u, v));
                }
            }
        }
        for pair in pairs {
            *counts.entry(pair).or_insert(0) += 1;
        }
    }

    let edges: Vec<(usize, usize)> = counts
        .iter()
        .filter(|(_, &c)| c >= cutoff)
        .map(|(&p, _)| p)
        .collect();
    let mut network = Network::from_edges(node_ids, edges)?;
    network.pair_counts = counts;
    network.cutoff = Some(cutoff);
    Ok(network)
}

/// One labeled example for the link classifier: a node pair and whether the
/// network actually links it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledPair {
    pub u: usize,
    pub v: usize,
    pub exists: bool,
}

/// A train/test split of a network's link structure. Test positives are
/// removed from the training adjacency, and each side gets an equal count of
/// sampled non-edges, disjoint between sides.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train_graph: Network,
    pub train: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
    pub seed: u64,
}

/// Split edges for evaluation. `ceil(test_fraction * |E|)` positives go to
/// the test side; everything else trains. Negatives are drawn uniformly
/// among non-edges without replacement.
pub fn split_edges(network: &Network, test_fraction: f64, seed: u64) -> Result<EdgeSplit> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::Validation(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut edges: Vec<(usize, usize)> = network.edges().collect();
    if edges.is_empty() {
        return Err(Error::Validation(
            "cannot split a network with no edges".into(),
        ));
    }

    let n = network.node_count();
    let mut non_edges = Vec::with_capacity(n * (n - 1) / 2 - edges.len());
    for u in 0..n {
        for v in u + 1..n {
            if !network.has_edge(u, v) {
                non_edges.push((u, v));
            }
        }
    }
    if non_edges.len() < edges.len() {
        return Err(Error::Validation(format!(
            "graph too dense to balance classes: {} edges but only {} non-edges",
            edges.len(),
            non_edges.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, "edge-split", 0));
    edges.shuffle(&mut rng);
    non_edges.shuffle(&mut rng);

    let test_count = (test_fraction * edges.len() as f64).ceil() as usize;
    let test_pos = &edges[..test_count];
    let train_pos = &edges[test_count..];
    let test_neg = &non_edges[..test_count];
    let train_neg = &non_edges[test_count..edges.len()];

    let labeled = |pairs: &[(usize, usize)], exists: bool| {
        pairs
            .iter()
            .map(|&(u, v)| LabeledPair { u, v, exists })
            .collect::<Vec<_>>()
    };
    let mut train = labeled(train_pos, true);
    train.extend(labeled(train_neg, false));
    train.shuffle(&mut rng);
    let mut test = labeled(test_pos, true);
    test.extend(labeled(test_neg, false));

    let train_graph = Network::from_edges(network.node_ids().to_vec(), train_pos.iter().copied())?;
    Ok(EdgeSplit {
        train_graph,
        train,
        test,
        seed,
    })
}

/// K for the KNN adjacency: half the training network's mean degree,
/// rounded, and at least 1. Union symmetrization roughly doubles per-node
/// links, so halving the target degree lands near the source density.
pub fn choose_k(network: &Network) -> usize {
    ((network.mean_degree() / 2.0).round() as usize).max(1)
}

/// Approximate adjacency for a market with no survey: link every node to its
/// `k` most cosine-similar peers (ties broken toward the lower node index),
/// then symmetrize by union.
pub fn knn_adjacency(features: &FeatureMatrix, k: usize) -> Result<Network> {
    let n = features.len();
    if n < 2 {
        return Err(Error::Validation(
            "KNN adjacency needs at least two nodes".into(),
        ));
    }
    if k == 0 || k >= n {
        return Err(Error::Validation(format!(
            "k must satisfy 1 <= k < {n}, got {k}"
        )));
    }
    let mut edges = Vec::with_capacity(n * k);
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for u in 0..n {
        scored.clear();
        for v in 0..n {
            if v != u {
                scored.push((features.cosine(u, v), v));
            }
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, v) in scored.iter().take(k) {
            edges.push((u, v));
        }
    }
    Network::from_edges(features.node_ids().to_vec(), edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ConsiderationRecord;
    use proptest::prelude::*;
    use rand::Rng;

    fn rec(customer: &str, considered: &[&str]) -> ConsiderationRecord {
        ConsiderationRecord::new(
            customer.into(),
            considered.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    fn prods(ids: &[&str]) -> Vec<ProductRecord> {
        ids.iter()
            .map(|id| ProductRecord::new(id.to_string(), vec![]))
            .collect()
    }

    #[test]
    fn single_record_links_its_pairs() {
        let records = vec![rec("c1", &["A", "B"]), rec("c2", &["A", "C"])];
        let network = build_network(&records, &prods(&["A", "B", "C"]), 1).unwrap();
        assert!(network.has_edge(0, 1));
        assert!(network.has_edge(0, 2));
        assert!(!network.has_edge(1, 2));
        assert_eq!(network.edge_count(), 2);
        assert_eq!(network.cutoff(), Some(1));
    }

    #[test]
    fn cutoff_two_drops_single_mentions() {
        let records = vec![rec("c1", &["A", "B"]), rec("c2", &["A", "C"])];
        let network = build_network(&records, &prods(&["A", "B", "C"]), 2).unwrap();
        assert_eq!(network.edge_count(), 0);
        assert_eq!(network.pair_count(0, 1), 1);
    }

    #[test]
    fn repeat_responses_count_once_per_pair() {
        let records = vec![rec("c1", &["A", "B"]), rec("c1", &["A", "B", "C"])];
        let network = build_network(&records, &prods(&["A", "B", "C"]), 1).unwrap();
        assert_eq!(network.pair_count(0, 1), 1);
        assert!(build_network(&records, &prods(&["A", "B", "C"]), 2)
            .unwrap()
            .edges()
            .next()
            .is_none());
    }

    #[test]
    fn unknown_product_in_survey_is_an_error() {
        let records = vec![rec("c1", &["A", "X"])];
        assert!(matches!(
            build_network(&records, &prods(&["A"]), 1),
            Err(Error::Validation(_))
        ));
    }

    // Brute-force oracle: count co-considering customers for every pair by
    // scanning all records, then threshold.
    fn brute_force_edges(
        records: &[ConsiderationRecord],
        ids: &[&str],
        cutoff: u32,
    ) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for u in 0..ids.len() {
            for v in u + 1..ids.len() {
                let mut customers = HashSet::new();
                for r in records {
                    let has_u = r.considered.iter().any(|p| p == ids[u]);
                    let has_v = r.considered.iter().any(|p| p == ids[v]);
                    if has_u && has_v {
                        customers.insert(r.customer_id.as_str());
                    }
                }
                if customers.len() as u32 >= cutoff {
                    edges.push((u, v));
                }
            }
        }
        edges
    }

    #[test]
    fn random_records_match_brute_force() {
        let ids = ["A", "B", "C", "D", "E", "F"];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let records: Vec<ConsiderationRecord> = (0..10)
                .map(|c| {
                    let size = rng.random_range(1..=3);
                    let mut pool: Vec<&str> = ids.to_vec();
                    pool.shuffle(&mut rng);
                    rec(&format!("c{c}"), &pool[..size])
                })
                .collect();
            let cutoff = rng.random_range(1..=2);
            let network = build_network(&records, &prods(&ids), cutoff).unwrap();
            let got: Vec<(usize, usize)> = network.edges().collect();
            assert_eq!(
                got,
                brute_force_edges(&records, &ids, cutoff),
                "trial {trial}"
            );
        }
    }

    #[test]
    fn density_of_complete_and_empty_graphs() {
        let complete = Network::from_edges(
            vec!["a".into(), "b".into(), "c".into()],
            vec![(0, 1), (0, 2), (1, 2)],
        )
        .unwrap();
        assert_eq!(complete.density(), 1.0);
        let empty =
            Network::from_edges(vec!["a".into(), "b".into(), "c".into(), "d".into()], vec![])
                .unwrap();
        assert_eq!(empty.density(), 0.0);
    }

    #[test]
    fn density_at_market_scale() {
        // 388 nodes with 11060 edges: density ~= 0.1473
        let n = 388;
        let ids: Vec<String> = (0..n).map(|i| format!("P{i}")).collect();
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        all.shuffle(&mut rng);
        let network = Network::from_edges(ids, all.into_iter().take(11060)).unwrap();
        assert!((network.density() - 0.1473).abs() < 5e-4);
    }

    fn random_network(n: usize, edge_prob: f64, seed: u64) -> Network {
        let ids: Vec<String> = (0..n).map(|i| format!("P{i}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < edge_prob {
                    edges.push((u, v));
                }
            }
        }
        Network::from_edges(ids, edges).unwrap()
    }

    #[test]
    fn split_matches_published_split_shape() {
        // a market-scale fixture: 388 nodes, 11110 edges, 10% held out
        let n = 388;
        let ids: Vec<String> = (0..n).map(|i| format!("P{i}")).collect();
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        all.shuffle(&mut rng);
        let network = Network::from_edges(ids, all.into_iter().take(11110)).unwrap();

        let split = split_edges(&network, 0.1, 99).unwrap();
        let test_pos = split.test.iter().filter(|p| p.exists).count();
        let test_neg = split.test.len() - test_pos;
        assert_eq!(test_pos, 1111);
        assert_eq!(test_neg, 1111);
        let train_pos = split.train.iter().filter(|p| p.exists).count();
        let train_neg = split.train.len() - train_pos;
        assert_eq!(train_pos, 9999);
        assert_eq!(train_neg, 9999);
        assert_eq!(split.train_graph.edge_count(), 9999);
    }

    #[test]
    fn split_removes_test_positives_from_training_graph() {
        let network = random_network(30, 0.3, 11);
        let split = split_edges(&network, 0.2, 4).unwrap();
        for p in &split.test {
            if p.exists {
                assert!(network.has_edge(p.u, p.v));
                assert!(!split.train_graph.has_edge(p.u, p.v));
            } else {
                assert!(!network.has_edge(p.u, p.v));
            }
        }
        for p in &split.train {
            assert_eq!(p.exists, network.has_edge(p.u, p.v));
            assert_eq!(p.exists, split.train_graph.has_edge(p.u, p.v));
        }
    }

    #[test]
    fn split_negatives_are_disjoint_between_sides() {
        let network = random_network(25, 0.3, 2);
        let split = split_edges(&network, 0.25, 8).unwrap();
        let key = |p: &LabeledPair| (p.u.min(p.v), p.u.max(p.v));
        let train_neg: HashSet<_> = split.train.iter().filter(|p| !p.exists).map(key).collect();
        for p in split.test.iter().filter(|p| !p.exists) {
            assert!(!train_neg.contains(&key(p)));
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let network = random_network(25, 0.3, 2);
        let a = split_edges(&network, 0.2, 42).unwrap();
        let b = split_edges(&network, 0.2, 42).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = split_edges(&network, 0.2, 43).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn split_rejects_graphs_too_dense_to_balance() {
        let network = random_network(8, 0.9, 13);
        assert!(network.edge_count() > 8 * 7 / 4);
        assert!(matches!(
            split_edges(&network, 0.2, 1),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let network = random_network(10, 0.4, 1);
        assert!(split_edges(&network, 0.0, 1).is_err());
        assert!(split_edges(&network, 1.0, 1).is_err());
    }

    #[test]
    fn choose_k_rounds_half_mean_degree() {
        // 58 nodes, mean degree 57: a complete graph
        let n = 58;
        let ids: Vec<String> = (0..n).map(|i| format!("P{i}")).collect();
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        let complete = Network::from_edges(ids, edges).unwrap();
        assert_eq!(complete.mean_degree(), 57.0);
        assert_eq!(choose_k(&complete), 29);

        // 4-regular ring on 10 nodes
        let ids: Vec<String> = (0..10).map(|i| format!("P{i}")).collect();
        let edges = (0..10usize).flat_map(|u| [(u, (u + 1) % 10), (u, (u + 2) % 10)]);
        let ring = Network::from_edges(ids, edges).unwrap();
        assert_eq!(ring.mean_degree(), 4.0);
        assert_eq!(choose_k(&ring), 2);

        let sparse = Network::from_edges(vec!["a".into(), "b".into()], vec![(0, 1)]).unwrap();
        assert_eq!(choose_k(&sparse), 1);
    }

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        let dim = rows[0].len();
        let ids = (0..rows.len()).map(|i| format!("P{i}")).collect();
        FeatureMatrix::new(
            ids,
            dim,
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn knn_prefers_duplicate_rows() {
        let m = matrix(&[
            &[1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 0.9, 0.1],
        ]);
        let network = knn_adjacency(&m, 1).unwrap();
        assert!(network.has_edge(0, 1));
        assert!(network.has_edge(2, 3));
        assert!(!network.has_edge(0, 2));
    }

    #[test]
    fn knn_with_k_equal_n_minus_one_is_complete() {
        let m = matrix(&[&[1.0, 0.1], &[0.5, 0.5], &[0.1, 1.0], &[0.7, 0.3]]);
        let network = knn_adjacency(&m, 3).unwrap();
        assert_eq!(network.edge_count(), 6);
    }

    #[test]
    fn knn_ties_break_toward_lower_index() {
        // node 0 is equidistant from nodes 1 and 2 (identical rows); the tie
        // must pick node 1
        let m = matrix(&[&[1.0, 0.0], &[0.8, 0.6], &[0.8, 0.6], &[0.0, 1.0]]);
        let network = knn_adjacency(&m, 1).unwrap();
        assert!(network.has_edge(0, 1));
    }

    #[test]
    fn knn_degrees_are_at_least_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix(&refs);
        for k in [1, 3, 7] {
            let network = knn_adjacency(&m, k).unwrap();
            for v in 0..m.len() {
                assert!(network.degree(v) >= k, "node {v} degree < {k}");
            }
        }
    }

    #[test]
    fn knn_matches_exhaustive_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix(&refs);
        let network = knn_adjacency(&m, 2).unwrap();

        // oracle: full sort per node, take 2, union
        let mut expected = HashSet::new();
        for u in 0..8 {
            let mut sims: Vec<(f64, usize)> = (0..8)
                .filter(|&v| v != u)
                .map(|v| (m.cosine(u, v), v))
                .collect();
            sims.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            for &(_, v) in sims.iter().take(2) {
                expected.insert((u.min(v), u.max(v)));
            }
        }
        let got: HashSet<(usize, usize)> = network.edges().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn knn_rejects_bad_k() {
        let m = matrix(&[&[1.0], &[0.5], &[0.2]]);
        assert!(knn_adjacency(&m, 0).is_err());
        assert!(knn_adjacency(&m, 3).is_err());
    }

    #[test]
    fn edge_list_round_trip_preserves_isolated_nodes() {
        let network = Network::from_edges(
            vec!["a b".into(), "lone".into(), "c,d".into()],
            vec![(0, 2)],
        )
        .unwrap();
        let back =
            Network::from_edge_list(&network.write_manifest(), &network.write_edge_list()).unwrap();
        assert_eq!(back.node_ids(), network.node_ids());
        assert_eq!(
            back.edges().collect::<Vec<_>>(),
            network.edges().collect::<Vec<_>>()
        );
        assert_eq!(back.degree(1), 0);
    }

    #[test]
    fn from_edges_rejects_self_loops_and_range_errors() {
        assert!(Network::from_edges(vec!["a".into(), "b".into()], vec![(0, 0)]).is_err());
        assert!(Network::from_edges(vec!["a".into(), "b".into()], vec![(0, 5)]).is_err());
        assert!(Network::from_edges(vec!["a".into(), "a".into()], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn built_networks_are_symmetric_with_zero_diagonal(
            sets in proptest::collection::vec(
                proptest::collection::btree_set(0usize..8, 1..4), 1..25),
            cutoff in 1u32..3,
        ) {
            let ids: Vec<&str> = vec!["A", "B", "C", "D", "E", "F", "G", "H"];
            let records: Vec<ConsiderationRecord> = sets
                .iter()
                .enumerate()
                .map(|(c, set)| {
                    rec(
                        &format!("c{c}"),
                        &set.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
                    )
                })
                .collect();
            let network = build_network(&records, &prods(&ids), cutoff).unwrap();
            for u in 0..network.node_count() {
                prop_assert!(!network.has_edge(u, u));
                for &v in network.neighbors(u) {
                    prop_assert!(network.has_edge(v, u));
                }
            }
            // and the count/threshold relation holds in both directions
            for u in 0..network.node_count() {
                for v in u + 1..network.node_count() {
                    prop_assert_eq!(
                        network.has_edge(u, v),
                        network.pair_count(u, v) >= cutoff
                    );
                }
            }
        }

        #[test]
        fn split_keeps_exact_class_balance(seed in 0u64..500) {
            let network = random_network(20, 0.35, seed);
            if network.edge_count() == 0 { return Ok(()); }
            if let Ok(split) = split_edges(&network, 0.3, seed) {
                let pos = split.train.iter().filter(|p| p.exists).count();
                prop_assert_eq!(pos * 2, split.train.len());
                let tpos = split.test.iter().filter(|p| p.exists).count();
                prop_assert_eq!(tpos * 2, split.test.len());
            }
        }
    }
}
