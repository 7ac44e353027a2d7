//! Fixed-fanout neighborhood sampling.
//!
//! Embedding a node at depth `d` needs the node, a sample of its neighbors,
//! a sample of each of *their* neighbors, and so on `d` levels deep. The
//! samples are drawn uniformly with replacement, so every node at every
//! level has exactly the configured fanout and the whole tree flattens into
//! fixed-size levels: level `t` holds `branching[0] * .. * branching[t-1]`
//! node indices, and the children of position `p` at level `t` occupy
//! positions `p*b .. (p+1)*b` at level `t+1` where `b = branching[t]`.
//!
//! After drawing, the tree is put into a canonical order (siblings sorted
//! by their whole subtree). Mean aggregation then adds floats in an order
//! that depends only on the multiset of draws, never on the sequence the
//! generator produced them in, which keeps embeddings reproducible across
//! refactorings of the sampler.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::network::Network;
use crate::{Error, Result};

/// A sampled neighborhood tree, stored level by level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSample {
    pub root: usize,
    /// `levels[t]` lists the nodes at depth `t + 1`; the root is not stored.
    pub levels: Vec<Vec<usize>>,
    /// Fanout at each depth, outermost first.
    pub branching: Vec<usize>,
}

impl NodeSample {
    /// Assemble a sample from pre-drawn levels, checking the fanout
    /// arithmetic, then canonicalize sibling order.
    pub fn from_levels(
        root: usize,
        levels: Vec<Vec<usize>>,
        branching: Vec<usize>,
    ) -> Result<Self> {
        if levels.len() != branching.len() {
            return Err(Error::Dimension(format!(
                "{} levels vs {} branching factors",
                levels.len(),
                branching.len()
            )));
        }
        let mut expected = 1usize;
        for (t, (level, &b)) in levels.iter().zip(&branching).enumerate() {
            if b == 0 {
                return Err(Error::Dimension("branching factor must be positive".into()));
            }
            expected *= b;
            if level.len() != expected {
                return Err(Error::Dimension(format!(
                    "level {t} has {} nodes, expected {expected}",
                    level.len()
                )));
            }
        }
        let mut sample = NodeSample {
            root,
            levels,
            branching,
        };
        sample.canonicalize();
        Ok(sample)
    }

    /// Nodes at depth `t + 1`.
    pub fn level(&self, t: usize) -> &[usize] {
        &self.levels[t]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Children of position `p` at level `t` live at `t + 1`.
    pub fn children(&self, t: usize, p: usize) -> &[usize] {
        let b = self.branching[t + 1];
        &self.levels[t + 1][p * b..(p + 1) * b]
    }

    /// Sort every sibling group by its full subtree so that two samples with
    /// the same draws (in any order) are identical structures.
    fn canonicalize(&mut self) {
        if self.levels.is_empty() {
            return;
        }
        let trees = self.subtrees(0, 0, self.branching[0]);
        let mut sorted = trees;
        sorted.sort();
        self.write_back(&sorted, 0, 0);
    }

    /// Nested form of the subtrees rooted at positions `start..start + count`
    /// of level `t`, each sorted internally.
    fn subtrees(&self, t: usize, start: usize, count: usize) -> Vec<Tree> {
        (start..start + count)
            .map(|p| {
                let children = if t + 1 < self.levels.len() {
                    let b = self.branching[t + 1];
                    let mut kids = self.subtrees(t + 1, p * b, b);
                    kids.sort();
                    kids
                } else {
                    Vec::new()
                };
                Tree {
                    node: self.levels[t][p],
                    children,
                }
            })
            .collect()
    }

    /// Write a sorted forest back into the flat levels, depth-first.
    fn write_back(&mut self, trees: &[Tree], t: usize, start: usize) {
        for (i, tree) in trees.iter().enumerate() {
            let p = start + i;
            self.levels[t][p] = tree.node;
            if !tree.children.is_empty() {
                let b = self.branching[t + 1];
                self.write_back(&tree.children, t + 1, p * b);
            }
        }
    }
}

/// Recursive view used only while canonicalizing. Ordering is lexicographic
/// by `(node, children)`, which is exactly the canonical sibling order.
#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Tree {
    node: usize,
    children: Vec<Tree>,
}

/// Draw the neighborhood tree for `root`. Neighbors are sampled uniformly
/// with replacement; a node with no neighbors contributes itself, so the
/// tree shape never degenerates.
pub fn sample_neighborhood(
    network: &Network,
    root: usize,
    branching: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<NodeSample> {
    if root >= network.node_count() {
        return Err(Error::Validation(format!(
            "node index {root} out of range for {} nodes",
            network.node_count()
        )));
    }
    let mut levels: Vec<Vec<usize>> = Vec::with_capacity(branching.len());
    let mut frontier = vec![root];
    for &b in branching {
        if b == 0 {
            return Err(Error::Dimension("branching factor must be positive".into()));
        }
        let mut level = Vec::with_capacity(frontier.len() * b);
        for &node in &frontier {
            let neighbors = network.neighbors(node);
            if neighbors.is_empty() {
                level.extend(std::iter::repeat_n(node, b));
            } else {
                for _ in 0..b {
                    level.push(neighbors[rng.random_range(0..neighbors.len())]);
                }
            }
        }
        frontier = level.clone();
        levels.push(level);
    }
    NodeSample::from_levels(root, levels, branching.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;
    use rand::SeedableRng;

    fn path_network() -> Network {
        // 0 - 1 - 2, plus isolated 3
        Network::from_edges(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            [(0, 1), (1, 2)],
        )
        .unwrap()
    }

    #[test]
    fn levels_have_product_sizes() {
        let net = path_network();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample_neighborhood(&net, 1, &[3, 2], &mut rng).unwrap();
        assert_eq!(s.level(0).len(), 3);
        assert_eq!(s.level(1).len(), 6);
        assert_eq!(s.children(0, 2), &s.level(1)[4..6]);
    }

    #[test]
    fn single_neighbor_fills_every_slot() {
        let net = path_network();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample_neighborhood(&net, 0, &[5], &mut rng).unwrap();
        assert_eq!(s.level(0), &[1, 1, 1, 1, 1]);
    }

    #[test]
    fn isolated_node_samples_itself() {
        let net = path_network();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample_neighborhood(&net, 3, &[4, 2], &mut rng).unwrap();
        assert!(s.level(0).iter().all(|&n| n == 3));
        assert!(s.level(1).iter().all(|&n| n == 3));
    }

    #[test]
    fn sampling_is_unbiased() {
        // draw many single-level samples from a 4-neighbor hub and check
        // each neighbor's count against a 3-sigma binomial band
        let net = Network::from_edges(
            (0..5).map(|i| i.to_string()).collect(),
            [(0, 1), (0, 2), (0, 3), (0, 4)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000usize;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            let s = sample_neighborhood(&net, 0, &[1], &mut rng).unwrap();
            counts[s.level(0)[0]] += 1;
        }
        assert_eq!(counts[0], 0);
        let p = 0.25;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts[1..] {
            assert!(
                (c as f64 - draws as f64 * p).abs() < 3.0 * sigma,
                "neighbor count {c} outside 3-sigma band"
            );
        }
    }

    #[test]
    fn canonical_order_ignores_draw_order() {
        let levels_a = vec![vec![2, 1, 1], vec![5, 6, 3, 4, 4, 3]];
        let levels_b = vec![vec![1, 1, 2], vec![4, 3, 3, 4, 6, 5]];
        let a = NodeSample::from_levels(0, levels_a, vec![3, 2]).unwrap();
        let b = NodeSample::from_levels(0, levels_b, vec![3, 2]).unwrap();
        assert_eq!(a, b);
        // subtrees travel with their roots: the '1' with children {3,4}
        // stays distinct from the '1' with children {4,3} only by order,
        // so both collapse to the same canonical tree
        assert_eq!(a.level(0), &[1, 1, 2]);
        assert_eq!(a.level(1), &[3, 4, 3, 4, 5, 6]);
    }

    #[test]
    fn siblings_sort_by_subtree_not_just_node() {
        // two siblings share node id 7 but have different children; the one
        // with the lexicographically smaller child list must come first
        let levels = vec![vec![7, 7], vec![9, 8]];
        let s = NodeSample::from_levels(0, levels, vec![2, 1]).unwrap();
        assert_eq!(s.level(0), &[7, 7]);
        assert_eq!(s.level(1), &[8, 9]);
    }

    #[test]
    fn from_levels_checks_arithmetic() {
        assert!(NodeSample::from_levels(0, vec![vec![1, 2]], vec![3]).is_err());
        assert!(NodeSample::from_levels(0, vec![vec![1]], vec![1, 2]).is_err());
        assert!(NodeSample::from_levels(0, vec![vec![]], vec![0]).is_err());
    }

    #[test]
    fn out_of_range_root_is_rejected() {
        let net = path_network();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(sample_neighborhood(&net, 9, &[2], &mut rng).is_err());
    }
}
