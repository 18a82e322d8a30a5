//! Deterministic node and edge partitions for discriminative evaluation.

use std::collections::HashSet;

use rand::seq::SliceRandom;

use super::{pair_index, sample_distinct_pairs, AttributedGraph};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Positive pairs partitioned on canonical `u < v` order, with equally many
/// negatives for validation and test.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct EdgeSplit {
    pub train: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SplitSpec {
    pub node: Option<NodeSplit>,
    pub edge: Option<EdgeSplit>,
    pub seed: u64,
}

impl NodeSplit {
    /// Per-class node counts of `(train, val, test)`.
    pub fn class_counts(&self, labels: &[u32], num_classes: usize) -> [Vec<usize>; 3] {
        let count = |set: &[usize]| {
            let mut c = vec![0; num_classes];
            for &v in set {
                c[labels[v] as usize] += 1;
            }
            c
        };
        [count(&self.train), count(&self.val), count(&self.test)]
    }
}

impl EdgeSplit {
    /// `g` restricted to the training positives, for message passing.
    pub fn train_graph(&self, g: &AttributedGraph) -> Result<AttributedGraph> {
        g.with_edges(self.train.iter().copied())
    }
}

fn shuffled_nodes(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag("node_split")]));
    order
}

fn labels_of(g: &AttributedGraph) -> Result<&[u32]> {
    g.labels()
        .ok_or_else(|| Error::Config("node split requires labels".into()))
}

/// `per_class_train` training nodes for every class, then `val` and `test`
/// nodes drawn uniformly from the rest.
pub fn node_split(
    g: &AttributedGraph,
    per_class_train: usize,
    val: usize,
    test: usize,
    seed: u64,
) -> Result<NodeSplit> {
    let y = labels_of(g)?;
    let mut sizes = vec![0usize; g.num_labels()];
    for &l in y {
        sizes[l as usize] += 1;
    }
    if let Some((c, &s)) = sizes.iter().enumerate().find(|(_, &s)| s < per_class_train) {
        return Err(Error::Config(format!(
            "class {c} has {s} nodes, fewer than {per_class_train} training nodes per class"
        )));
    }
    let remaining = g.n() - per_class_train * sizes.len();
    if val + test > remaining {
        return Err(Error::Config(format!(
            "{val} validation + {test} test nodes exceed the {remaining} nodes left after training"
        )));
    }
    let mut taken = vec![0usize; sizes.len()];
    let mut split = NodeSplit::default();
    let mut rest = Vec::with_capacity(remaining);
    for v in shuffled_nodes(g.n(), seed) {
        let c = y[v] as usize;
        if taken[c] < per_class_train {
            taken[c] += 1;
            split.train.push(v);
        } else {
            rest.push(v);
        }
    }
    split.val = rest[..val].to_vec();
    split.test = rest[val..val + test].to_vec();
    Ok(split)
}

/// Split of `g` with the given per-class counts in each subset, drawn with
/// the same shuffling as [`node_split`]. Applied to the graph a split came
/// from, with that split's counts and seed, it reproduces the split exactly.
///
/// A class with too few nodes fills training first, then validation, then
/// test. A class that is needed but absent is a protocol error.
pub fn node_split_matching(
    g: &AttributedGraph,
    counts: &[Vec<usize>; 3],
    seed: u64,
) -> Result<NodeSplit> {
    let y = labels_of(g)?;
    let classes = counts[0].len();
    let mut available = vec![0usize; classes.max(g.num_labels())];
    for &l in y {
        available[l as usize] += 1;
    }
    for c in 0..classes {
        let need = counts[0][c] + counts[1][c] + counts[2][c];
        if need > 0 && available[c] == 0 {
            return Err(Error::Protocol(format!(
                "class {c} is absent from {}",
                g.name()
            )));
        }
    }
    let mut left = counts.clone();
    let mut split = NodeSplit::default();
    for v in shuffled_nodes(g.n(), seed) {
        let c = y[v] as usize;
        if c >= classes {
            continue;
        }
        let targets = [&mut split.train, &mut split.val, &mut split.test];
        for (slot, target) in targets.into_iter().enumerate() {
            if left[slot][c] > 0 {
                left[slot][c] -= 1;
                target.push(v);
                break;
            }
        }
    }
    Ok(split)
}

fn subset_size(frac: f64, total: usize) -> usize {
    if frac <= 0.0 {
        0
    } else {
        ((frac * total as f64).floor() as usize).max(1)
    }
}

/// Partitions the edges into train/val/test positives and attaches equally
/// many distinct non-edge negatives to val and test.
pub fn edge_split(
    g: &AttributedGraph,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
) -> Result<EdgeSplit> {
    if !(0.0..1.0).contains(&val_frac)
        || !(0.0..1.0).contains(&test_frac)
        || val_frac + test_frac >= 1.0
    {
        return Err(Error::Config(format!(
            "edge split fractions {val_frac} + {test_frac} must be nonnegative and sum below 1"
        )));
    }
    let e = g.num_edges();
    let n_val = subset_size(val_frac, e);
    let n_test = subset_size(test_frac, e);
    if n_val + n_test >= e.max(1) {
        return Err(Error::Config(format!(
            "graph with {e} edges is too small for the requested edge split"
        )));
    }
    let mut r = rng::stream(seed, &[rng::tag("edge_split")]);
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut r);
    let mut val_pos = edges[..n_val].to_vec();
    let mut test_pos = edges[n_val..n_val + n_test].to_vec();
    let mut train = edges[n_val + n_test..].to_vec();
    let needed = (n_val + n_test) as u64;
    let mut negatives = sample_distinct_pairs(
        g.n(),
        needed,
        e as u64,
        |u, v| g.has_edge(u, v),
        Some(100 * needed.max(1)),
        &mut r,
    )?;
    // sorted on return, so shuffle before dealing out
    negatives.shuffle(&mut r);
    let mut val_neg = negatives[..n_val].to_vec();
    let mut test_neg = negatives[n_val..].to_vec();
    for s in [
        &mut train,
        &mut val_pos,
        &mut test_pos,
        &mut val_neg,
        &mut test_neg,
    ] {
        s.sort_unstable();
    }
    debug_assert!({
        let a: HashSet<u64> = val_neg
            .iter()
            .map(|&(u, v)| pair_index(g.n(), u, v))
            .collect();
        test_neg
            .iter()
            .all(|&(u, v)| !a.contains(&pair_index(g.n(), u, v)))
    });
    Ok(EdgeSplit {
        train,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}
