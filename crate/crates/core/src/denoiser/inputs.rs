//! Sparse operators the networks consume: one-hot encodings and the
//! self-inclusive mean aggregation matrix.

use std::sync::Arc;

use crate::graphdata::AttributedGraph;
use crate::SparseMatrix;

/// Concatenated one-hot encoding of categorical columns, `n x sum(C_f)`.
pub fn one_hot(values: &[u32], cardinalities: &[usize]) -> SparseMatrix {
    let f = cardinalities.len();
    let width: usize = cardinalities.iter().sum();
    let n = if f == 0 { 0 } else { values.len() / f };
    let mut offsets = Vec::with_capacity(f);
    let mut acc = 0;
    for &c in cardinalities {
        offsets.push(acc);
        acc += c;
    }
    let rows = (0..n)
        .map(|v| {
            (0..f)
                .map(|j| (offsets[j] + values[v * f + j] as usize, 1.0))
                .collect()
        })
        .collect();
    SparseMatrix::from_rows(width, rows)
}

/// Row-normalized adjacency with self-loops: row `v` averages over `N(v) + {v}`.
pub fn mean_adjacency(g: &AttributedGraph) -> SparseMatrix {
    let rows = (0..g.n())
        .map(|v| {
            let nb = g.neighbors(v);
            let w = 1.0 / (nb.len() + 1) as f64;
            let at = nb.partition_point(|&u| u < v);
            let mut row = Vec::with_capacity(nb.len() + 1);
            row.extend(nb[..at].iter().map(|&u| (u, w)));
            row.push((v, w));
            row.extend(nb[at..].iter().map(|&u| (u, w)));
            row
        })
        .collect();
    SparseMatrix::from_rows(g.n(), rows)
}

/// Everything an encoder reads from one (possibly noisy) graph.
#[derive(Clone, Debug)]
pub struct GraphInputs {
    pub n: usize,
    pub attrs: Arc<SparseMatrix>,
    pub labels: Option<Arc<SparseMatrix>>,
    pub adj: Arc<SparseMatrix>,
}

impl GraphInputs {
    /// Attributes from `attrs` (row-major, schema of `g`), structure from `g`,
    /// and optionally one-hot labels with `num_labels` classes.
    pub fn new(g: &AttributedGraph, attrs: &[u32], labels: Option<(&[u32], usize)>) -> Self {
        Self {
            n: g.n(),
            attrs: Arc::new(one_hot(attrs, g.cardinalities())),
            labels: labels.map(|(y, c)| Arc::new(one_hot(y, &[c]))),
            adj: Arc::new(mean_adjacency(g)),
        }
    }

    /// Attribute-only inputs for structure-free networks.
    pub fn attributes_only(
        attrs: &[u32],
        cardinalities: &[usize],
        labels: Option<(&[u32], usize)>,
    ) -> Self {
        let a = one_hot(attrs, cardinalities);
        let n = a.rows();
        Self {
            n,
            attrs: Arc::new(a),
            labels: labels.map(|(y, c)| Arc::new(one_hot(y, &[c]))),
            adj: Arc::new(SparseMatrix::from_rows(
                n,
                (0..n).map(|v| vec![(v, 1.0)]).collect(),
            )),
        }
    }
}
