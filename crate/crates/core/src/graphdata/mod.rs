//! Attributed graphs, their on-disk format, marginals, splits, and subgraphs.

mod io;
mod pairs;
mod split;

use std::collections::VecDeque;

use rand::seq::index;

pub use io::{load_graph, save_graph};
pub use pairs::{num_pairs, pair_at, pair_index, sample_distinct_pairs};
pub use split::{edge_split, node_split, node_split_matching, EdgeSplit, NodeSplit, SplitSpec};

use crate::error::{Error, Result};
use crate::rng;

/// Undirected graph with categorical node attributes and optional labels.
///
/// Edges are kept as a sorted list of canonical `(u, v)` pairs with `u < v`,
/// plus a CSR neighbor index with sorted neighbor lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributedGraph {
    name: String,
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    cardinalities: Vec<usize>,
    attrs: Vec<u32>,
    labels: Option<Vec<u32>>,
    num_labels: usize,
}

/// Empirical marginals of attributes and of edge existence over unordered pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    pub attr: Vec<Vec<f64>>,
    pub edge: [f64; 2],
}

impl AttributedGraph {
    /// Validates and canonicalizes: edges become `u < v`, sorted, deduplicated.
    ///
    /// `attrs` is row-major `n x cardinalities.len()`. Labels, when given, come
    /// with the number of label classes.
    pub fn new(
        name: impl Into<String>,
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        cardinalities: Vec<usize>,
        attrs: Vec<u32>,
        labels: Option<(usize, Vec<u32>)>,
    ) -> Result<Self> {
        let f = cardinalities.len();
        if let Some(&c) = cardinalities.iter().find(|&&c| c < 2) {
            return Err(Error::InvalidGraph(format!(
                "attribute cardinality {c} below 2"
            )));
        }
        if attrs.len() != n * f {
            return Err(Error::InvalidGraph(format!(
                "expected {} attribute values, got {}",
                n * f,
                attrs.len()
            )));
        }
        for (i, &a) in attrs.iter().enumerate() {
            if a as usize >= cardinalities[i % f] {
                return Err(Error::InvalidGraph(format!(
                    "node {} attribute {} has class {a}, cardinality {}",
                    i / f,
                    i % f,
                    cardinalities[i % f]
                )));
            }
        }
        let (num_labels, labels) = match labels {
            Some((c, y)) => {
                if y.len() != n {
                    return Err(Error::InvalidGraph(format!(
                        "expected {n} labels, got {}",
                        y.len()
                    )));
                }
                if let Some(&bad) = y.iter().find(|&&l| l as usize >= c) {
                    return Err(Error::InvalidGraph(format!("label {bad} not below {c}")));
                }
                (c, Some(y))
            }
            None => (0, None),
        };
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) outside {n} nodes"
                )));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        let (offsets, neighbors) = build_csr(n, &canon);
        Ok(Self {
            name: name.into(),
            n,
            edges: canon,
            offsets,
            neighbors,
            cardinalities,
            attrs,
            labels,
            num_labels,
        })
    }

    /// Same nodes, attributes and labels with a different edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.n,
            edges,
            self.cardinalities.clone(),
            self.attrs.clone(),
            self.label_pair(),
        )
    }

    pub fn without_labels(&self) -> Self {
        let mut g = self.clone();
        g.labels = None;
        g.num_labels = 0;
        g
    }

    pub(crate) fn label_pair(&self) -> Option<(usize, Vec<u32>)> {
        self.labels.clone().map(|y| (self.num_labels, y))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbors of `v`, excluding `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn num_attrs(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    /// Width of the concatenated one-hot attribute encoding.
    pub fn one_hot_width(&self) -> usize {
        self.cardinalities.iter().sum()
    }

    pub fn attrs(&self) -> &[u32] {
        &self.attrs
    }

    pub fn attr_row(&self, v: usize) -> &[u32] {
        let f = self.num_attrs();
        &self.attrs[v * f..(v + 1) * f]
    }

    pub fn attr(&self, v: usize, f: usize) -> u32 {
        self.attrs[v * self.num_attrs() + f]
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Empirical label distribution, if labeled.
    pub fn label_distribution(&self) -> Option<Vec<f64>> {
        let y = self.labels.as_ref()?;
        let mut p = vec![0.0; self.num_labels];
        for &l in y {
            p[l as usize] += 1.0;
        }
        let total = y.len().max(1) as f64;
        p.iter_mut().for_each(|x| *x /= total);
        Some(p)
    }

    /// Same attribute schema: equal counts and cardinalities.
    pub fn same_schema(&self, other: &Self) -> bool {
        self.cardinalities == other.cardinalities
    }

    /// Nodes within `k` hops of `v`, `v` excluded, sorted.
    pub fn khop_neighbors(&self, v: usize, k: usize) -> Vec<usize> {
        khop_neighbors(self, v, k)
    }
}

fn build_csr(n: usize, edges: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    let mut deg = vec![0usize; n];
    for &(u, v) in edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    for d in &deg {
        offsets.push(offsets.last().unwrap() + d);
    }
    let mut fill = offsets[..n].to_vec();
    let mut neighbors = vec![0; offsets[n]];
    for &(u, v) in edges {
        neighbors[fill[u]] = v;
        fill[u] += 1;
        neighbors[fill[v]] = u;
        fill[v] += 1;
    }
    // sorted input edges already yield sorted neighbor lists
    debug_assert!((0..n).all(|v| neighbors[offsets[v]..offsets[v + 1]].is_sorted()));
    (offsets, neighbors)
}

/// Attribute and edge marginals of `g`.
pub fn empirical_marginals(g: &AttributedGraph) -> Marginals {
    let f = g.num_attrs();
    let mut attr: Vec<Vec<f64>> = g.cardinalities().iter().map(|&c| vec![0.0; c]).collect();
    for v in 0..g.n() {
        for (j, &a) in g.attr_row(v).iter().enumerate() {
            attr[j][a as usize] += 1.0;
        }
    }
    let n = g.n().max(1) as f64;
    for col in attr.iter_mut().take(f) {
        col.iter_mut().for_each(|x| *x /= n);
    }
    let pairs = num_pairs(g.n());
    let p = if pairs == 0 {
        0.0
    } else {
        g.num_edges() as f64 / pairs as f64
    };
    Marginals {
        attr,
        edge: [1.0 - p, p],
    }
}

/// Nodes at shortest-path distance `1..=k` from `v`, sorted.
pub fn khop_neighbors(g: &AttributedGraph, v: usize, k: usize) -> Vec<usize> {
    let mut dist = std::collections::HashMap::new();
    dist.insert(v, 0usize);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d == k {
            continue;
        }
        for &w in g.neighbors(u) {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    let mut out: Vec<usize> = dist.into_keys().filter(|&u| u != v).collect();
    out.sort_unstable();
    out
}

/// Subgraph induced by `m` edges drawn uniformly without replacement.
///
/// Nodes are the endpoints of the drawn edges, relabeled in increasing
/// original order.
pub fn edge_induced_subsample(g: &AttributedGraph, m: usize, seed: u64) -> Result<AttributedGraph> {
    if m > g.num_edges() {
        return Err(Error::Argument(format!(
            "cannot draw {m} edges from a graph with {}",
            g.num_edges()
        )));
    }
    let mut r = rng::stream(seed, &[rng::tag("edge_subsample")]);
    let mut picked: Vec<(usize, usize)> = index::sample(&mut r, g.num_edges(), m)
        .into_iter()
        .map(|i| g.edges()[i])
        .collect();
    picked.sort_unstable();
    let mut nodes: Vec<usize> = picked.iter().flat_map(|&(u, v)| [u, v]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut remap = vec![usize::MAX; g.n()];
    for (i, &v) in nodes.iter().enumerate() {
        remap[v] = i;
    }
    let attrs = nodes
        .iter()
        .flat_map(|&v| g.attr_row(v).iter().copied())
        .collect();
    let labels = g
        .labels()
        .map(|y| (g.num_labels(), nodes.iter().map(|&v| y[v]).collect()));
    AttributedGraph::new(
        g.name(),
        nodes.len(),
        picked.into_iter().map(|(u, v)| (remap[u], remap[v])),
        g.cardinalities().to_vec(),
        attrs,
        labels,
    )
}
