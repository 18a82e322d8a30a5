//! Reference generators: uniform random structure with a matched edge count
//! and attributes drawn from empirical marginals.

use crate::error::{Error, Result};
use crate::graphdata::{num_pairs, sample_distinct_pairs, AttributedGraph};
use crate::rng;

/// `m` distinct unordered pairs chosen uniformly among `n` nodes.
pub fn er_generate(n: usize, m: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if m as u64 > num_pairs(n) {
        return Err(Error::Argument(format!(
            "{m} edges do not fit on {n} nodes (at most {})",
            num_pairs(n)
        )));
    }
    let mut r = rng::stream(seed, &[rng::tag("er")]);
    sample_distinct_pairs(n, m as u64, 0, |_, _| false, None, &mut r)
}

fn inverse_cdf(counts: &[f64], total: f64, u: f64) -> u32 {
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > 0.0 {
            acc += c;
            last = k;
            if target < acc {
                return k as u32;
            }
        }
    }
    last as u32
}

/// Per-attribute class counts among nodes selected by `keep`.
fn attr_counts(g: &AttributedGraph, keep: impl Fn(usize) -> bool) -> Vec<Vec<f64>> {
    let mut counts: Vec<Vec<f64>> = g.cardinalities().iter().map(|&c| vec![0.0; c]).collect();
    for v in (0..g.n()).filter(|&v| keep(v)) {
        for (j, &x) in g.attr_row(v).iter().enumerate() {
            counts[j][x as usize] += 1.0;
        }
    }
    counts
}

/// Attributes (and labels when `conditional`) for `n_hat` nodes drawn from
/// the empirical marginals of `g`: labels from `p(Y)` and attributes from
/// `p(X_f | Y)`, or from `p(X_f)` when unconditional. A label class with no
/// nodes falls back to one pseudo-count per attribute class.
pub fn marginal_attr_generate(
    g: &AttributedGraph,
    conditional: bool,
    n_hat: usize,
    seed: u64,
) -> Result<(Vec<u32>, Option<Vec<u32>>)> {
    let f = g.num_attrs();
    let label_key = rng::derive(seed, &[rng::tag("marginal_label")]);
    let attr_key = rng::derive(seed, &[rng::tag("marginal_attr")]);
    let draw = |tables: &[Vec<f64>], v: usize, out: &mut Vec<u32>| {
        for (j, counts) in tables.iter().enumerate() {
            let total: f64 = counts.iter().sum();
            let u = rng::keyed_uniform(attr_key, &[(v * f + j) as u64]);
            out.push(inverse_cdf(counts, total, u));
        }
    };
    let mut attrs = Vec::with_capacity(n_hat * f);
    if !conditional {
        let tables = attr_counts(g, |_| true);
        for v in 0..n_hat {
            draw(&tables, v, &mut attrs);
        }
        return Ok((attrs, None));
    }
    let y = g
        .labels()
        .ok_or_else(|| Error::Config("conditional marginals need labels".into()))?;
    let classes = g.num_labels();
    let mut label_counts = vec![0.0; classes];
    y.iter().for_each(|&k| label_counts[k as usize] += 1.0);
    let tables: Vec<Vec<Vec<f64>>> = (0..classes)
        .map(|k| {
            let mut t = attr_counts(g, |v| y[v] as usize == k);
            if label_counts[k] == 0.0 {
                t.iter_mut()
                    .for_each(|c| c.iter_mut().for_each(|x| *x = 1.0));
            }
            t
        })
        .collect();
    let labels: Vec<u32> = (0..n_hat)
        .map(|v| {
            inverse_cdf(
                &label_counts,
                y.len() as f64,
                rng::keyed_uniform(label_key, &[v as u64]),
            )
        })
        .collect();
    for (v, &k) in labels.iter().enumerate() {
        draw(&tables[k as usize], v, &mut attrs);
    }
    Ok((attrs, Some(labels)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    /// Random structure, original attributes and labels.
    Er,
    /// Original structure, resampled attributes.
    Marginal,
    ErMarginal,
}

impl BaselineKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "er" => Some(Self::Er),
            "marginal" => Some(Self::Marginal),
            "er+marginal" => Some(Self::ErMarginal),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Er => "er",
            Self::Marginal => "marginal",
            Self::ErMarginal => "er+marginal",
        }
    }
}

/// A whole baseline graph with the node count and edge budget of `g`.
/// Unconditional attribute sampling drops labels.
pub fn baseline_graph(
    g: &AttributedGraph,
    kind: BaselineKind,
    conditional: bool,
    seed: u64,
) -> Result<AttributedGraph> {
    let edges = match kind {
        BaselineKind::Marginal => g.edges().to_vec(),
        _ => er_generate(g.n(), g.num_edges(), seed)?,
    };
    let (attrs, labels) = match kind {
        BaselineKind::Er => (g.attrs().to_vec(), g.labels().map(<[u32]>::to_vec)),
        _ => marginal_attr_generate(g, conditional, g.n(), seed)?,
    };
    let name = format!("{}-{}-{}", g.name(), kind.name(), seed);
    AttributedGraph::new(
        name,
        g.n(),
        edges,
        g.cardinalities().to_vec(),
        attrs,
        labels.map(|y| (g.num_labels(), y)),
    )
}
