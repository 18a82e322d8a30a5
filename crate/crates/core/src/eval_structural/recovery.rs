//! How closely generated attributes reproduce the original nodes and their
//! neighborhoods.

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphdata::{khop_neighbors, AttributedGraph};
use crate::rng;

/// Largest neighborhood compared exhaustively; bigger ones are subsampled.
pub const KHOP_CAP: usize = 200;

/// Number of differing attributes, or any value `>= bound` once the count
/// reaches `bound`.
fn mismatches(a: &[u32], b: &[u32], bound: usize) -> usize {
    let mut c = 0;
    for (x, y) in a.chunks(64).zip(b.chunks(64)) {
        c += x.iter().zip(y).filter(|(p, q)| p != q).count();
        if c >= bound {
            break;
        }
    }
    c
}

/// Most similar generated node for every original node.
#[derive(Clone, Debug, PartialEq)]
pub struct AttrMatching {
    pub pi: Vec<usize>,
    /// Nodes whose label is absent from the generated graph and were matched
    /// against all generated nodes instead.
    pub fallback: Vec<bool>,
    /// Attribute mismatches between each node and its match.
    pub distance: Vec<usize>,
}

fn check_pair<'a>(
    g: &'a AttributedGraph,
    h: &'a AttributedGraph,
) -> Result<(&'a [u32], &'a [u32])> {
    let (Some(y), Some(yh)) = (g.labels(), h.labels()) else {
        return Err(Error::Argument(
            "recovery metrics need labels on both graphs".into(),
        ));
    };
    if g.cardinalities() != h.cardinalities() {
        return Err(Error::Argument(
            "graphs have different attribute schemas".into(),
        ));
    }
    if h.n() == 0 {
        return Err(Error::Argument(format!("{} has no nodes", h.name())));
    }
    Ok((y, yh))
}

/// Matches each node of `g` to the same-label node of `h` with the fewest
/// differing attributes, lowest index first among ties.
pub fn attr_matching(g: &AttributedGraph, h: &AttributedGraph) -> Result<AttrMatching> {
    let (y, yh) = check_pair(g, h)?;
    let classes = g.num_labels().max(h.num_labels());
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (u, &k) in yh.iter().enumerate() {
        by_label[k as usize].push(u);
    }
    let everyone: Vec<usize> = (0..h.n()).collect();
    let rows: Vec<(usize, bool, usize)> = (0..g.n())
        .into_par_iter()
        .map(|v| {
            let own = &by_label[y[v] as usize];
            let (cands, fallback) = if own.is_empty() {
                (&everyone, true)
            } else {
                (own, false)
            };
            let row = g.attr_row(v);
            let mut best = (usize::MAX, usize::MAX);
            for &u in cands {
                let d = mismatches(row, h.attr_row(u), best.0);
                if d < best.0 {
                    best = (d, u);
                    if d == 0 {
                        break;
                    }
                }
            }
            (best.1, fallback, best.0)
        })
        .collect();
    Ok(AttrMatching {
        pi: rows.iter().map(|r| r.0).collect(),
        fallback: rows.iter().map(|r| r.1).collect(),
        distance: rows.iter().map(|r| r.2).collect(),
    })
}

/// Mean one-hot L1 distance between each node and its match, per attribute.
pub fn recovery_attr(g: &AttributedGraph, h: &AttributedGraph) -> Result<f64> {
    let m = attr_matching(g, h)?;
    Ok(attr_score(g, &m))
}

fn attr_score(g: &AttributedGraph, m: &AttrMatching) -> f64 {
    let cells = (g.n() * g.num_attrs()).max(1) as f64;
    2.0 * m.distance.iter().sum::<usize>() as f64 / cells
}

fn capped(g: &AttributedGraph, v: usize, k: usize, side: u64, seed: u64) -> Vec<usize> {
    let all = khop_neighbors(g, v, k);
    if all.len() <= KHOP_CAP {
        return all;
    }
    let mut r = rng::stream(seed, &[rng::tag("khop"), side, v as u64]);
    let mut pick: Vec<usize> = index::sample(&mut r, all.len(), KHOP_CAP)
        .into_iter()
        .map(|i| all[i])
        .collect();
    pick.sort_unstable();
    pick
}

/// Mean over nodes of the closest one-hot L1 distance between a `k`-hop
/// neighbor of the node and a `k`-hop neighbor of its match, per attribute.
/// Nodes with an empty neighborhood on either side are skipped.
pub fn recovery_khop(
    g: &AttributedGraph,
    h: &AttributedGraph,
    m: &AttrMatching,
    k: usize,
    seed: u64,
) -> Result<f64> {
    check_pair(g, h)?;
    if !(1..=2).contains(&k) {
        return Err(Error::Argument(format!("k must be 1 or 2, got {k}")));
    }
    if m.pi.len() != g.n() {
        return Err(Error::Argument(
            "matching does not belong to this graph".into(),
        ));
    }
    let per_node: Vec<Option<usize>> = (0..g.n())
        .into_par_iter()
        .map(|v| {
            let ours = capped(g, v, k, 0, seed);
            let theirs = capped(h, m.pi[v], k, 1, seed);
            if ours.is_empty() || theirs.is_empty() {
                return None;
            }
            let mut best = usize::MAX;
            'outer: for &u in &ours {
                for &w in &theirs {
                    best = best.min(mismatches(g.attr_row(u), h.attr_row(w), best));
                    if best == 0 {
                        break 'outer;
                    }
                }
            }
            Some(best)
        })
        .collect();
    let kept: Vec<usize> = per_node.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::Undefined(format!(
            "no node has a {k}-hop neighborhood on both sides"
        )));
    }
    let cells = (kept.len() * g.num_attrs()).max(1) as f64;
    Ok(2.0 * kept.iter().sum::<usize>() as f64 / cells)
}

/// Attribute and neighborhood recovery of one generated graph.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryReport {
    pub graph: String,
    pub attr: f64,
    /// 1-hop and 2-hop values; `None` when no node qualifies.
    pub khop: [Option<f64>; 2],
    pub fallback_nodes: usize,
}

impl RecoveryReport {
    pub fn new(g: &AttributedGraph, h: &AttributedGraph, seed: u64) -> Result<Self> {
        let m = attr_matching(g, h)?;
        let khop = |k| match recovery_khop(g, h, &m, k, seed) {
            Ok(x) => Ok(Some(x)),
            Err(Error::Undefined(_)) => Ok(None),
            Err(e) => Err(e),
        };
        Ok(Self {
            graph: h.name().to_string(),
            attr: attr_score(g, &m),
            khop: [khop(1)?, khop(2)?],
            fallback_nodes: m.fallback.iter().filter(|&&f| f).count(),
        })
    }

    pub const CSV_HEADER: &'static str = "graph,attr,khop1,khop2,fallback_nodes";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.graph,
            self.attr,
            super::fmt_opt(self.khop[0]),
            super::fmt_opt(self.khop[1]),
            self.fallback_nodes
        )
    }
}
