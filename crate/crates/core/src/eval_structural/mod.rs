//! Structural comparison of generated graphs with the original.

mod diversity;
mod orbits;
mod recovery;

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphdata::{edge_induced_subsample, AttributedGraph};

pub use diversity::{diversity_report, fit_diversity_classifier, DiversityReport, DiversityRow};
pub(crate) use orbits::intersect_count;
pub use orbits::{node_triangles, orbit_counts, NUM_ORBITS};
pub use recovery::{
    attr_matching, recovery_attr, recovery_khop, AttrMatching, RecoveryReport, KHOP_CAP,
};

/// Edge count above which clustering, orbit and triangle statistics are
/// computed on equal-size edge-induced subsamples.
pub const SUBSAMPLE_EDGES: usize = 50_000;

/// Exact 1-Wasserstein distance between two empirical distributions on the line.
pub fn w1_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Argument("W1 needs two nonempty samples".into()));
    }
    let sorted = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_unstable_by(f64::total_cmp);
        v
    };
    let (x, y) = (sorted(x), sorted(y));
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = x[0].min(y[0]);
    let mut acc = 0.0;
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        acc += (i as f64 / nx - j as f64 / ny).abs() * (next - prev);
        while i < x.len() && x[i] == next {
            i += 1;
        }
        while j < y.len() && y[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(acc)
}

/// Empty graphs contribute a single zero so that distances stay defined.
fn or_zero(v: Vec<f64>) -> Vec<f64> {
    if v.is_empty() {
        vec![0.0]
    } else {
        v
    }
}

pub fn degrees(g: &AttributedGraph) -> Vec<f64> {
    (0..g.n()).map(|v| g.degree(v) as f64).collect()
}

/// Local clustering coefficients, zero below degree 2.
pub fn clustering(g: &AttributedGraph) -> Vec<f64> {
    node_triangles(g)
        .iter()
        .enumerate()
        .map(|(v, &t)| {
            let d = g.degree(v) as f64;
            if d < 2.0 {
                0.0
            } else {
                2.0 * t as f64 / (d * (d - 1.0))
            }
        })
        .collect()
}

pub fn degree_w1(g: &AttributedGraph, h: &AttributedGraph) -> f64 {
    w1_1d(&or_zero(degrees(g)), &or_zero(degrees(h))).expect("nonempty")
}

pub fn clustering_w1(g: &AttributedGraph, h: &AttributedGraph) -> f64 {
    w1_1d(&or_zero(clustering(g)), &or_zero(clustering(h))).expect("nonempty")
}

fn orbit_columns(g: &AttributedGraph) -> Vec<Vec<f64>> {
    let counts = orbit_counts(g);
    (0..NUM_ORBITS)
        .map(|k| or_zero(counts.iter().map(|o| o[k] as f64).collect()))
        .collect()
}

/// Mean over the orbits of the W1 distance between per-node counts.
pub fn orbit_w1(g: &AttributedGraph, h: &AttributedGraph) -> f64 {
    orbit_w1_columns(&orbit_columns(g), &orbit_columns(h))
}

fn orbit_w1_columns(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| w1_1d(x, y).expect("nonempty"))
        .sum::<f64>()
        / NUM_ORBITS as f64
}

pub fn triangle_count(g: &AttributedGraph) -> u64 {
    g.edges()
        .par_iter()
        .map(|&(u, v)| {
            let nu = g.neighbors(u);
            let nv = g.neighbors(v);
            let (a, b) = (
                nu.partition_point(|&w| w <= v),
                nv.partition_point(|&w| w <= v),
            );
            orbits::intersect_count(&nu[a..], &nv[b..]) as u64
        })
        .sum()
}

/// Triangles of `h` relative to those of `g`.
pub fn triangle_ratio(g: &AttributedGraph, h: &AttributedGraph) -> Result<f64> {
    let base = triangle_count(g);
    if base == 0 {
        return Err(Error::Undefined(format!("{} has no triangles", g.name())));
    }
    Ok(triangle_count(h) as f64 / base as f64)
}

/// Class-balanced edge homophily over 1-hop neighborhoods, or over all nodes
/// within distance 2 when `hops == 2`. Neighborhoods exclude the node itself.
pub fn homophily(g: &AttributedGraph, hops: usize) -> Result<f64> {
    let y = g
        .labels()
        .ok_or_else(|| Error::Argument(format!("{} has no labels", g.name())))?;
    let c = g.num_labels();
    if c < 2 {
        return Err(Error::Argument(
            "homophily needs at least two label classes".into(),
        ));
    }
    if !(1..=2).contains(&hops) {
        return Err(Error::Argument(format!("hops must be 1 or 2, got {hops}")));
    }
    let n = g.n();
    let per_node: Vec<(u64, u64)> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![false; n],
            |seen, v| {
                let mut same = 0u64;
                let mut total = 0u64;
                let mut visit = |u: usize, seen: &mut Vec<bool>| {
                    if u != v && !seen[u] {
                        seen[u] = true;
                        total += 1;
                        same += (y[u] == y[v]) as u64;
                    }
                };
                for &a in g.neighbors(v) {
                    visit(a, seen);
                }
                if hops == 2 {
                    for &a in g.neighbors(v) {
                        for &b in g.neighbors(a) {
                            visit(b, seen);
                        }
                    }
                    for &a in g.neighbors(v) {
                        seen[a] = false;
                        g.neighbors(a).iter().for_each(|&b| seen[b] = false);
                    }
                } else {
                    g.neighbors(v).iter().for_each(|&a| seen[a] = false);
                }
                (same, total)
            },
        )
        .collect();
    let mut same = vec![0u64; c];
    let mut total = vec![0u64; c];
    let mut size = vec![0u64; c];
    for (v, &(s, t)) in per_node.iter().enumerate() {
        let k = y[v] as usize;
        same[k] += s;
        total[k] += t;
        size[k] += 1;
    }
    let h: f64 = (0..c)
        .filter(|&k| total[k] > 0)
        .map(|k| (same[k] as f64 / total[k] as f64 - size[k] as f64 / n as f64).max(0.0))
        .sum();
    Ok(h / (c - 1) as f64)
}

/// Structural statistics of one generated graph against the original.
/// Ratios are `None` when the original value is zero or labels are missing.
#[derive(Clone, Debug, PartialEq)]
pub struct StructRow {
    pub graph: String,
    pub degree_w1: f64,
    pub cluster_w1: f64,
    pub orbit_w1: f64,
    pub triangle_ratio: Option<f64>,
    pub homophily_ratio_1hop: Option<f64>,
    pub homophily_ratio_2hop: Option<f64>,
    pub subsampled: bool,
}

impl StructRow {
    fn values(&self) -> [Option<f64>; 6] {
        [
            Some(self.degree_w1),
            Some(self.cluster_w1),
            Some(self.orbit_w1),
            self.triangle_ratio,
            self.homophily_ratio_1hop,
            self.homophily_ratio_2hop,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructReport {
    pub rows: Vec<StructRow>,
}

pub const STRUCT_METRICS: [&str; 6] = [
    "degree_w1",
    "cluster_w1",
    "orbit_w1",
    "triangle_ratio",
    "homophily_ratio_1hop",
    "homophily_ratio_2hop",
];

/// Mean and population standard deviation of the defined values.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub(crate) fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl StructReport {
    /// `(metric, mean, std)` over graphs, skipping undefined entries.
    pub fn summary(&self) -> Vec<(&'static str, Option<(f64, f64)>)> {
        STRUCT_METRICS
            .iter()
            .enumerate()
            .map(|(i, &name)| {
                let xs: Vec<f64> = self.rows.iter().filter_map(|r| r.values()[i]).collect();
                (name, mean_std(&xs))
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("graph,{},subsampled\n", STRUCT_METRICS.join(","));
        for r in &self.rows {
            let vals: Vec<String> = r.values().iter().map(|&v| fmt_opt(v)).collect();
            let _ = writeln!(s, "{},{},{}", r.graph, vals.join(","), r.subsampled);
        }
        s
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Compares each generated graph with `g`. When any of the graphs has more
/// than [`SUBSAMPLE_EDGES`] edges, clustering, orbit and triangle statistics
/// use edge-induced subsamples of the smallest edge count among them, drawn
/// with the same seed for every graph.
pub fn struct_report(
    g: &AttributedGraph,
    generated: &[AttributedGraph],
    seed: u64,
) -> Result<StructReport> {
    let all = || std::iter::once(g).chain(generated.iter());
    let max_edges = all().map(AttributedGraph::num_edges).max().unwrap_or(0);
    let min_edges = all().map(AttributedGraph::num_edges).min().unwrap_or(0);
    let subsampled = max_edges > SUBSAMPLE_EDGES && min_edges > 0;
    let reduce = |h: &AttributedGraph| -> Result<AttributedGraph> {
        if subsampled {
            edge_induced_subsample(h, min_edges, seed)
        } else {
            Ok(h.clone())
        }
    };
    let base = reduce(g)?;
    let base_clust = or_zero(clustering(&base));
    let base_orbits = orbit_columns(&base);
    let base_tri = triangle_count(&base) as f64;
    let base_degrees = or_zero(degrees(g));
    let labeled = g.labels().is_some() && g.num_labels() >= 2;
    let base_h1 = if labeled { homophily(g, 1)? } else { 0.0 };
    let base_h2 = if labeled { homophily(g, 2)? } else { 0.0 };
    let mut rows = Vec::with_capacity(generated.len());
    for h in generated {
        let small = reduce(h)?;
        let hom = |hops| -> Result<Option<f64>> {
            if !labeled || h.labels().is_none() || h.num_labels() < 2 {
                return Ok(None);
            }
            let base = if hops == 1 { base_h1 } else { base_h2 };
            Ok(ratio(homophily(h, hops)?, base))
        };
        rows.push(StructRow {
            graph: h.name().to_string(),
            degree_w1: w1_1d(&base_degrees, &or_zero(degrees(h)))?,
            cluster_w1: w1_1d(&base_clust, &or_zero(clustering(&small)))?,
            orbit_w1: orbit_w1_columns(&base_orbits, &orbit_columns(&small)),
            triangle_ratio: ratio(triangle_count(&small) as f64, base_tri),
            homophily_ratio_1hop: hom(1)?,
            homophily_ratio_2hop: hom(2)?,
            subsampled,
        });
    }
    Ok(StructReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> AttributedGraph {
        AttributedGraph::new("s", n, edges.iter().copied(), vec![], vec![], None).unwrap()
    }

    fn triangle() -> AttributedGraph {
        graph(3, &[(0, 1), (1, 2), (0, 2)])
    }

    fn path3() -> AttributedGraph {
        graph(3, &[(0, 1), (1, 2)])
    }

    fn k4() -> AttributedGraph {
        graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    }

    fn labeled(n: usize, edges: &[(usize, usize)], y: Vec<u32>, c: usize) -> AttributedGraph {
        AttributedGraph::new("h", n, edges.iter().copied(), vec![], vec![], Some((c, y))).unwrap()
    }

    #[test]
    fn w1_cases() {
        assert_eq!(w1_1d(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(w1_1d(&[2.0], &[-1.5]).unwrap(), 3.5);
        assert_eq!(
            w1_1d(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0]).unwrap(),
            0.25
        );
        assert!(matches!(w1_1d(&[], &[1.0]), Err(Error::Argument(_))));
        assert!(w1_1d(&[1.0], &[]).is_err());
    }

    /// Mean absolute difference of quantile functions on a common grid of
    /// `lcm(|x|, |y|)` levels.
    fn quantile_oracle(x: &[f64], y: &[f64]) -> f64 {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let mut x = x.to_vec();
        let mut y = y.to_vec();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        let l = x.len() / gcd(x.len(), y.len()) * y.len();
        (0..l)
            .map(|i| (x[i * x.len() / l] - y[i * y.len() / l]).abs())
            .sum::<f64>()
            / l as f64
    }

    proptest! {
        #[test]
        fn w1_is_a_pseudometric(
            x in prop::collection::vec(-10.0f64..10.0, 1..12),
            y in prop::collection::vec(-10.0f64..10.0, 1..12),
            z in prop::collection::vec(-10.0f64..10.0, 1..12),
        ) {
            let xy = w1_1d(&x, &y).unwrap();
            prop_assert!((xy - w1_1d(&y, &x).unwrap()).abs() < 1e-9);
            prop_assert!(w1_1d(&x, &x).unwrap().abs() < 1e-12);
            prop_assert!(xy <= w1_1d(&x, &z).unwrap() + w1_1d(&z, &y).unwrap() + 1e-9);
            prop_assert!((xy - quantile_oracle(&x, &y)).abs() < 1e-9);
        }
    }

    #[test]
    fn degree_and_clustering() {
        assert!((degree_w1(&triangle(), &path3()) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(clustering_w1(&triangle(), &path3()), 1.0);
        assert_eq!(degree_w1(&k4(), &k4()), 0.0);
        assert_eq!(clustering(&graph(2, &[(0, 1)])), vec![0.0, 0.0]);
    }

    #[test]
    fn orbit_distances() {
        assert_eq!(orbit_w1(&k4(), &k4()), 0.0);
        assert_eq!(orbit_w1(&graph(3, &[]), &graph(9, &[])), 0.0);
        // triangle: every node has orbit 0 = 2 and orbit 3 = 1; path: orbit 0 is
        // {1, 2, 1}, orbit 1 is {1, 0, 1}, orbit 2 is {0, 1, 0}
        let want = (2.0 / 3.0 + 2.0 / 3.0 + 1.0 / 3.0 + 1.0) / 15.0;
        assert!((orbit_w1(&triangle(), &path3()) - want).abs() < 1e-12);
    }

    #[test]
    fn triangles() {
        assert_eq!(triangle_count(&k4()), 4);
        assert_eq!(triangle_ratio(&k4(), &k4()).unwrap(), 1.0);
        assert_eq!(triangle_ratio(&k4(), &triangle()).unwrap(), 0.25);
        assert_eq!(triangle_ratio(&k4(), &path3()).unwrap(), 0.0);
        assert!(matches!(
            triangle_ratio(&path3(), &k4()),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn homophily_cases() {
        let g = labeled(4, &[(0, 1), (2, 3)], vec![0, 0, 1, 1], 2);
        assert_eq!(homophily(&g, 1).unwrap(), 1.0);
        assert_eq!(homophily(&g, 2).unwrap(), 1.0);
        let cross = labeled(4, &[(0, 2), (1, 3)], vec![0, 0, 1, 1], 2);
        assert_eq!(homophily(&cross, 1).unwrap(), 0.0);
        // path 0-1-2 with labels 0,1,0: two hops reach the same class
        let p = labeled(3, &[(0, 1), (1, 2)], vec![0, 1, 0], 2);
        assert_eq!(homophily(&p, 1).unwrap(), 0.0);
        let h2 = homophily(&p, 2).unwrap();
        // class 0: 2 same out of 4 neighbors minus 2/3, class 1 contributes 0
        assert!((h2 - 0.0f64.max(0.5 - 2.0 / 3.0)).abs() < 1e-12);
        assert!(homophily(&graph(3, &[]), 1).is_err());
        assert!(homophily(&g, 3).is_err());
    }

    #[test]
    fn homophily_of_shuffled_labels_is_small() {
        let n = 2000;
        let mut edges = Vec::new();
        for k in 0..20_000u64 {
            let u = (crate::rng::keyed_uniform(1, &[k, 0]) * n as f64) as usize;
            let v = (crate::rng::keyed_uniform(1, &[k, 1]) * n as f64) as usize;
            if u != v {
                edges.push((u, v));
            }
        }
        let y: Vec<u32> = (0..n)
            .map(|v| (crate::rng::keyed_uniform(2, &[v as u64]) * 4.0) as u32)
            .collect();
        let g = labeled(n, &edges, y, 4);
        assert!(homophily(&g, 1).unwrap() < 0.02);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn homophily_bounds_and_relabeling(n in 2usize..25, p in 0.0f64..1.0, seed in any::<u64>()) {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if crate::rng::keyed_uniform(seed, &[u as u64, v as u64]) < p {
                        edges.push((u, v));
                    }
                }
            }
            let y: Vec<u32> = (0..n).map(|v| (crate::rng::keyed_uniform(seed ^ 1, &[v as u64]) * 3.0) as u32).collect();
            let g = labeled(n, &edges, y.clone(), 3);
            let perm = [2u32, 0, 1];
            let relabeled = labeled(n, &edges, y.iter().map(|&k| perm[k as usize]).collect(), 3);
            for hops in 1..=2 {
                let h = homophily(&g, hops).unwrap();
                prop_assert!((0.0..=1.0).contains(&h));
                prop_assert!((h - homophily(&relabeled, hops).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn report_against_itself() {
        let g = labeled(
            6,
            &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)],
            vec![0, 0, 0, 1, 1, 1],
            2,
        );
        let r = struct_report(&g, &[g.clone(), g.clone()], 0).unwrap();
        assert_eq!(r.rows.len(), 2);
        let row = &r.rows[0];
        assert_eq!(
            (row.degree_w1, row.cluster_w1, row.orbit_w1),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(row.triangle_ratio, Some(1.0));
        assert_eq!(row.homophily_ratio_1hop, Some(1.0));
        assert!(!row.subsampled);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("graph,degree_w1,"));
        assert_eq!(r.summary()[0], ("degree_w1", Some((0.0, 0.0))));
        let free = path3();
        let r = struct_report(&free, &[triangle()], 0).unwrap();
        assert_eq!(r.rows[0].triangle_ratio, None);
        assert_eq!(r.rows[0].homophily_ratio_1hop, None);
        assert!(r.to_csv().contains("NA"));
    }

    #[test]
    fn large_graphs_are_subsampled() {
        // 60k-edge ring-of-cliques style graph: each node joined to the next 6
        let n = 10_001;
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|v| (1..=6).map(move |k| (v, (v + k) % n)))
            .collect();
        let g = graph(n, &edges);
        assert!(g.num_edges() > SUBSAMPLE_EDGES);
        let small = graph(n, &edges[..40_000]);
        let r = struct_report(&g, &[small], 3).unwrap();
        assert!(r.rows[0].subsampled);
        assert!(r.rows[0].cluster_w1.is_finite() && r.rows[0].orbit_w1 >= 0.0);
        let r = struct_report(&g, &[g.clone()], 3).unwrap();
        assert_eq!(r.rows[0].orbit_w1, 0.0);
    }
}
