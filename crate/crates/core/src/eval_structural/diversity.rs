//! Per-graph spread of a degree statistic and of attribute-label fidelity
//! across many samples, for histogramming.

use std::fmt::Write as _;

use super::{degree_w1, fmt_opt};
use crate::error::{Error, Result};
use crate::eval_ml::{
    accuracy, default_node_split, fit_node, Arch, DiscriminatorSpec, GraphView, Net, NodeTask,
};
use crate::graphdata::AttributedGraph;

/// Attribute-only classifier fitted once on `g`.
pub fn fit_diversity_classifier(g: &AttributedGraph, seed: u64) -> Result<Net> {
    let y = g
        .labels()
        .ok_or_else(|| Error::Argument(format!("{} has no labels", g.name())))?;
    let split = default_node_split(g, seed)?;
    let view = GraphView::new(g);
    let task = NodeTask {
        view: &view,
        labels: y,
        classes: g.num_labels(),
        train: &split.train,
        val: &split.val,
    };
    fit_node(&DiscriminatorSpec::new("mlp", Arch::Mlp), &task, seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiversityRow {
    pub graph: String,
    pub degree_w1: f64,
    /// Accuracy of the classifier on every generated node; `None` without labels.
    pub mlp_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiversityReport {
    pub rows: Vec<DiversityRow>,
}

impl DiversityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("graph,degree_w1,mlp_accuracy\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.graph, r.degree_w1, fmt_opt(r.mlp_accuracy));
        }
        s
    }
}

pub fn diversity_report(
    g: &AttributedGraph,
    generated: &[AttributedGraph],
    classifier: &Net,
) -> Result<DiversityReport> {
    if generated.len() < 2 {
        return Err(Error::Argument(
            "diversity needs at least two generated graphs".into(),
        ));
    }
    let rows = generated
        .iter()
        .map(|h| {
            if h.cardinalities() != g.cardinalities() {
                return Err(Error::Argument(format!(
                    "{} has a different attribute schema",
                    h.name()
                )));
            }
            let mlp_accuracy = match h.labels() {
                Some(y) if h.num_labels() <= g.num_labels() => {
                    let all: Vec<usize> = (0..h.n()).collect();
                    Some(accuracy(&classifier.evaluate(&GraphView::new(h))?, y, &all))
                }
                _ => None,
            };
            Ok(DiversityRow {
                graph: h.name().to_string(),
                degree_w1: degree_w1(g, h),
                mlp_accuracy,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DiversityReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{baseline_graph, BaselineKind};
    use crate::eval_structural::mean_std;

    fn community(n: usize) -> AttributedGraph {
        let y: Vec<u32> = (0..n).map(|v| (v % 2) as u32).collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if y[u] == y[v] { 0.1 } else { 0.01 };
                if crate::rng::keyed_uniform(3, &[u as u64, v as u64]) < p {
                    edges.push((u, v));
                }
            }
        }
        let attrs = (0..n)
            .flat_map(|v| {
                let yv = y[v];
                (0..8).map(move |j| {
                    let p = if (j % 2) as u32 == yv { 0.9 } else { 0.1 };
                    (crate::rng::keyed_uniform(4, &[v as u64, j]) < p) as u32
                })
            })
            .collect();
        AttributedGraph::new("div", n, edges, vec![2; 8], attrs, Some((2, y))).unwrap()
    }

    #[test]
    fn identical_copies_have_no_spread() {
        let g = community(120);
        let clf = fit_diversity_classifier(&g, 0).unwrap();
        let copies = vec![g.clone(); 50];
        let rep = diversity_report(&g, &copies, &clf).unwrap();
        assert_eq!(rep.rows.len(), 50);
        let acc: Vec<f64> = rep.rows.iter().map(|r| r.mlp_accuracy.unwrap()).collect();
        let deg: Vec<f64> = rep.rows.iter().map(|r| r.degree_w1).collect();
        assert_eq!(mean_std(&acc).unwrap().1, 0.0);
        assert_eq!(mean_std(&deg).unwrap(), (0.0, 0.0));
        assert_eq!(rep.to_csv().lines().count(), 51);
        assert!(diversity_report(&g, &copies[..1], &clf).is_err());
    }

    #[test]
    fn marginal_attributes_fall_to_chance() {
        let g = community(200);
        let clf = fit_diversity_classifier(&g, 0).unwrap();
        let er: Vec<AttributedGraph> = (0..50)
            .map(|s| {
                // attributes ignore the label, so the classifier can only guess
                let mut h = baseline_graph(&g, BaselineKind::ErMarginal, false, s).unwrap();
                let y: Vec<u32> = (0..h.n())
                    .map(|v| (crate::rng::keyed_uniform(s, &[v as u64]) * 2.0) as u32)
                    .collect();
                h = AttributedGraph::new(
                    h.name(),
                    h.n(),
                    h.edges().to_vec(),
                    h.cardinalities().to_vec(),
                    h.attrs().to_vec(),
                    Some((2, y)),
                )
                .unwrap();
                h
            })
            .collect();
        let rep = diversity_report(&g, &er, &clf).unwrap();
        let acc: Vec<f64> = rep.rows.iter().map(|r| r.mlp_accuracy.unwrap()).collect();
        let deg: Vec<f64> = rep.rows.iter().map(|r| r.degree_w1).collect();
        let (m, _) = mean_std(&acc).unwrap();
        assert!((m - 0.5).abs() < 0.05, "{m}");
        let (dm, ds) = mean_std(&deg).unwrap();
        assert!(ds < 0.5 * dm.max(0.1), "{dm} {ds}");
    }
}
