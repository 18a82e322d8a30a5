//! Utility of generated graphs as training data for discriminative models.
//!
//! A model trained on the original graph and one trained on a generated graph
//! are both scored on the original test data; the ratio of the two scores
//! measures how much of the learnable signal the generator kept.

mod metrics;
mod models;

use std::fmt::Write as _;

pub use metrics::{accuracy, average_ranks, pearson, roc_auc, spearman};
pub use models::{
    cn_scores, default_grid, dot_scores, feature_matrix, fit_link, fit_node, sym_adjacency, Arch,
    Candidate, DiscriminatorSpec, GraphView, LinkTask, Net, NodeTask, Task, DEPTH,
};

use crate::error::{Error, Result};
use crate::eval_structural::{fmt_opt, mean_std};
use crate::graphdata::{
    edge_split, node_split, node_split_matching, AttributedGraph, EdgeSplit, NodeSplit,
};

pub const EDGE_VAL_FRAC: f64 = 0.05;
pub const EDGE_TEST_FRAC: f64 = 0.10;

/// Up to 20 training nodes per class (a third of the smallest class at
/// most), then up to 500 validation and 1000 test nodes from the rest.
pub fn default_node_split(g: &AttributedGraph, seed: u64) -> Result<NodeSplit> {
    let y = g
        .labels()
        .ok_or_else(|| Error::Config(format!("{} has no labels", g.name())))?;
    let mut sizes = vec![0usize; g.num_labels()];
    y.iter().for_each(|&k| sizes[k as usize] += 1);
    let smallest = sizes.iter().copied().min().unwrap_or(0);
    let per_class = (smallest / 3).clamp(1, 20);
    let rest = g.n().saturating_sub(per_class * sizes.len());
    let val = (rest / 3).min(500);
    let test = (rest / 2).min(1000);
    node_split(g, per_class, val, test, seed)
}

pub fn default_edge_split(g: &AttributedGraph, seed: u64) -> Result<EdgeSplit> {
    edge_split(g, EDGE_VAL_FRAC, EDGE_TEST_FRAC, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Accuracy,
    RocAuc,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::RocAuc => "roc_auc",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UtilityResult {
    pub graph: String,
    pub task: Task,
    pub arch: String,
    pub metric: MetricKind,
    /// Trained and tested on the original graph.
    pub acc_original: f64,
    /// Trained on the generated graph, tested on the original.
    pub acc_generated: f64,
    pub ratio: Option<f64>,
}

impl UtilityResult {
    fn new(
        graph: &str,
        spec: &DiscriminatorSpec,
        metric: MetricKind,
        original: f64,
        generated: f64,
    ) -> Self {
        Self {
            graph: graph.to_string(),
            task: spec.arch.task(),
            arch: spec.name.clone(),
            metric,
            acc_original: original,
            acc_generated: generated,
            ratio: (original > 0.0).then(|| generated / original),
        }
    }
}

fn check_schema(g: &AttributedGraph, h: &AttributedGraph) -> Result<()> {
    if g.cardinalities() != h.cardinalities() {
        return Err(Error::Argument(format!(
            "{} and {} have different attribute schemas",
            g.name(),
            h.name()
        )));
    }
    Ok(())
}

/// Labels of `h` checked against the classes of `g`.
fn generated_labels<'a>(g: &AttributedGraph, h: &'a AttributedGraph) -> Result<&'a [u32]> {
    let y = h
        .labels()
        .ok_or_else(|| Error::Protocol(format!("{} has no labels", h.name())))?;
    if let Some(&k) = y.iter().find(|&&k| k as usize >= g.num_labels()) {
        return Err(Error::Protocol(format!(
            "{} uses unknown class {k}",
            h.name()
        )));
    }
    Ok(y)
}

/// Node classification on a fixed split of the original graph. Models fitted
/// on the original are kept so several generated graphs can be compared.
///
/// `seed` drives model fitting and the matched split of generated graphs; when
/// it is also the seed `split` was drawn with, a graph compared with itself
/// gets exactly the original split and scores.
pub struct NodeProtocol<'a> {
    g: &'a AttributedGraph,
    split: NodeSplit,
    view: GraphView,
    specs: Vec<DiscriminatorSpec>,
    seed: u64,
    original: Vec<f64>,
}

impl<'a> NodeProtocol<'a> {
    pub fn new(
        g: &'a AttributedGraph,
        split: NodeSplit,
        specs: Vec<DiscriminatorSpec>,
        seed: u64,
    ) -> Result<Self> {
        let y = g
            .labels()
            .ok_or_else(|| Error::Protocol(format!("{} has no labels", g.name())))?;
        let view = GraphView::new(g);
        let mut original = Vec::with_capacity(specs.len());
        for spec in &specs {
            let net = Self::fit(spec, &view, y, g.num_labels(), &split, seed)?;
            original.push(accuracy(&net.evaluate(&view)?, y, &split.test));
        }
        Ok(Self {
            g,
            split,
            view,
            specs,
            seed,
            original,
        })
    }

    fn fit(
        spec: &DiscriminatorSpec,
        view: &GraphView,
        labels: &[u32],
        classes: usize,
        split: &NodeSplit,
        seed: u64,
    ) -> Result<Net> {
        let task = NodeTask {
            view,
            labels,
            classes,
            train: &split.train,
            val: &split.val,
        };
        fit_node(spec, &task, seed)
    }

    pub fn specs(&self) -> &[DiscriminatorSpec] {
        &self.specs
    }

    /// Accuracy on the original test nodes of models trained on the original.
    pub fn original_scores(&self) -> &[f64] {
        &self.original
    }

    /// Split of `h` with the per-class sizes of the original split.
    fn generated_split(&self, h: &AttributedGraph) -> Result<NodeSplit> {
        let y = self.g.labels().expect("checked in new");
        let counts = self.split.class_counts(y, self.g.num_labels());
        node_split_matching(h, &counts, self.seed)
    }

    pub fn utility(&self, h: &AttributedGraph) -> Result<Vec<UtilityResult>> {
        check_schema(self.g, h)?;
        let yh = generated_labels(self.g, h)?;
        let split = self.generated_split(h)?;
        let hview = GraphView::new(h);
        let y = self.g.labels().expect("checked in new");
        let mut out = Vec::with_capacity(self.specs.len());
        for (spec, &orig) in self.specs.iter().zip(&self.original) {
            let net = Self::fit(spec, &hview, yh, self.g.num_labels(), &split, self.seed)?;
            let acc = accuracy(&net.evaluate(&self.view)?, y, &self.split.test);
            out.push(UtilityResult::new(
                h.name(),
                spec,
                MetricKind::Accuracy,
                orig,
                acc,
            ));
        }
        Ok(out)
    }

    /// Accuracy of every model trained and tested on `h` alone.
    pub fn self_scores(&self, h: &AttributedGraph) -> Result<Vec<f64>> {
        check_schema(self.g, h)?;
        let yh = generated_labels(self.g, h)?;
        let split = self.generated_split(h)?;
        let hview = GraphView::new(h);
        self.specs
            .iter()
            .map(|spec| {
                let net = Self::fit(spec, &hview, yh, self.g.num_labels(), &split, self.seed)?;
                Ok(accuracy(&net.evaluate(&hview)?, yh, &split.test))
            })
            .collect()
    }

    /// Pearson and Spearman correlation between the per-model accuracies on
    /// the original and on `h`.
    pub fn correlation(&self, h: &AttributedGraph) -> Result<(f64, f64)> {
        if self.specs.len() < 3 {
            return Err(Error::Config(
                "correlations need at least three models".into(),
            ));
        }
        let theirs = self.self_scores(h)?;
        Ok((
            pearson(&self.original, &theirs)?,
            spearman(&self.original, &theirs)?,
        ))
    }
}

/// Link prediction on an edge split of the original graph.
pub struct LinkProtocol<'a> {
    g: &'a AttributedGraph,
    split: EdgeSplit,
    train_graph: AttributedGraph,
    view: GraphView,
    specs: Vec<DiscriminatorSpec>,
    seed: u64,
    original: Vec<f64>,
}

impl<'a> LinkProtocol<'a> {
    pub fn new(g: &'a AttributedGraph, specs: Vec<DiscriminatorSpec>, seed: u64) -> Result<Self> {
        let split = default_edge_split(g, seed)?;
        let train_graph = split.train_graph(g)?;
        let view = GraphView::new(&train_graph);
        let mut me = Self {
            g,
            split,
            train_graph,
            view,
            specs,
            seed,
            original: Vec::new(),
        };
        let original = me
            .specs
            .iter()
            .map(|spec| me.score(spec, &me.split, &me.view))
            .collect::<Result<_>>()?;
        me.original = original;
        Ok(me)
    }

    /// Fits `spec` on one graph's training edges and scores the original
    /// test pairs with the original training graph.
    fn score(&self, spec: &DiscriminatorSpec, split: &EdgeSplit, view: &GraphView) -> Result<f64> {
        let task = LinkTask {
            view,
            train: &split.train,
            val_pos: &split.val_pos,
            val_neg: &split.val_neg,
        };
        let (pos, neg) = match fit_link(spec, &task, self.seed)? {
            None => (
                cn_scores(&self.train_graph, &self.split.test_pos),
                cn_scores(&self.train_graph, &self.split.test_neg),
            ),
            Some(net) => {
                let z = net.evaluate(&self.view)?;
                (
                    dot_scores(&z, &self.split.test_pos),
                    dot_scores(&z, &self.split.test_neg),
                )
            }
        };
        roc_auc(&pos, &neg)
    }

    pub fn original_scores(&self) -> &[f64] {
        &self.original
    }

    pub fn utility(&self, h: &AttributedGraph) -> Result<Vec<UtilityResult>> {
        check_schema(self.g, h)?;
        let split = default_edge_split(h, self.seed)?;
        let train = split.train_graph(h)?;
        let view = GraphView::new(&train);
        self.specs
            .iter()
            .zip(&self.original)
            .map(|(spec, &orig)| {
                let auc = self.score(spec, &split, &view)?;
                Ok(UtilityResult::new(
                    h.name(),
                    spec,
                    MetricKind::RocAuc,
                    orig,
                    auc,
                ))
            })
            .collect()
    }
}

/// Node-classification utility of `h` on the given split of `g`.
pub fn utility_node(
    g: &AttributedGraph,
    split: NodeSplit,
    h: &AttributedGraph,
    specs: Vec<DiscriminatorSpec>,
    seed: u64,
) -> Result<Vec<UtilityResult>> {
    NodeProtocol::new(g, split, specs, seed)?.utility(h)
}

pub fn utility_link(
    g: &AttributedGraph,
    h: &AttributedGraph,
    specs: Vec<DiscriminatorSpec>,
    seed: u64,
) -> Result<Vec<UtilityResult>> {
    LinkProtocol::new(g, specs, seed)?.utility(h)
}

pub fn benchmark_correlation(
    g: &AttributedGraph,
    split: NodeSplit,
    h: &AttributedGraph,
    specs: Vec<DiscriminatorSpec>,
    seed: u64,
) -> Result<(f64, f64)> {
    NodeProtocol::new(g, split, specs, seed)?.correlation(h)
}

/// Utility results and benchmark correlations of several generated graphs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MlReport {
    pub results: Vec<UtilityResult>,
    /// `(graph, pearson, spearman)`; `None` when undefined.
    pub correlations: Vec<(String, Option<(f64, f64)>)>,
}

impl MlReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("graph,task,arch,metric,acc_original,acc_generated,ratio\n");
        for r in &self.results {
            let task = match r.task {
                Task::NodeClassification => "node_clf",
                Task::LinkPrediction => "link_pred",
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.graph,
                task,
                r.arch,
                r.metric.name(),
                r.acc_original,
                r.acc_generated,
                fmt_opt(r.ratio)
            );
        }
        for (graph, c) in &self.correlations {
            let _ = writeln!(
                s,
                "{graph},benchmark,all,pearson_spearman,{},{},NA",
                fmt_opt(c.map(|c| c.0)),
                fmt_opt(c.map(|c| c.1))
            );
        }
        s
    }

    /// `(key, mean, std)` of each ratio over graphs, then the correlations.
    pub fn summary(&self) -> Vec<(String, Option<(f64, f64)>)> {
        let mut keys: Vec<String> = Vec::new();
        for r in &self.results {
            if !keys.contains(&r.arch) {
                keys.push(r.arch.clone());
            }
        }
        let mut out: Vec<(String, Option<(f64, f64)>)> = keys
            .iter()
            .map(|k| {
                let xs: Vec<f64> = self
                    .results
                    .iter()
                    .filter(|r| &r.arch == k)
                    .filter_map(|r| r.ratio)
                    .collect();
                (format!("ratio_{k}"), mean_std(&xs))
            })
            .collect();
        if !self.correlations.is_empty() {
            for (i, name) in ["pearson", "spearman"].iter().enumerate() {
                let xs: Vec<f64> = self
                    .correlations
                    .iter()
                    .filter_map(|(_, c)| c.map(|c| if i == 0 { c.0 } else { c.1 }))
                    .collect();
                out.push((name.to_string(), mean_std(&xs)));
            }
        }
        out
    }
}
