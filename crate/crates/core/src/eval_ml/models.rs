//! Discriminative models fitted by full-batch Adam with early stopping.

use std::sync::{Arc, Mutex};

use rand::Rng;
use rayon::prelude::*;

use super::metrics::{accuracy, roc_auc};
use crate::denoiser::mean_adjacency;
use crate::error::{Error, Result};
use crate::graphdata::AttributedGraph;
use crate::numerics::{AmsGrad, Dense, NumericsError, OptimizerConfig, Var};
use crate::{rng, ParamSet, SparseMatrix, Tape, Tensor};

/// Layer count of the deeper model variants.
pub const DEPTH: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arch {
    /// Two dense layers on attributes only.
    Mlp,
    /// `k` rounds of mean aggregation followed by one linear layer.
    Sgc {
        k: usize,
    },
    Gcn {
        layers: usize,
    },
    /// Two-layer MLP predictions smoothed by `k` personalized-propagation steps.
    Appnp {
        k: usize,
        alpha: f64,
    },
    /// Graph-convolutional encoder scored by inner products.
    Gae {
        layers: usize,
    },
    /// Common-neighbor count; nothing to fit.
    Cn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    NodeClassification,
    LinkPrediction,
}

impl Arch {
    pub fn task(self) -> Task {
        match self {
            Arch::Gae { .. } | Arch::Cn => Task::LinkPrediction,
            _ => Task::NodeClassification,
        }
    }

    pub fn validate(self) -> Result<()> {
        let ok = match self {
            Arch::Mlp | Arch::Cn => true,
            Arch::Sgc { k } => k >= 1,
            Arch::Gcn { layers } | Arch::Gae { layers } => layers >= 1,
            Arch::Appnp { k, alpha } => k >= 1 && (0.0..=1.0).contains(&alpha),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid discriminator {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub lr: f64,
    pub hidden: usize,
    pub weight_decay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorSpec {
    pub name: String,
    pub arch: Arch,
    pub grid: Vec<Candidate>,
    pub epochs: usize,
    pub patience: usize,
}

pub fn default_grid() -> Vec<Candidate> {
    let mut grid = Vec::new();
    for lr in [1e-2, 1e-3] {
        for hidden in [64, 256] {
            for weight_decay in [0.0, 5e-4] {
                grid.push(Candidate {
                    lr,
                    hidden,
                    weight_decay,
                });
            }
        }
    }
    grid
}

impl DiscriminatorSpec {
    pub fn new(name: &str, arch: Arch) -> Self {
        Self {
            name: name.to_string(),
            arch,
            grid: default_grid(),
            epochs: 300,
            patience: 30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.arch != Arch::Cn && (self.grid.is_empty() || self.epochs == 0 || self.patience == 0)
        {
            return Err(Error::Config(format!(
                "{}: empty search grid or schedule",
                self.name
            )));
        }
        if let Some(c) = self
            .grid
            .iter()
            .find(|c| !(c.lr > 0.0) || c.hidden == 0 || c.weight_decay < 0.0)
        {
            return Err(Error::Config(format!("{}: bad candidate {c:?}", self.name)));
        }
        Ok(())
    }

    /// The node-classification models of the protocol, shallow and deep.
    pub fn node_suite() -> Vec<Self> {
        vec![
            Self::new("mlp", Arch::Mlp),
            Self::new("1-sgc", Arch::Sgc { k: 1 }),
            Self::new("l-sgc", Arch::Sgc { k: DEPTH }),
            Self::new("1-gcn", Arch::Gcn { layers: 1 }),
            Self::new("l-gcn", Arch::Gcn { layers: DEPTH }),
            Self::new("1-appnp", Arch::Appnp { k: 1, alpha: 0.1 }),
            Self::new("l-appnp", Arch::Appnp { k: 10, alpha: 0.1 }),
        ]
    }

    pub fn link_suite() -> Vec<Self> {
        vec![
            Self::new("cn", Arch::Cn),
            Self::new("1-gae", Arch::Gae { layers: 1 }),
            Self::new("l-gae", Arch::Gae { layers: DEPTH }),
        ]
    }
}

/// Binary attributes become one indicator column, wider ones a one-hot block.
pub fn feature_matrix(g: &AttributedGraph) -> SparseMatrix {
    let mut offsets = Vec::with_capacity(g.num_attrs());
    let mut width = 0;
    for &c in g.cardinalities() {
        offsets.push(width);
        width += if c == 2 { 1 } else { c };
    }
    let rows = (0..g.n())
        .map(|v| {
            g.attr_row(v)
                .iter()
                .zip(g.cardinalities())
                .enumerate()
                .filter_map(|(j, (&x, &c))| match c {
                    2 if x == 1 => Some((offsets[j], 1.0)),
                    2 => None,
                    _ => Some((offsets[j] + x as usize, 1.0)),
                })
                .collect()
        })
        .collect();
    SparseMatrix::from_rows(width, rows)
}

/// `D^-1/2 (A + I) D^-1/2`.
pub fn sym_adjacency(g: &AttributedGraph) -> SparseMatrix {
    let inv: Vec<f64> = (0..g.n())
        .map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
        .collect();
    let rows = (0..g.n())
        .map(|v| {
            let mut row: Vec<(usize, f64)> = g
                .neighbors(v)
                .iter()
                .map(|&u| (u, inv[u] * inv[v]))
                .collect();
            let at = row.partition_point(|&(u, _)| u < v);
            row.insert(at, (v, inv[v] * inv[v]));
            row
        })
        .collect();
    SparseMatrix::from_rows(g.n(), rows)
}

/// Operators one graph contributes to every model.
#[derive(Clone, Debug)]
pub struct GraphView {
    pub n: usize,
    pub x: Arc<SparseMatrix>,
    pub mean_adj: Arc<SparseMatrix>,
    pub sym_adj: Arc<SparseMatrix>,
    smoothed: Arc<Mutex<Vec<(usize, Arc<Tensor>)>>>,
}

impl GraphView {
    pub fn new(g: &AttributedGraph) -> Self {
        Self {
            n: g.n(),
            x: Arc::new(feature_matrix(g)),
            mean_adj: Arc::new(mean_adjacency(g)),
            sym_adj: Arc::new(sym_adjacency(g)),
            smoothed: Arc::default(),
        }
    }

    pub fn width(&self) -> usize {
        self.x.cols()
    }

    /// `S^k X` for the mean aggregation `S`, computed once per `k`.
    fn smoothed(&self, k: usize) -> Arc<Tensor> {
        let mut cache = self.smoothed.lock().expect("feature cache");
        if let Some((_, t)) = cache.iter().find(|(j, _)| *j == k) {
            return t.clone();
        }
        let mut h = self.x.to_dense();
        for _ in 0..k {
            h = self.mean_adj.matmul_dense(&h);
        }
        let h = Arc::new(h);
        cache.push((k, h.clone()));
        h
    }
}

/// Parameters of one fitted or freshly initialized network.
#[derive(Clone, Debug)]
pub struct Net {
    pub arch: Arch,
    pub params: ParamSet,
    layers: Vec<Dense>,
}

impl Net {
    pub fn new<R: Rng + ?Sized>(
        arch: Arch,
        width: usize,
        hidden: usize,
        out: usize,
        rng: &mut R,
    ) -> Self {
        let mut params = ParamSet::new();
        let dims: Vec<usize> = match arch {
            Arch::Mlp | Arch::Appnp { .. } => vec![width, hidden, out],
            Arch::Sgc { .. } => vec![width, out],
            Arch::Gcn { layers } => {
                let mut d = vec![width];
                d.extend(std::iter::repeat_n(hidden, layers - 1));
                d.push(out);
                d
            }
            Arch::Gae { layers } => std::iter::once(width)
                .chain(std::iter::repeat_n(hidden, layers))
                .collect(),
            Arch::Cn => vec![],
        };
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(&mut params, &format!("layer{i}"), w[0], w[1], rng))
            .collect();
        Self {
            arch,
            params,
            layers,
        }
    }

    fn sparse_in(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: &Arc<SparseMatrix>,
        layer: usize,
    ) -> Result<Var, NumericsError> {
        let d = &self.layers[layer];
        let z = tape.spmm(x.clone(), vars[d.w.0])?;
        tape.add_row(z, vars[d.b.0])
    }

    fn gcn(&self, tape: &mut Tape, vars: &[Var], view: &GraphView) -> Result<Var, NumericsError> {
        let mut h = None;
        for (i, d) in self.layers.iter().enumerate() {
            let xw = match h {
                None => tape.spmm(view.x.clone(), vars[d.w.0])?,
                Some(h) => tape.matmul(h, vars[d.w.0])?,
            };
            let z = tape.spmm(view.sym_adj.clone(), xw)?;
            let z = tape.add_row(z, vars[d.b.0])?;
            h = Some(if i + 1 < self.layers.len() {
                tape.relu(z)
            } else {
                z
            });
        }
        Ok(h.expect("at least one layer"))
    }

    /// Node logits, or node embeddings for the link models.
    pub fn output(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        view: &GraphView,
    ) -> Result<Var, NumericsError> {
        match self.arch {
            Arch::Mlp | Arch::Appnp { .. } => {
                let h = self.sparse_in(tape, vars, &view.x, 0)?;
                let h = tape.relu(h);
                let z0 = self.layers[1].apply(tape, vars, h)?;
                let Arch::Appnp { k, alpha } = self.arch else {
                    return Ok(z0);
                };
                let mut z = z0;
                let teleport = tape.scale(z0, alpha);
                for _ in 0..k {
                    let p = tape.spmm(view.sym_adj.clone(), z)?;
                    let p = tape.scale(p, 1.0 - alpha);
                    z = tape.add(p, teleport)?;
                }
                Ok(z)
            }
            Arch::Sgc { k } => {
                let x = tape.leaf(view.smoothed(k).as_ref().clone());
                self.layers[0].apply(tape, vars, x)
            }
            Arch::Gcn { .. } | Arch::Gae { .. } => self.gcn(tape, vars, view),
            Arch::Cn => unreachable!("common neighbors has no network"),
        }
    }

    pub fn evaluate(&self, view: &GraphView) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        let out = self.output(&mut tape, &vars, view)?;
        Ok(tape.value(out).clone())
    }
}

fn pair_scores(tape: &mut Tape, z: Var, pairs: &[(usize, usize)]) -> Result<Var, NumericsError> {
    let us: Arc<[usize]> = pairs.iter().map(|p| p.0).collect();
    let vs: Arc<[usize]> = pairs.iter().map(|p| p.1).collect();
    let a = tape.gather_rows(z, us)?;
    let b = tape.gather_rows(z, vs)?;
    let prod = tape.mul(a, b)?;
    Ok(tape.row_sum(prod))
}

/// Inner-product scores of node pairs from an embedding matrix.
pub fn dot_scores(z: &Tensor, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| z.row(u).iter().zip(z.row(v)).map(|(a, b)| a * b).sum())
        .collect()
}

/// Common neighbors of each pair in `g`.
pub fn cn_scores(g: &AttributedGraph, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| {
            crate::eval_structural::intersect_count(g.neighbors(u), g.neighbors(v)) as f64
        })
        .collect()
}

/// What a node model is fitted on.
pub struct NodeTask<'a> {
    pub view: &'a GraphView,
    pub labels: &'a [u32],
    pub classes: usize,
    pub train: &'a [usize],
    pub val: &'a [usize],
}

/// What a link model is fitted on; `view` is built from the training edges.
pub struct LinkTask<'a> {
    pub view: &'a GraphView,
    pub train: &'a [(usize, usize)],
    pub val_pos: &'a [(usize, usize)],
    pub val_neg: &'a [(usize, usize)],
}

struct Fit {
    net: Net,
    score: f64,
}

fn candidate_rng(spec: &DiscriminatorSpec, i: usize, seed: u64) -> rng::Rng {
    rng::stream(
        seed,
        &[rng::tag("discriminator"), rng::tag(&spec.name), i as u64],
    )
}

/// Trains one candidate: each epoch first scores the current parameters on
/// validation, keeps them if they are the best so far, then takes a step.
fn train_candidate(
    spec: &DiscriminatorSpec,
    cand: Candidate,
    mut net: Net,
    mut loss_fn: impl FnMut(&Net, usize, &mut Tape, &[Var]) -> Result<(Var, f64)>,
) -> Result<Option<Fit>> {
    let mut opt = AmsGrad::new(
        OptimizerConfig::adam(cand.lr, cand.weight_decay),
        &net.params,
    );
    let mut best: Option<Fit> = None;
    let mut bad = 0;
    for epoch in 0..spec.epochs {
        let mut tape = Tape::new();
        let vars = net.params.bind(&mut tape);
        let (loss, val) = loss_fn(&net, epoch, &mut tape, &vars)?;
        if !tape.value(loss).item().is_finite() {
            break;
        }
        if best.as_ref().is_none_or(|b| val > b.score) {
            best = Some(Fit {
                net: net.clone(),
                score: val,
            });
            bad = 0;
        } else {
            bad += 1;
            if bad >= spec.patience {
                break;
            }
        }
        let grads = tape.backward(loss).collect(&tape, &vars);
        opt.update(&mut net.params, &grads);
        if !net.params.all_finite() {
            break;
        }
    }
    Ok(best.filter(|b| b.score.is_finite()))
}

fn pick(spec: &DiscriminatorSpec, fits: Vec<Result<Option<Fit>>>) -> Result<Net> {
    let mut best: Option<Fit> = None;
    for f in fits {
        if let Some(f) = f? {
            if best.as_ref().is_none_or(|b| f.score > b.score) {
                best = Some(f);
            }
        }
    }
    best.map(|b| b.net).ok_or_else(|| Error::Training {
        step: spec.epochs,
        message: format!("{}: every candidate diverged", spec.name),
    })
}

/// Grid search for a node classifier; the candidate with the best validation
/// accuracy wins, earlier candidates first among ties.
pub fn fit_node(spec: &DiscriminatorSpec, task: &NodeTask, seed: u64) -> Result<Net> {
    spec.validate()?;
    if spec.arch.task() != Task::NodeClassification {
        return Err(Error::Config(format!(
            "{} is not a node classifier",
            spec.name
        )));
    }
    let targets: Vec<usize> = task
        .train
        .iter()
        .map(|&v| task.labels[v] as usize)
        .collect();
    let train_idx: Arc<[usize]> = task.train.into();
    let fits = spec
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &cand)| {
            let mut r = candidate_rng(spec, i, seed);
            let net = Net::new(
                spec.arch,
                task.view.width(),
                cand.hidden,
                task.classes,
                &mut r,
            );
            train_candidate(spec, cand, net, |net, _, tape, vars| {
                let logits = net.output(tape, vars, task.view)?;
                let val = accuracy(tape.value(logits), task.labels, task.val);
                let picked = tape.gather_rows(logits, train_idx.clone())?;
                Ok((tape.cross_entropy(picked, &targets)?, val))
            })
        })
        .collect();
    pick(spec, fits)
}

/// `n` uniformly drawn ordered pairs of distinct nodes.
fn random_pairs<R: Rng + ?Sized>(n: usize, count: usize, r: &mut R) -> Vec<(usize, usize)> {
    (0..count)
        .map(|_| {
            let u = r.random_range(0..n);
            let v = (u + r.random_range(1..n)) % n;
            (u, v)
        })
        .collect()
}

/// Grid search for a graph autoencoder, selected by validation ROC-AUC. Every
/// epoch pairs the training edges with as many freshly drawn random pairs.
pub fn fit_link(spec: &DiscriminatorSpec, task: &LinkTask, seed: u64) -> Result<Option<Net>> {
    spec.validate()?;
    match spec.arch {
        Arch::Cn => return Ok(None),
        Arch::Gae { .. } => {}
        _ => {
            return Err(Error::Config(format!(
                "{} is not a link predictor",
                spec.name
            )))
        }
    }
    if task.view.n < 2 || task.train.is_empty() {
        return Err(Error::Protocol(
            "link prediction needs training edges".into(),
        ));
    }
    let n = task.view.n;
    let m = task.train.len();
    let fits = spec
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &cand)| {
            let mut r = candidate_rng(spec, i, seed);
            let net = Net::new(
                spec.arch,
                task.view.width(),
                cand.hidden,
                cand.hidden,
                &mut r,
            );
            let neg_seed = rng::derive(
                seed,
                &[rng::tag("negatives"), rng::tag(&spec.name), i as u64],
            );
            let mut labels = vec![1.0; m];
            labels.resize(2 * m, 0.0);
            train_candidate(spec, cand, net, |net, epoch, tape, vars| {
                let z = net.output(tape, vars, task.view)?;
                let zv = tape.value(z);
                let val = roc_auc(&dot_scores(zv, task.val_pos), &dot_scores(zv, task.val_neg))?;
                let mut pairs = task.train.to_vec();
                pairs.extend(random_pairs(
                    n,
                    m,
                    &mut rng::stream(neg_seed, &[epoch as u64]),
                ));
                let s = pair_scores(tape, z, &pairs)?;
                Ok((tape.binary_cross_entropy(s, &labels)?, val))
            })
        })
        .collect();
    pick(spec, fits).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;
    use rand::SeedableRng;

    fn fixture() -> AttributedGraph {
        let n = 7;
        let edges = [
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (5, 6),
            (0, 6),
            (1, 4),
        ];
        let attrs = (0..n)
            .flat_map(|v| [(v % 2) as u32, (v % 3) as u32])
            .collect();
        let y = (0..n).map(|v| (v % 3) as u32).collect();
        AttributedGraph::new("d", n, edges, vec![2, 3], attrs, Some((3, y))).unwrap()
    }

    #[test]
    fn features_collapse_binary_columns() {
        let x = feature_matrix(&fixture()).to_dense();
        assert_eq!((x.rows(), x.cols()), (7, 4));
        assert_eq!(x.row(1), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(x.row(2), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn symmetric_adjacency_entries() {
        let a = sym_adjacency(&fixture()).to_dense();
        assert!((a.get(1, 4) - 0.25).abs() < 1e-15);
        assert_eq!(a.get(1, 4), a.get(4, 1));
        assert!((a.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.get(0, 3), 0.0);
    }

    #[test]
    fn every_discriminator_passes_gradient_check() {
        let g = fixture();
        let view = GraphView::new(&g);
        let archs = [
            Arch::Mlp,
            Arch::Sgc { k: 2 },
            Arch::Gcn { layers: 2 },
            Arch::Appnp { k: 3, alpha: 0.1 },
            Arch::Gae { layers: 2 },
        ];
        let targets: Vec<usize> = (0..7).map(|v| v % 3).collect();
        let pairs = [(0, 1), (2, 5), (3, 4), (6, 2)];
        for (i, arch) in archs.into_iter().enumerate() {
            let net = Net::new(
                arch,
                view.width(),
                5,
                3,
                &mut rng::Rng::seed_from_u64(i as u64),
            );
            let err = grad_check(net.params.tensors(), 1e-6, |tape, vars| {
                let out = net.output(tape, vars, &view)?;
                if arch.task() == Task::LinkPrediction {
                    let s = pair_scores(tape, out, &pairs)?;
                    tape.binary_cross_entropy(s, &[1.0, 0.0, 1.0, 0.0])
                } else {
                    tape.cross_entropy(out, &targets)
                }
            })
            .unwrap();
            assert!(err < 1e-4, "{arch:?}: {err}");
        }
    }

    #[test]
    fn common_neighbor_scores() {
        // 0-1, 0-2, 1-2, 1-3, 2-3, 3-4
        let g = AttributedGraph::new(
            "cn",
            5,
            [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (3, 4)],
            vec![],
            vec![],
            None,
        )
        .unwrap();
        let s = cn_scores(&g, &[(0, 3), (1, 2), (0, 4), (2, 4), (1, 4)]);
        assert_eq!(s, vec![2.0, 2.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn spec_validation() {
        assert!(Arch::Sgc { k: 0 }.validate().is_err());
        assert!(Arch::Gcn { layers: 0 }.validate().is_err());
        assert!(Arch::Appnp { k: 10, alpha: 0.1 }.validate().is_ok());
        let mut s = DiscriminatorSpec::new("mlp", Arch::Mlp);
        s.grid.clear();
        assert!(s.validate().is_err());
        assert!(DiscriminatorSpec::new("cn", Arch::Cn).validate().is_ok());
        assert_eq!(default_grid().len(), 8);
    }

    #[test]
    fn separable_attributes_reach_full_validation_accuracy() {
        let n = 40;
        let y: Vec<u32> = (0..n).map(|v| (v % 2) as u32).collect();
        let attrs: Vec<u32> = (0..n)
            .flat_map(|v| [y[v], ((v * 7) % 3 % 2) as u32])
            .collect();
        let g =
            AttributedGraph::new("sep", n, [], vec![2, 2], attrs, Some((2, y.clone()))).unwrap();
        let view = GraphView::new(&g);
        let train: Vec<usize> = (0..20).collect();
        let val: Vec<usize> = (20..40).collect();
        let mut spec = DiscriminatorSpec::new("mlp", Arch::Mlp);
        spec.grid.truncate(2);
        let task = NodeTask {
            view: &view,
            labels: &y,
            classes: 2,
            train: &train,
            val: &val,
        };
        let net = fit_node(&spec, &task, 0).unwrap();
        assert_eq!(accuracy(&net.evaluate(&view).unwrap(), &y, &val), 1.0);
        assert!(fit_link(
            &spec,
            &LinkTask {
                view: &view,
                train: &[],
                val_pos: &[],
                val_neg: &[]
            },
            0
        )
        .is_err());
    }
}
