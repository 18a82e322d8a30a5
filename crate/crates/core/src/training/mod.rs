//! Denoising losses, the early-stopped training loop, and checkpoints.
//!
//! Each network is trained to predict the clean graph from a corrupted one.
//! Early stopping watches a validation score: the mean denoising
//! cross-entropy over draws frozen when training starts. Lower is better.

mod checkpoint;
mod config;

use rand::Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ModelMeta, MAGIC, VERSION};
pub use config::{Scale, TrainConfig};

use crate::denoiser::{segments, AttrNet, DenoiserParams, GraphInputs, Schema, Variant};
use crate::diffusion::{corrupt, corrupt_attrs, Component, NoiseSchedule};
use crate::error::{Error, Result};
use crate::graphdata::{empirical_marginals, num_pairs, pair_at, AttributedGraph};
use crate::numerics::{clip_grad_norm, AmsGrad};
use crate::rng;
use crate::{ParamSet, Tape, Tensor};

/// Pairs per chunk when evaluating the edge loss; bounds peak memory for
/// large batches without changing the result.
pub const PAIR_CHUNK: usize = 16_384;

/// Rewrites `g` into the graph the model is fit to. Conditional models keep
/// labels as an input. Unconditional models either append them as a final
/// attribute column (returning its class count) or drop them.
pub fn model_graph(
    g: &AttributedGraph,
    cfg: &TrainConfig,
) -> Result<(AttributedGraph, Option<usize>)> {
    match (g.labels(), cfg.conditional()) {
        (None, true) => Err(Error::Config("conditional model requires labels".into())),
        (Some(_), true) => Ok((g.clone(), None)),
        (Some(y), false) if cfg.labels_as_attribute => {
            let f = g.num_attrs();
            let classes = g.num_labels().max(2);
            let mut attrs = Vec::with_capacity(g.n() * (f + 1));
            for v in 0..g.n() {
                attrs.extend_from_slice(g.attr_row(v));
                attrs.push(y[v]);
            }
            let mut cards = g.cardinalities().to_vec();
            cards.push(classes);
            let out =
                AttributedGraph::new(g.name(), g.n(), g.edges().to_vec(), cards, attrs, None)?;
            Ok((out, Some(classes)))
        }
        _ => Ok((g.without_labels(), None)),
    }
}

/// Inverse of the label-column rewrite in [`model_graph`].
pub fn split_label_column(g: &AttributedGraph, classes: usize) -> Result<AttributedGraph> {
    let f = g.num_attrs();
    if f < 2 || g.cardinalities()[f - 1] != classes {
        return Err(Error::Config("graph has no label column".into()));
    }
    let mut attrs = Vec::with_capacity(g.n() * (f - 1));
    let mut labels = Vec::with_capacity(g.n());
    for v in 0..g.n() {
        let row = g.attr_row(v);
        attrs.extend_from_slice(&row[..f - 1]);
        labels.push(row[f - 1]);
    }
    AttributedGraph::new(
        g.name(),
        g.n(),
        g.edges().to_vec(),
        g.cardinalities()[..f - 1].to_vec(),
        attrs,
        Some((classes, labels)),
    )
}

/// Everything the losses need from the training graph.
#[derive(Clone, Debug)]
pub struct TrainData {
    pub graph: AttributedGraph,
    pub schedule: NoiseSchedule,
    pub segments: Vec<(usize, usize)>,
    pub attr_targets: Vec<usize>,
    pub batch_pairs: usize,
    pub pair_chunk: usize,
    pub meta: ModelMeta,
}

impl TrainData {
    pub fn new(g: &AttributedGraph, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if g.n() < 2 {
            return Err(Error::Config("training needs at least two nodes".into()));
        }
        let (graph, label_column) = model_graph(g, cfg)?;
        let schedule = cfg.schedule(empirical_marginals(&graph))?;
        Ok(Self {
            segments: segments(graph.cardinalities()),
            attr_targets: graph.attrs().iter().map(|&a| a as usize).collect(),
            batch_pairs: cfg.batch_pairs,
            pair_chunk: PAIR_CHUNK,
            meta: ModelMeta {
                name: g.name().to_string(),
                num_nodes: g.n(),
                label_column,
                label_distribution: g.label_distribution(),
            },
            graph,
            schedule,
        })
    }

    pub fn schema(&self) -> Schema {
        Schema {
            cardinalities: self.graph.cardinalities().to_vec(),
            num_labels: self.graph.num_labels(),
        }
    }
}

/// One corruption draw: a step and the seed of all its randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Draw {
    pub t: usize,
    pub seed: u64,
}

/// `k` unordered pairs drawn uniformly with replacement.
pub fn sample_pairs(n: usize, k: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = num_pairs(n);
    if total == 0 {
        return Vec::new();
    }
    let mut r = rng::stream(seed, &[rng::tag("pairs")]);
    (0..k)
        .map(|_| pair_at(n, r.random_range(0..total)))
        .collect()
}

fn zeros_like(p: &ParamSet) -> Vec<Tensor> {
    p.tensors()
        .iter()
        .map(|t| Tensor::zeros(t.rows(), t.cols()))
        .collect()
}

fn accumulate(into: &mut [Tensor], from: &[Tensor]) {
    for (a, b) in into.iter_mut().zip(from) {
        a.axpy(1.0, b);
    }
}

fn attr_step(
    params: &DenoiserParams,
    data: &TrainData,
    draw: Draw,
    training: bool,
) -> Result<(f64, Vec<Tensor>)> {
    let g = &data.graph;
    let inputs = match params.attr_net {
        AttrNet::Mlp(_) => {
            let attrs = corrupt_attrs(g, &data.schedule, draw.t, draw.seed)?;
            GraphInputs::attributes_only(&attrs, g.cardinalities(), params.label_input(g.labels())?)
        }
        AttrNet::Mpnn { .. } => {
            let noisy = corrupt(g, &data.schedule, draw.t, draw.seed)?;
            params.inputs(Component::Attr, &noisy, g.labels())?
        }
    };
    let mut r = rng::stream(draw.seed, &[rng::tag("attr_dropout")]);
    let mut tape = Tape::new();
    let vars = params.attr_params.bind(&mut tape);
    let logits = params.attr_forward(
        &mut tape,
        &vars,
        &inputs,
        draw.t,
        data.schedule.total(),
        training,
        &mut r,
    )?;
    let loss = tape.segmented_cross_entropy(logits, &data.segments, &data.attr_targets)?;
    let grads = tape.backward(loss).collect(&tape, &vars);
    Ok((tape.value(loss).item(), grads))
}

fn edge_step(
    params: &DenoiserParams,
    data: &TrainData,
    draw: Draw,
    training: bool,
) -> Result<(f64, Vec<Tensor>)> {
    let g = &data.graph;
    let noisy = corrupt(g, &data.schedule, draw.t, draw.seed)?;
    let inputs = params.inputs(Component::Edge, &noisy, g.labels())?;
    let mut r = rng::stream(draw.seed, &[rng::tag("edge_dropout")]);
    let mut enc = Tape::new();
    let enc_vars = params.edge_params.bind(&mut enc);
    let h = params.edge_encode(
        &mut enc,
        &enc_vars,
        &inputs,
        draw.t,
        data.schedule.total(),
        training,
        &mut r,
    )?;

    let pairs = sample_pairs(g.n(), data.batch_pairs, draw.seed);
    let weight = 1.0 / pairs.len().max(1) as f64;
    let head = &params.edge_net.head;
    let mut loss = 0.0;
    let mut grads = zeros_like(&params.edge_params);
    let mut dh = Tensor::zeros(enc.value(h).rows(), enc.value(h).cols());
    for chunk in pairs.chunks(data.pair_chunk.max(1)) {
        let us: Vec<usize> = chunk.iter().map(|p| p.0).collect();
        let vs: Vec<usize> = chunk.iter().map(|p| p.1).collect();
        let targets: Vec<usize> = chunk
            .iter()
            .map(|&(u, v)| g.has_edge(u, v) as usize)
            .collect();
        let mut tape = Tape::new();
        let vars = params.edge_params.bind(&mut tape);
        let hu = tape.leaf(enc.value(h).gather_rows(&us));
        let hv = tape.leaf(enc.value(h).gather_rows(&vs));
        let prod = tape.mul(hu, hv)?;
        let logits = head.forward_features(&mut tape, &vars, prod)?;
        let ce = tape.cross_entropy(logits, &targets)?;
        let part = tape.scale(ce, chunk.len() as f64 * weight);
        loss += tape.value(part).item();
        let back = tape.backward(part);
        accumulate(&mut grads, &back.collect(&tape, &vars));
        for (rows, leaf) in [(&us, hu), (&vs, hv)] {
            let gl = back.get(leaf, tape.value(leaf));
            for (i, &row) in rows.iter().enumerate() {
                for (a, b) in dh.row_mut(row).iter_mut().zip(gl.row(i)) {
                    *a += b;
                }
            }
        }
    }
    // pull dL/dH back through the encoder: d/dH of sum(H * dH) is dH
    let count = dh.len() as f64;
    let seed = enc.leaf(dh);
    let surrogate = enc.mul(h, seed)?;
    let surrogate = enc.mean(surrogate);
    let surrogate = enc.scale(surrogate, count);
    accumulate(
        &mut grads,
        &enc.backward(surrogate).collect(&enc, &enc_vars),
    );
    Ok((loss, grads))
}

/// Denoising loss of one network on one draw and its gradient with respect
/// to that network's parameters.
pub fn network_step(
    params: &DenoiserParams,
    data: &TrainData,
    which: Component,
    draw: Draw,
    training: bool,
) -> Result<(f64, Vec<Tensor>)> {
    match which {
        Component::Attr => attr_step(params, data, draw, training),
        Component::Edge => edge_step(params, data, draw, training),
    }
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Sum of the networks' losses.
    pub loss: f64,
    pub grads: Vec<(Component, Vec<Tensor>)>,
}

/// Samples the draws of one training step. The synchronous model shares one
/// step and one corrupted graph between its networks; otherwise each network
/// draws from its own steps.
pub fn sample_draws<R: Rng + ?Sized>(
    sched: &NoiseSchedule,
    variant: Variant,
    components: &[Component],
    rng: &mut R,
) -> Vec<(Component, Draw)> {
    let mut pick = |c: Component| {
        let steps = sched.steps(c);
        Draw {
            t: steps[rng.random_range(0..steps.len())],
            seed: rng.random(),
        }
    };
    match variant {
        Variant::Sync => {
            let d = pick(Component::Attr);
            components.iter().map(|&c| (c, d)).collect()
        }
        Variant::Async => components.iter().map(|&c| (c, pick(c))).collect(),
    }
}

/// Loss and gradients of one training step over `components`.
pub fn loss_step<R: Rng + ?Sized>(
    params: &DenoiserParams,
    data: &TrainData,
    components: &[Component],
    rng: &mut R,
) -> Result<StepOutput> {
    let draws = sample_draws(&data.schedule, params.config.variant, components, rng);
    let mut out = StepOutput {
        loss: 0.0,
        grads: Vec::new(),
    };
    for (c, d) in draws {
        let (l, g) = network_step(params, data, c, d, true)?;
        out.loss += l;
        out.grads.push((c, g));
    }
    Ok(out)
}

/// Frozen validation draws: every step of each component, with seeds fixed by `seed`.
pub fn validation_draws(
    sched: &NoiseSchedule,
    variant: Variant,
    components: &[Component],
    seed: u64,
) -> Vec<(Component, Draw)> {
    let mut out = Vec::new();
    for &c in components {
        for &t in sched.steps(c) {
            // synchronous networks see the same corrupted graph at each step
            let tag = match variant {
                Variant::Sync => 0,
                Variant::Async => rng::tag(component_name(c)),
            };
            out.push((
                c,
                Draw {
                    t,
                    seed: rng::derive(seed, &[rng::tag("validation"), tag, t as u64]),
                },
            ));
        }
    }
    out
}

/// Sum over components of the mean denoising cross-entropy on the frozen draws.
pub fn elbo_proxy(
    params: &DenoiserParams,
    data: &TrainData,
    draws: &[(Component, Draw)],
) -> Result<f64> {
    let mut total = 0.0;
    for which in [Component::Attr, Component::Edge] {
        let mine: Vec<Draw> = draws.iter().filter(|d| d.0 == which).map(|d| d.1).collect();
        if mine.is_empty() {
            continue;
        }
        let mut sum = 0.0;
        for d in &mine {
            sum += network_loss(params, data, which, *d)?;
        }
        total += sum / mine.len() as f64;
    }
    Ok(total)
}

/// Loss without gradients, dropout off.
fn network_loss(
    params: &DenoiserParams,
    data: &TrainData,
    which: Component,
    draw: Draw,
) -> Result<f64> {
    match which {
        Component::Attr => attr_step(params, data, draw, false).map(|r| r.0),
        Component::Edge => {
            let g = &data.graph;
            let noisy = corrupt(g, &data.schedule, draw.t, draw.seed)?;
            let inputs = params.inputs(Component::Edge, &noisy, g.labels())?;
            let h = params.mpnn_encode(Component::Edge, &inputs, draw.t, data.schedule.total())?;
            let pairs = sample_pairs(g.n(), data.batch_pairs, draw.seed);
            let mut sum = 0.0;
            for chunk in pairs.chunks(data.pair_chunk.max(1)) {
                let logits = params.edge_logits(&h, chunk)?.softmax_rows();
                for (i, &(u, v)) in chunk.iter().enumerate() {
                    let p = logits.get(i, g.has_edge(u, v) as usize);
                    sum -= p.max(f64::MIN_POSITIVE).ln();
                }
            }
            Ok(sum / pairs.len().max(1) as f64)
        }
    }
}

fn component_name(c: Component) -> &'static str {
    match c {
        Component::Attr => "attr",
        Component::Edge => "edge",
    }
}

/// Patience counter over a lower-is-better score.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub bad: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            bad: 0,
        }
    }

    pub fn observe(&mut self, score: f64) -> Verdict {
        if score < self.best {
            self.best = score;
            self.bad = 0;
            Verdict::Improved
        } else {
            self.bad += 1;
            if self.bad >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    /// `joint` for synchronous training, otherwise the network name.
    pub phase: &'static str,
    pub step: usize,
    pub loss: f64,
    pub proxy: Option<f64>,
}

impl LogEntry {
    pub fn line(&self) -> String {
        match self.proxy {
            Some(p) => format!(
                "{} step={} loss={} proxy={}",
                self.phase, self.step, self.loss, p
            ),
            None => format!("{} step={} loss={}", self.phase, self.step, self.loss),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogEntry>,
}

/// Fresh parameters, optimizers, and metadata for `g` under `cfg`.
pub fn initial_checkpoint(data: &TrainData, cfg: &TrainConfig) -> Result<Checkpoint> {
    let params = DenoiserParams::new(
        cfg.model.clone(),
        data.schema(),
        rng::derive(cfg.seed, &[rng::tag("init")]),
    )?;
    Ok(Checkpoint {
        optim_attr: AmsGrad::new(
            checkpoint::optimizer_config(cfg, Component::Attr),
            &params.attr_params,
        ),
        optim_edge: AmsGrad::new(
            checkpoint::optimizer_config(cfg, Component::Edge),
            &params.edge_params,
        ),
        config: cfg.clone(),
        schedule: data.schedule.clone(),
        params,
        step: 0,
        best_score: f64::INFINITY,
        meta: data.meta.clone(),
    })
}

fn diverged(step: usize, what: &str) -> Error {
    Error::Training {
        step,
        message: format!("{what} is not finite"),
    }
}

/// Runs one phase over `components` until early stop or `max_steps`, leaving
/// the best parameters of those components in `ckpt`.
fn run_phase(
    ckpt: &mut Checkpoint,
    data: &TrainData,
    phase: &'static str,
    components: &[Component],
    log: &mut Vec<LogEntry>,
) -> Result<f64> {
    let cfg = ckpt.config.clone();
    let variant = cfg.variant();
    let draws = validation_draws(&data.schedule, variant, components, cfg.seed);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best: Vec<(Component, ParamSet)> = Vec::new();
    let snapshot = |ckpt: &Checkpoint| {
        components
            .iter()
            .map(|&c| (c, ckpt.params.params(c).clone()))
            .collect()
    };
    let mut step = 0;
    while step < cfg.max_steps {
        step += 1;
        ckpt.step += 1;
        let mut r = rng::stream(cfg.seed, &[rng::tag("train"), rng::tag(phase), step as u64]);
        let out = loss_step(&ckpt.params, data, components, &mut r)?;
        if !out.loss.is_finite() {
            return Err(diverged(step, "loss"));
        }
        for (c, mut grads) in out.grads {
            let norm = clip_grad_norm(&mut grads, cfg.max_grad_norm);
            if !norm.is_finite() {
                return Err(diverged(step, "gradient norm"));
            }
            let (params, optim) = match c {
                Component::Attr => (&mut ckpt.params.attr_params, &mut ckpt.optim_attr),
                Component::Edge => (&mut ckpt.params.edge_params, &mut ckpt.optim_edge),
            };
            optim.update(params, &grads);
        }
        let evaluate = step % cfg.eval_interval == 0 || step == cfg.max_steps;
        let mut entry = LogEntry {
            phase,
            step,
            loss: out.loss,
            proxy: None,
        };
        if evaluate {
            let proxy = elbo_proxy(&ckpt.params, data, &draws)?;
            if !proxy.is_finite() {
                return Err(diverged(step, "validation score"));
            }
            entry.proxy = Some(proxy);
            log.push(entry);
            match stopper.observe(proxy) {
                Verdict::Improved => best = snapshot(ckpt),
                Verdict::Continue => {}
                Verdict::Stop => break,
            }
        } else {
            log.push(entry);
        }
    }
    for (c, p) in best {
        *ckpt.params.params_mut(c) = p;
    }
    Ok(stopper.best)
}

/// Trains a model of `g` and returns the best-scoring checkpoint with the log.
pub fn train(g: &AttributedGraph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let data = TrainData::new(g, cfg)?;
    let mut ckpt = initial_checkpoint(&data, cfg)?;
    let mut log = Vec::new();
    ckpt.best_score = match cfg.variant() {
        Variant::Sync => run_phase(
            &mut ckpt,
            &data,
            "joint",
            &[Component::Attr, Component::Edge],
            &mut log,
        )?,
        Variant::Async => {
            let a = run_phase(&mut ckpt, &data, "attr", &[Component::Attr], &mut log)?;
            a + run_phase(&mut ckpt, &data, "edge", &[Component::Edge], &mut log)?
        }
    };
    Ok(TrainOutcome {
        checkpoint: ckpt,
        log,
    })
}
