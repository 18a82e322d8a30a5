//! Denoising networks: MPNN encoder with optional label channel, attribute
//! and edge decoders, and the structure-free attribute MLP of the async model.

mod attr_mlp;
mod heads;
mod inputs;
mod mpnn;
mod time;

use rand::Rng;

pub use attr_mlp::AttrMlp;
pub use heads::{segments, AttrHead, EdgeHead, EdgeScorer};
pub use inputs::{mean_adjacency, one_hot, GraphInputs};
pub use mpnn::{EncoderDims, MpnnEncoder};
pub use time::{time_features, TimeEmbedding};

use crate::diffusion::{Component, NoisyGraph};
use crate::error::{Error, Result};
use crate::numerics::Var;
use crate::rng;
use crate::{ParamSet, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Sync,
    Async,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Sync => "sync",
            Variant::Async => "async",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sync" => Some(Variant::Sync),
            "async" => Some(Variant::Async),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserConfig {
    pub variant: Variant,
    pub conditional: bool,
    pub time_hidden: usize,
    pub hidden: usize,
    pub label_hidden: usize,
    pub layers: usize,
    pub edge_hidden: usize,
    /// Hidden width of the async attribute MLP.
    pub attr_mlp_hidden: usize,
    pub dropout: f64,
}

impl DenoiserConfig {
    /// Sizes used for citation-scale graphs.
    pub fn citation(variant: Variant, conditional: bool) -> Self {
        Self {
            variant,
            conditional,
            time_hidden: 32,
            hidden: 512,
            label_hidden: 64,
            layers: 2,
            edge_hidden: 128,
            attr_mlp_hidden: 512,
            dropout: if variant == Variant::Async { 0.1 } else { 0.0 },
        }
    }

    /// Sizes used for co-purchase-scale graphs; `large` selects the widest attribute MLP.
    pub fn copurchase(variant: Variant, conditional: bool, large: bool) -> Self {
        Self {
            time_hidden: 16,
            attr_mlp_hidden: if large { 1024 } else { 512 },
            dropout: 0.0,
            ..Self::citation(variant, conditional)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden == 0
            || self.time_hidden == 0
            || self.edge_hidden == 0
            || self.attr_mlp_hidden == 0
        {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        if self.conditional && self.label_hidden == 0 {
            return Err(Error::Config("label hidden size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Attribute layout the networks are built for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub cardinalities: Vec<usize>,
    pub num_labels: usize,
}

#[derive(Clone, Debug)]
pub enum AttrNet {
    Mpnn {
        encoder: MpnnEncoder,
        head: AttrHead,
    },
    Mlp(AttrMlp),
}

#[derive(Clone, Debug)]
pub struct EdgeNet {
    pub encoder: MpnnEncoder,
    pub head: EdgeHead,
}

/// Weights of both denoisers. Each network has its own parameter set so the
/// two can be optimized with different learning rates.
#[derive(Clone, Debug)]
pub struct DenoiserParams {
    pub config: DenoiserConfig,
    pub schema: Schema,
    pub attr_net: AttrNet,
    pub attr_params: ParamSet,
    pub edge_net: EdgeNet,
    pub edge_params: ParamSet,
}

impl DenoiserParams {
    pub fn new(config: DenoiserConfig, schema: Schema, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.conditional && schema.num_labels < 1 {
            return Err(Error::Config("conditional model requires labels".into()));
        }
        if schema.cardinalities.is_empty() {
            return Err(Error::Config("graphs need at least one attribute".into()));
        }
        let labels = config.conditional.then_some(schema.num_labels);
        let dims = EncoderDims {
            input: schema.cardinalities.iter().sum(),
            labels,
            hidden: config.hidden,
            label_hidden: config.label_hidden,
            time_hidden: config.time_hidden,
            layers: config.layers,
        };
        let mut r = rng::stream(seed, &[rng::tag("init_attr")]);
        let mut attr_params = ParamSet::new();
        let attr_net = match config.variant {
            Variant::Sync => {
                let encoder = MpnnEncoder::new(&mut attr_params, "encoder", dims, &mut r);
                let head = AttrHead::new(
                    &mut attr_params,
                    "head",
                    dims.output(),
                    &schema.cardinalities,
                    &mut r,
                );
                AttrNet::Mpnn { encoder, head }
            }
            Variant::Async => AttrNet::Mlp(AttrMlp::new(
                &mut attr_params,
                "mlp",
                &schema.cardinalities,
                labels,
                config.attr_mlp_hidden,
                config.time_hidden,
                &mut r,
            )),
        };
        let mut r = rng::stream(seed, &[rng::tag("init_edge")]);
        let mut edge_params = ParamSet::new();
        let encoder = MpnnEncoder::new(&mut edge_params, "encoder", dims, &mut r);
        let head = EdgeHead::new(
            &mut edge_params,
            "head",
            dims.output(),
            config.edge_hidden,
            &mut r,
        );
        Ok(Self {
            config,
            schema,
            attr_net,
            attr_params,
            edge_net: EdgeNet { encoder, head },
            edge_params,
        })
    }

    pub fn params(&self, which: Component) -> &ParamSet {
        match which {
            Component::Attr => &self.attr_params,
            Component::Edge => &self.edge_params,
        }
    }

    pub fn params_mut(&mut self, which: Component) -> &mut ParamSet {
        match which {
            Component::Attr => &mut self.attr_params,
            Component::Edge => &mut self.edge_params,
        }
    }

    pub fn segments(&self) -> Vec<(usize, usize)> {
        segments(&self.schema.cardinalities)
    }

    /// Labels to feed the label channel, or `None` for unconditional models.
    pub fn label_input<'a>(&self, labels: Option<&'a [u32]>) -> Result<Option<(&'a [u32], usize)>> {
        if !self.config.conditional {
            return Ok(None);
        }
        labels
            .map(|y| (y, self.schema.num_labels))
            .map(Some)
            .ok_or_else(|| Error::Config("conditional model requires labels".into()))
    }

    /// Encodes a noisy graph for the given network. Attributes and structure
    /// both come from `noisy`.
    pub fn inputs(
        &self,
        which: Component,
        noisy: &NoisyGraph,
        labels: Option<&[u32]>,
    ) -> Result<GraphInputs> {
        if noisy.cardinalities() != self.schema.cardinalities.as_slice() {
            return Err(Error::Config(
                "graph attributes do not match the model schema".into(),
            ));
        }
        let y = self.label_input(labels)?;
        Ok(match (which, &self.attr_net) {
            (Component::Attr, AttrNet::Mlp(_)) => {
                GraphInputs::attributes_only(noisy.attrs(), noisy.cardinalities(), y)
            }
            _ => GraphInputs::new(noisy, noisy.attrs(), y),
        })
    }

    /// Attribute logits on a tape, `n x sum(C_f)`.
    #[allow(clippy::too_many_arguments)]
    pub fn attr_forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        inputs: &GraphInputs,
        t: usize,
        total: usize,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let p = self.config.dropout;
        Ok(match &self.attr_net {
            AttrNet::Mpnn { encoder, head } => {
                let h = encoder.forward(tape, vars, inputs, t, total, p, training, rng)?;
                head.forward(tape, vars, h)?
            }
            AttrNet::Mlp(mlp) => mlp.forward(tape, vars, inputs, t, total, p, training, rng)?,
        })
    }

    /// Edge-network node representations on a tape.
    #[allow(clippy::too_many_arguments)]
    pub fn edge_encode<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        inputs: &GraphInputs,
        t: usize,
        total: usize,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let p = self.config.dropout;
        Ok(self
            .edge_net
            .encoder
            .forward(tape, vars, inputs, t, total, p, training, rng)?)
    }

    /// `h^(t)` of the given network.
    pub fn time_embedding(&self, which: Component, t: usize, total: usize) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.params(which).bind(&mut tape);
        let h = match (which, &self.attr_net) {
            (Component::Attr, AttrNet::Mpnn { encoder, .. }) => {
                encoder.time_embedding(&mut tape, &vars, t, total)?
            }
            (Component::Attr, AttrNet::Mlp(mlp)) => {
                mlp.time_embedding(&mut tape, &vars, t, total)?
            }
            (Component::Edge, _) => self
                .edge_net
                .encoder
                .time_embedding(&mut tape, &vars, t, total)?,
        };
        Ok(tape.value(h).clone())
    }

    /// Representations `H` of the network's MPNN, dropout off.
    pub fn mpnn_encode(
        &self,
        which: Component,
        inputs: &GraphInputs,
        t: usize,
        total: usize,
    ) -> Result<Tensor> {
        let encoder = match (which, &self.attr_net) {
            (Component::Attr, AttrNet::Mpnn { encoder, .. }) => encoder,
            (Component::Attr, AttrNet::Mlp(_)) => {
                return Err(Error::Config(
                    "the async attribute network has no MPNN".into(),
                ))
            }
            (Component::Edge, _) => &self.edge_net.encoder,
        };
        let mut tape = Tape::new();
        let vars = self.params(which).bind(&mut tape);
        let mut r = rng::stream(0, &[]);
        let h = encoder.forward(&mut tape, &vars, inputs, t, total, 0.0, false, &mut r)?;
        Ok(tape.value(h).clone())
    }

    /// Attribute logits from representations `H` of the sync attribute encoder.
    pub fn attr_logits(&self, h: &Tensor) -> Result<Tensor> {
        let AttrNet::Mpnn { head, .. } = &self.attr_net else {
            return Err(Error::Config(
                "the async attribute network has no MPNN head".into(),
            ));
        };
        let mut tape = Tape::new();
        let vars = self.attr_params.bind(&mut tape);
        let hv = tape.leaf(h.clone());
        let out = head.forward(&mut tape, &vars, hv)?;
        Ok(tape.value(out).clone())
    }

    /// `len(pairs) x 2` edge logits from edge-encoder representations.
    pub fn edge_logits(&self, h: &Tensor, pairs: &[(usize, usize)]) -> Result<Tensor> {
        if let Some(&(u, v)) = pairs.iter().find(|(u, v)| u == v) {
            return Err(Error::Argument(format!("pair ({u}, {v}) is a self-pair")));
        }
        let mut tape = Tape::new();
        let vars = self.edge_params.bind(&mut tape);
        let hv = tape.leaf(h.clone());
        let out = self.edge_net.head.forward(&mut tape, &vars, hv, pairs)?;
        Ok(tape.value(out).clone())
    }

    /// Attribute logits of the async MLP, dropout off.
    pub fn async_attr_denoise(
        &self,
        inputs: &GraphInputs,
        t: usize,
        total: usize,
    ) -> Result<Tensor> {
        let AttrNet::Mlp(mlp) = &self.attr_net else {
            return Err(Error::Config("model is not asynchronous".into()));
        };
        let mut tape = Tape::new();
        let vars = self.attr_params.bind(&mut tape);
        let mut r = rng::stream(0, &[]);
        let out = mlp.forward(&mut tape, &vars, inputs, t, total, 0.0, false, &mut r)?;
        Ok(tape.value(out).clone())
    }

    /// Attribute logits of whichever attribute network the model has, dropout off.
    pub fn predict_attrs(&self, inputs: &GraphInputs, t: usize, total: usize) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.attr_params.bind(&mut tape);
        let mut r = rng::stream(0, &[]);
        let out = self.attr_forward(&mut tape, &vars, inputs, t, total, false, &mut r)?;
        Ok(tape.value(out).clone())
    }

    /// All-pairs scorer over edge-encoder representations.
    pub fn edge_scorer(&self, h: &Tensor) -> EdgeScorer<f64> {
        self.edge_net.head.scorer(&self.edge_params, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::AttributedGraph;
    use crate::numerics::grad_check;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(variant: Variant, conditional: bool) -> DenoiserConfig {
        DenoiserConfig {
            variant,
            conditional,
            time_hidden: 3,
            hidden: 4,
            label_hidden: 3,
            layers: 2,
            edge_hidden: 5,
            attr_mlp_hidden: 6,
            dropout: 0.0,
        }
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> AttributedGraph {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if r.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let attrs = (0..n * 2)
            .map(|i| {
                if i % 2 == 0 {
                    r.random_range(0..2)
                } else {
                    r.random_range(0..3)
                }
            })
            .collect();
        let labels = (0..n).map(|_| r.random_range(0..3)).collect();
        AttributedGraph::new("r", n, edges, vec![2, 3], attrs, Some((3, labels))).unwrap()
    }

    fn schema() -> Schema {
        Schema {
            cardinalities: vec![2, 3],
            num_labels: 3,
        }
    }

    /// Nudges every parameter so that biases and affine terms are non-trivial.
    fn perturb(params: &mut ParamSet, seed: u64) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for t in params.tensors_mut() {
            for x in t.data_mut() {
                *x += 0.2 * (r.random::<f64>() - 0.5);
            }
        }
    }

    #[test]
    fn readout_width_for_citation_sizes() {
        let dims = EncoderDims {
            input: 10,
            labels: None,
            hidden: 512,
            label_hidden: 64,
            time_hidden: 32,
            layers: 2,
        };
        assert_eq!(dims.output(), 1568);
        assert_eq!(
            EncoderDims {
                labels: Some(7),
                ..dims
            }
            .output(),
            1568 + 3 * 64
        );
    }

    #[test]
    fn time_embedding_shape_and_determinism() {
        let p = DenoiserParams::new(DenoiserConfig::citation(Variant::Sync, false), schema(), 1)
            .unwrap();
        let a = p.time_embedding(Component::Edge, 0, 3).unwrap();
        let b = p.time_embedding(Component::Edge, 3, 3).unwrap();
        assert_eq!(a.shape(), &[1, 32]);
        assert_ne!(a, b);
        assert_eq!(a, p.time_embedding(Component::Edge, 0, 3).unwrap());
    }

    #[test]
    fn conditional_without_labels_is_rejected() {
        let g = random_graph(5, 0.5, 1);
        let p = DenoiserParams::new(tiny(Variant::Sync, true), schema(), 1).unwrap();
        assert!(matches!(
            p.inputs(Component::Edge, &g, None),
            Err(Error::Config(_))
        ));
        let no_labels = Schema {
            num_labels: 0,
            ..schema()
        };
        assert!(DenoiserParams::new(tiny(Variant::Sync, true), no_labels, 1).is_err());
    }

    #[test]
    fn encoder_is_permutation_equivariant() {
        for seed in 0..5 {
            let g = random_graph(20, 0.2, seed);
            let mut params =
                DenoiserParams::new(tiny(Variant::Sync, true), schema(), seed).unwrap();
            perturb(&mut params.edge_params, seed);
            let mut perm: Vec<usize> = (0..20).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 100));
            let f = g.num_attrs();
            let mut attrs = vec![0; g.attrs().len()];
            let mut labels = vec![0; 20];
            for v in 0..20 {
                attrs[perm[v] * f..(perm[v] + 1) * f].copy_from_slice(g.attr_row(v));
                labels[perm[v]] = g.labels().unwrap()[v];
            }
            let pg = AttributedGraph::new(
                "p",
                20,
                g.edges().iter().map(|&(u, v)| (perm[u], perm[v])),
                g.cardinalities().to_vec(),
                attrs,
                Some((3, labels)),
            )
            .unwrap();
            let h = params
                .mpnn_encode(
                    Component::Edge,
                    &params.inputs(Component::Edge, &g, g.labels()).unwrap(),
                    2,
                    3,
                )
                .unwrap();
            let hp = params
                .mpnn_encode(
                    Component::Edge,
                    &params.inputs(Component::Edge, &pg, pg.labels()).unwrap(),
                    2,
                    3,
                )
                .unwrap();
            for v in 0..20 {
                for (a, b) in h.row(v).iter().zip(hp.row(perm[v])) {
                    assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn label_perturbation_is_local() {
        let n = 8;
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        let g = AttributedGraph::new(
            "p",
            n,
            edges,
            vec![2, 3],
            vec![0; 2 * n],
            Some((3, vec![0; n])),
        )
        .unwrap();
        let mut y = vec![0u32; n];
        y[0] = 2;
        let g2 = AttributedGraph::new(
            "p",
            n,
            g.edges().to_vec(),
            vec![2, 3],
            vec![0; 2 * n],
            Some((3, y)),
        )
        .unwrap();
        let mut params = DenoiserParams::new(tiny(Variant::Sync, true), schema(), 3).unwrap();
        perturb(&mut params.edge_params, 3);
        let enc = |g: &AttributedGraph| {
            params
                .mpnn_encode(
                    Component::Edge,
                    &params.inputs(Component::Edge, g, g.labels()).unwrap(),
                    1,
                    3,
                )
                .unwrap()
        };
        let (a, b) = (enc(&g), enc(&g2));
        for v in 0..n {
            let changed = a.row(v) != b.row(v);
            assert_eq!(changed, v <= 2, "node {v}");
        }
    }

    #[test]
    fn edge_logits_are_symmetric_and_zero_rows_collapse() {
        let params = DenoiserParams::new(tiny(Variant::Sync, false), schema(), 4).unwrap();
        let d = params.edge_net.encoder.dims.output();
        let mut h = Tensor::from_fn(6, d, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        h.row_mut(0).iter_mut().for_each(|x| *x = 0.0);
        let pairs: Vec<_> = (0..6)
            .flat_map(|u| (0..6).filter(move |&v| v != u).map(move |v| (u, v)))
            .collect();
        let logits = params.edge_logits(&h, &pairs).unwrap();
        for (i, &(u, v)) in pairs.iter().enumerate() {
            let j = pairs.iter().position(|&p| p == (v, u)).unwrap();
            assert_eq!(logits.row(i), logits.row(j));
            if u == 0 {
                assert_eq!(logits.row(i), logits.row(0));
            }
        }
        assert!(params.edge_logits(&h, &[(1, 1)]).is_err());
    }

    #[test]
    fn all_pairs_scorer_matches_head() {
        let mut params = DenoiserParams::new(tiny(Variant::Sync, false), schema(), 5).unwrap();
        perturb(&mut params.edge_params, 5);
        let d = params.edge_net.encoder.dims.output();
        let h = Tensor::from_fn(7, d, |i, j| ((i * 5 + j * 3) % 13) as f64 / 13.0 - 0.5);
        let scorer = params.edge_scorer(&h);
        let mut row = Vec::new();
        for u in 0..7 {
            scorer.row_probabilities(u, &mut row);
            let pairs: Vec<_> = (u + 1..7).map(|v| (u, v)).collect();
            if pairs.is_empty() {
                assert!(row.is_empty());
                continue;
            }
            let logits = params.edge_logits(&h, &pairs).unwrap().softmax_rows();
            for (k, &p) in row.iter().enumerate() {
                assert!((p - logits.get(k, 1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_head_gives_uniform_attr_predictions() {
        let mut params = DenoiserParams::new(tiny(Variant::Sync, false), schema(), 6).unwrap();
        for t in params.attr_params.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        let d = match &params.attr_net {
            AttrNet::Mpnn { encoder, .. } => encoder.dims.output(),
            AttrNet::Mlp(_) => unreachable!(),
        };
        let logits = params.attr_logits(&Tensor::zeros(4, d)).unwrap();
        assert_eq!(logits.shape(), &[4, 5]);
        assert!(logits.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn async_mlp_ignores_structure() {
        let params = DenoiserParams::new(tiny(Variant::Async, true), schema(), 7).unwrap();
        let a = AttributedGraph::new(
            "a",
            3,
            [(0, 1)],
            vec![2, 3],
            vec![1, 2, 1, 2, 0, 0],
            Some((3, vec![1, 1, 2])),
        )
        .unwrap();
        let inputs = params.inputs(Component::Attr, &a, a.labels()).unwrap();
        let out = params.async_attr_denoise(&inputs, 4, 6).unwrap();
        assert_eq!(out.shape(), &[3, 5]);
        assert_eq!(out.row(0), out.row(1));
        assert_ne!(out.row(0), out.row(2));
        let b = a.with_edges([(1, 2)]).unwrap();
        let inputs_b = params.inputs(Component::Attr, &b, b.labels()).unwrap();
        assert_eq!(params.async_attr_denoise(&inputs_b, 4, 6).unwrap(), out);
    }

    fn check_attr_gradients(variant: Variant, conditional: bool) {
        let g = random_graph(9, 0.3, 11);
        let mut params = DenoiserParams::new(tiny(variant, conditional), schema(), 11).unwrap();
        perturb(&mut params.attr_params, 12);
        let inputs = params.inputs(Component::Attr, &g, g.labels()).unwrap();
        let targets: Vec<usize> = g.attrs().iter().map(|&a| a as usize).collect();
        let segs = params.segments();
        let err = grad_check(params.attr_params.tensors(), 1e-5, |tape, vars| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let logits = params
                .attr_forward(tape, vars, &inputs, 2, 3, false, &mut r)
                .map_err(|e| match e {
                    Error::Numerics(n) => n,
                    other => panic!("{other}"),
                })?;
            tape.segmented_cross_entropy(logits, &segs, &targets)
        })
        .unwrap();
        assert!(err < 1e-4, "{variant:?} conditional={conditional}: {err}");
    }

    #[test]
    fn attribute_networks_pass_gradient_check() {
        check_attr_gradients(Variant::Sync, false);
        check_attr_gradients(Variant::Sync, true);
        check_attr_gradients(Variant::Async, false);
        check_attr_gradients(Variant::Async, true);
    }

    #[test]
    fn edge_network_passes_gradient_check() {
        for conditional in [false, true] {
            let g = random_graph(9, 0.3, 13);
            let mut params =
                DenoiserParams::new(tiny(Variant::Sync, conditional), schema(), 13).unwrap();
            perturb(&mut params.edge_params, 14);
            let inputs = params.inputs(Component::Edge, &g, g.labels()).unwrap();
            let pairs = [(0, 1), (2, 5), (3, 8), (1, 7), (4, 6)];
            let targets: Vec<usize> = pairs
                .iter()
                .map(|&(u, v)| g.has_edge(u, v) as usize)
                .collect();
            let err = grad_check(params.edge_params.tensors(), 1e-5, |tape, vars| {
                let mut r = ChaCha8Rng::seed_from_u64(0);
                let h = params
                    .edge_encode(tape, vars, &inputs, 1, 3, false, &mut r)
                    .unwrap();
                let logits = params.edge_net.head.forward(tape, vars, h, &pairs)?;
                tape.cross_entropy(logits, &targets)
            })
            .unwrap();
            assert!(err < 1e-4, "conditional={conditional}: {err}");
        }
    }
}
