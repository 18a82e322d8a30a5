//! Forward corruption and prior sampling without touching all node pairs.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::{Component, NoiseSchedule};
use crate::error::{Error, Result};
use crate::graphdata::{num_pairs, pair_index, sample_distinct_pairs, AttributedGraph};
use crate::rng;

/// A graph at some diffusion step. It satisfies every graph invariant, so the
/// clean graph type is reused.
pub type NoisyGraph = AttributedGraph;

/// Inverse-CDF draw from `m` with a uniform `v` in `[0, 1)`.
fn categorical(m: &[f64], v: f64) -> u32 {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in m.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if v < acc {
                return k as u32;
            }
        }
    }
    last as u32
}

/// Resamples each cell from the row of `alpha I + (1 - alpha) 1 m^T` indexed by
/// its current class. Every cell uses its own keyed uniform.
pub fn resample_cells(attrs: &[u32], marginals: &[Vec<f64>], alpha: f64, key: u64) -> Vec<u32> {
    if alpha >= 1.0 {
        return attrs.to_vec();
    }
    let f = marginals.len();
    (0..attrs.len())
        .into_par_iter()
        .map(|i| {
            let u = rng::keyed_uniform(key, &[i as u64]);
            if u < alpha {
                attrs[i]
            } else {
                categorical(&marginals[i % f], (u - alpha) / (1.0 - alpha))
            }
        })
        .collect()
}

/// Resamples every unordered pair of `g` from the edge transition with keep
/// probability `alpha`: each edge survives with probability
/// `alpha + (1 - alpha) p`, and a binomial number of fresh pairs is drawn
/// uniformly from the non-edges, each non-edge turning on with `(1 - alpha) p`.
pub fn resample_edges(
    g: &AttributedGraph,
    alpha: f64,
    p_edge: f64,
    key: u64,
) -> Result<Vec<(usize, usize)>> {
    if alpha >= 1.0 {
        return Ok(g.edges().to_vec());
    }
    let n = g.n();
    let keep = alpha + (1.0 - alpha) * p_edge;
    let mut out: Vec<(usize, usize)> = g
        .edges()
        .par_iter()
        .copied()
        .filter(|&(u, v)| rng::keyed_uniform(key, &[rng::tag("keep"), pair_index(n, u, v)]) < keep)
        .collect();
    let fresh_p = ((1.0 - alpha) * p_edge).clamp(0.0, 1.0);
    let non_edges = num_pairs(n) - g.num_edges() as u64;
    let mut r = rng::stream(key, &[rng::tag("fresh")]);
    let k = Binomial::new(non_edges, fresh_p)
        .map_err(|e| Error::Sampling(e.to_string()))?
        .sample(&mut r);
    let fresh = sample_distinct_pairs(
        n,
        k,
        g.num_edges() as u64,
        |u, v| g.has_edge(u, v),
        None,
        &mut r,
    )?;
    out.extend(fresh);
    out.sort_unstable();
    Ok(out)
}

fn key(seed: u64, which: Component, gamma: usize) -> u64 {
    let name = match which {
        Component::Attr => "corrupt_attr",
        Component::Edge => "corrupt_edge",
    };
    rng::derive(seed, &[rng::tag(name), gamma as u64])
}

/// Attributes of `g` sampled from `q(x_t | x_0)`.
///
/// Randomness is keyed by the component's step count rather than `t`, so two
/// steps with the same count give identical draws.
pub fn corrupt_attrs(
    g: &AttributedGraph,
    sched: &NoiseSchedule,
    t: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    let alpha = sched.alpha_bar(t, Component::Attr)?;
    let k = key(seed, Component::Attr, sched.gamma(t, Component::Attr));
    Ok(resample_cells(g.attrs(), &sched.marginals().attr, alpha, k))
}

/// Edges of `g` sampled from `q(A_t | A_0)`, keyed like [`corrupt_attrs`].
pub fn corrupt_edges(
    g: &AttributedGraph,
    sched: &NoiseSchedule,
    t: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let alpha = sched.alpha_bar(t, Component::Edge)?;
    let k = key(seed, Component::Edge, sched.gamma(t, Component::Edge));
    resample_edges(g, alpha, sched.marginals().edge[1], k)
}

/// `G_t ~ q(G_t | G_0)`. Labels are carried over unchanged.
pub fn corrupt(
    g: &AttributedGraph,
    sched: &NoiseSchedule,
    t: usize,
    seed: u64,
) -> Result<NoisyGraph> {
    let attrs = corrupt_attrs(g, sched, t, seed)?;
    let edges = corrupt_edges(g, sched, t, seed)?;
    AttributedGraph::new(
        g.name(),
        g.n(),
        edges,
        g.cardinalities().to_vec(),
        attrs,
        g.label_pair(),
    )
}

/// `G_t ~ q(G_t | G_{t-1})`.
pub fn corrupt_step(
    prev: &NoisyGraph,
    sched: &NoiseSchedule,
    t: usize,
    seed: u64,
) -> Result<NoisyGraph> {
    let a_attr = sched.step_alpha(t, Component::Attr)?;
    let a_edge = sched.step_alpha(t, Component::Edge)?;
    let step_key = |name: &str| rng::derive(seed, &[rng::tag(name), t as u64]);
    let attrs = resample_cells(
        prev.attrs(),
        &sched.marginals().attr,
        a_attr,
        step_key("step_attr"),
    );
    let edges = resample_edges(
        prev,
        a_edge,
        sched.marginals().edge[1],
        step_key("step_edge"),
    )?;
    AttributedGraph::new(
        prev.name(),
        prev.n(),
        edges,
        prev.cardinalities().to_vec(),
        attrs,
        prev.label_pair(),
    )
}

/// Attributes drawn i.i.d. from the attribute marginals.
pub fn prior_attrs(sched: &NoiseSchedule, n_hat: usize, seed: u64) -> Vec<u32> {
    let m = &sched.marginals().attr;
    let zeros = vec![0u32; n_hat * m.len()];
    resample_cells(&zeros, m, 0.0, rng::derive(seed, &[rng::tag("prior_attr")]))
}

/// Independent Bernoulli edges on every unordered pair, drawn as a binomial
/// count of distinct uniform pairs.
pub fn prior_edges(sched: &NoiseSchedule, n_hat: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let p = sched.marginals().edge[1].clamp(0.0, 1.0);
    let mut r = rng::stream(seed, &[rng::tag("prior_edge")]);
    let k = Binomial::new(num_pairs(n_hat), p)
        .map_err(|e| Error::Sampling(e.to_string()))?
        .sample(&mut r);
    sample_distinct_pairs(n_hat, k, 0, |_, _| false, None, &mut r)
}

/// Sample from the prior: attributes and edges independent from their marginals.
pub fn prior_sample(sched: &NoiseSchedule, n_hat: usize, seed: u64) -> Result<NoisyGraph> {
    if n_hat == 0 {
        return Err(Error::Argument("node count must be at least 1".into()));
    }
    let cards = sched.marginals().attr.iter().map(Vec::len).collect();
    AttributedGraph::new(
        "prior",
        n_hat,
        prior_edges(sched, n_hat, seed)?,
        cards,
        prior_attrs(sched, n_hat, seed),
        None,
    )
}
