//! Noise schedules, forward corruption, and exact posteriors of the discrete
//! diffusion over node attributes and edges.

mod corrupt;
mod transition;

pub use corrupt::{
    corrupt, corrupt_attrs, corrupt_edges, corrupt_step, prior_attrs, prior_edges, prior_sample,
    resample_cells, resample_edges, NoisyGraph,
};
pub use transition::{
    model_posterior, model_posterior_into, true_posterior, Prob, TransitionMatrix,
};

use crate::error::{Error, Result};
use crate::graphdata::Marginals;

/// Offset of the cosine schedule.
pub const COSINE_OFFSET: f64 = 0.008;

/// What a transition acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    Attr,
    Edge,
}

/// A single categorical variable family: attribute column `f` or edge existence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Attr(usize),
    Edge,
}

impl Channel {
    pub fn component(self) -> Component {
        match self {
            Channel::Attr(_) => Component::Attr,
            Channel::Edge => Component::Edge,
        }
    }
}

/// Step partition and cumulative keep-probabilities of both components.
///
/// `alpha_bar` arrays are indexed by the within-component step count, so
/// entry 0 is exactly 1 and the last entry is the value after the
/// component's final corrupting step.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    total: usize,
    steps_attr: Vec<usize>,
    steps_edge: Vec<usize>,
    s: f64,
    alpha_bar_attr: Vec<f64>,
    alpha_bar_edge: Vec<f64>,
    marginals: Marginals,
}

/// `cos^2(pi/2 * (g/len + s) / (1 + s))` for `g >= 1`, and 1 at `g = 0`.
pub fn cosine_alpha_bars(len: usize, s: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    out.push(1.0);
    for g in 1..=len {
        let x = std::f64::consts::FRAC_PI_2 * (g as f64 / len as f64 + s) / (1.0 + s);
        out.push(x.cos().powi(2));
    }
    out
}

impl NoiseSchedule {
    /// Attributes and edges corrupted together on steps `1..=total`.
    pub fn sync(total: usize, s: f64, marginals: Marginals) -> Result<Self> {
        let all: Vec<usize> = (1..=total).collect();
        Self::general(total, all.clone(), all, s, marginals)
    }

    /// Edges on `1..=edge_steps`, then attributes on the following `attr_steps`.
    pub fn asynchronous(
        attr_steps: usize,
        edge_steps: usize,
        s: f64,
        marginals: Marginals,
    ) -> Result<Self> {
        let total = attr_steps + edge_steps;
        Self::general(
            total,
            (edge_steps + 1..=total).collect(),
            (1..=edge_steps).collect(),
            s,
            marginals,
        )
    }

    /// Arbitrary step sets within `1..=total`.
    pub fn general(
        total: usize,
        mut steps_attr: Vec<usize>,
        mut steps_edge: Vec<usize>,
        s: f64,
        marginals: Marginals,
    ) -> Result<Self> {
        if total == 0 {
            return Err(Error::Config("a schedule needs at least one step".into()));
        }
        for (name, steps) in [("attribute", &mut steps_attr), ("edge", &mut steps_edge)] {
            steps.sort_unstable();
            steps.dedup();
            if steps.is_empty() {
                return Err(Error::Config(format!("{name} step set is empty")));
            }
            if steps[0] == 0 || *steps.last().unwrap() > total {
                return Err(Error::Config(format!(
                    "{name} steps must lie in 1..={total}"
                )));
            }
        }
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Config(format!(
                "schedule offset {s} must be nonnegative"
            )));
        }
        let alpha_bar_attr = cosine_alpha_bars(steps_attr.len(), s);
        let alpha_bar_edge = cosine_alpha_bars(steps_edge.len(), s);
        Ok(Self {
            total,
            steps_attr,
            steps_edge,
            s,
            alpha_bar_attr,
            alpha_bar_edge,
            marginals,
        })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn offset(&self) -> f64 {
        self.s
    }

    pub fn marginals(&self) -> &Marginals {
        &self.marginals
    }

    pub fn steps(&self, which: Component) -> &[usize] {
        match which {
            Component::Attr => &self.steps_attr,
            Component::Edge => &self.steps_edge,
        }
    }

    pub fn alpha_bars(&self, which: Component) -> &[f64] {
        match which {
            Component::Attr => &self.alpha_bar_attr,
            Component::Edge => &self.alpha_bar_edge,
        }
    }

    /// True when the two components use disjoint contiguous step ranges with
    /// edges first.
    pub fn is_async(&self) -> bool {
        self.steps_edge.last() < self.steps_attr.first()
    }

    /// Number of the component's steps at or before `t`.
    pub fn gamma(&self, t: usize, which: Component) -> usize {
        self.steps(which).partition_point(|&s| s <= t)
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t > self.total {
            return Err(Error::Argument(format!(
                "step {t} outside 0..={}",
                self.total
            )));
        }
        Ok(())
    }

    pub fn alpha_bar(&self, t: usize, which: Component) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.alpha_bars(which)[self.gamma(t, which)])
    }

    fn marginal(&self, ch: Channel) -> Vec<f64> {
        match ch {
            Channel::Attr(f) => self.marginals.attr[f].clone(),
            Channel::Edge => self.marginals.edge.to_vec(),
        }
    }

    /// Cumulative transition from step 0 to `t`.
    pub fn qbar(&self, t: usize, ch: Channel) -> Result<TransitionMatrix<f64>> {
        Ok(TransitionMatrix::new(
            self.alpha_bar(t, ch.component())?,
            self.marginal(ch),
        ))
    }

    /// One-step transition from `t - 1` to `t`.
    pub fn q_step(&self, t: usize, ch: Channel) -> Result<TransitionMatrix<f64>> {
        Ok(TransitionMatrix::new(
            self.step_alpha(t, ch.component())?,
            self.marginal(ch),
        ))
    }

    /// Keep-probability of the one-step transition at `t`.
    pub fn step_alpha(&self, t: usize, which: Component) -> Result<f64> {
        if t == 0 {
            return Err(Error::Argument(
                "one-step transitions start at t = 1".into(),
            ));
        }
        let cur = self.alpha_bar(t, which)?;
        let prev = self.alpha_bar(t - 1, which)?;
        if prev <= 0.0 {
            return Err(Error::Singular(format!(
                "cumulative keep-probability is 0 at step {}",
                t - 1
            )));
        }
        Ok(cur / prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marg() -> Marginals {
        Marginals {
            attr: vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.3]],
            edge: [0.9, 0.1],
        }
    }

    fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn alpha_bar_endpoints() {
        let s = NoiseSchedule::asynchronous(6, 9, COSINE_OFFSET, marg()).unwrap();
        assert_eq!(s.total(), 15);
        assert_eq!(s.alpha_bar(0, Component::Edge).unwrap(), 1.0);
        assert_eq!(s.alpha_bar(5, Component::Attr).unwrap(), 1.0);
        assert!(s.alpha_bar(15, Component::Attr).unwrap() <= 1e-30);
        assert!(s.alpha_bar(15, Component::Attr).unwrap() > 0.0);
        assert!(s.alpha_bar(16, Component::Attr).is_err());
        // edges stay at their final state once their window is over
        assert_eq!(
            s.alpha_bar(12, Component::Edge).unwrap(),
            s.alpha_bar(9, Component::Edge).unwrap()
        );
        let ab = s.alpha_bars(Component::Edge);
        assert!(ab.windows(2).all(|w| w[1] < w[0]));
        assert!(s.is_async());
        assert!(!NoiseSchedule::sync(3, COSINE_OFFSET, marg())
            .unwrap()
            .is_async());
    }

    #[test]
    fn ten_step_end_is_numerically_zero() {
        let ab = cosine_alpha_bars(10, COSINE_OFFSET);
        assert!(ab[10] <= 1e-30);
    }

    #[test]
    fn step_ratio() {
        let m = Marginals {
            attr: vec![],
            edge: [0.5, 0.5],
        };
        let s = NoiseSchedule::sync(3, COSINE_OFFSET, m).unwrap();
        let a = s.alpha_bar(1, Component::Edge).unwrap();
        let b = s.alpha_bar(2, Component::Edge).unwrap();
        assert_eq!(s.step_alpha(2, Component::Edge).unwrap(), b / a);
        assert!(s.step_alpha(0, Component::Edge).is_err());
    }

    #[test]
    fn cumulative_equals_product_of_steps() {
        for sched in [
            NoiseSchedule::sync(3, COSINE_OFFSET, marg()).unwrap(),
            NoiseSchedule::asynchronous(6, 9, COSINE_OFFSET, marg()).unwrap(),
            NoiseSchedule::general(7, vec![1, 3, 5, 7], vec![2, 4, 6], COSINE_OFFSET, marg())
                .unwrap(),
        ] {
            for t in 1..=sched.total() {
                for ch in [Channel::Attr(0), Channel::Attr(1), Channel::Edge] {
                    let lhs = dense_mul(
                        &sched.qbar(t - 1, ch).unwrap().dense(),
                        &sched.q_step(t, ch).unwrap().dense(),
                    );
                    let rhs = sched.qbar(t, ch).unwrap().dense();
                    for (a, b) in lhs.iter().flatten().zip(rhs.iter().flatten()) {
                        assert!((a - b).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_schedules() {
        assert!(NoiseSchedule::general(3, vec![], vec![1], COSINE_OFFSET, marg()).is_err());
        assert!(NoiseSchedule::general(3, vec![4], vec![1], COSINE_OFFSET, marg()).is_err());
        assert!(NoiseSchedule::sync(0, COSINE_OFFSET, marg()).is_err());
    }
}
