use rand::Rng;

use crate::numerics::{Dense, NumericsError, Var};
use crate::{ParamSet, Tape, Tensor};

const FREQUENCIES: usize = 4;

/// `[t/T]` followed by sine and cosine of `pi 2^k t/T` for `k = 0..4`.
pub fn time_features(t: usize, total: usize) -> Tensor {
    let x = t as f64 / total.max(1) as f64;
    let mut row = Vec::with_capacity(1 + 2 * FREQUENCIES);
    row.push(x);
    for k in 0..FREQUENCIES {
        let w = std::f64::consts::PI * (1u64 << k) as f64 * x;
        row.push(w.sin());
        row.push(w.cos());
    }
    Tensor::from_vec(vec![1, row.len()], row).expect("feature row")
}

/// Two-layer MLP over [`time_features`].
#[derive(Clone, Debug)]
pub struct TimeEmbedding {
    l1: Dense,
    l2: Dense,
    pub dim: usize,
}

impl TimeEmbedding {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            l1: Dense::new(params, &format!("{name}.l1"), 1 + 2 * FREQUENCIES, dim, rng),
            l2: Dense::new(params, &format!("{name}.l2"), dim, dim, rng),
            dim,
        }
    }

    /// `1 x dim` representation of step `t` out of `total`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        t: usize,
        total: usize,
    ) -> Result<Var, NumericsError> {
        let x = tape.leaf(time_features(t, total));
        let h = self.l1.apply(tape, vars, x)?;
        let h = tape.relu(h);
        self.l2.apply(tape, vars, h)
    }
}
