use std::sync::Arc;

use rand::Rng;

use crate::numerics::{sigmoid, Dense, NumericsError, Scalar, Var};
use crate::{ParamSet, Tape, Tensor};

/// One linear layer producing `sum(C_f)` logits, read per attribute segment.
#[derive(Clone, Debug)]
pub struct AttrHead {
    pub dense: Dense,
    pub segments: Vec<(usize, usize)>,
}

pub fn segments(cardinalities: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(cardinalities.len());
    let mut off = 0;
    for &c in cardinalities {
        out.push((off, c));
        off += c;
    }
    out
}

impl AttrHead {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        input: usize,
        cardinalities: &[usize],
        rng: &mut R,
    ) -> Self {
        Self {
            dense: Dense::new(params, name, input, cardinalities.iter().sum(), rng),
            segments: segments(cardinalities),
        }
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], h: Var) -> Result<Var, NumericsError> {
        self.dense.apply(tape, vars, h)
    }
}

/// Two-layer MLP on `H_u * H_v` (elementwise) giving logits for {no edge, edge}.
#[derive(Clone, Debug)]
pub struct EdgeHead {
    pub l1: Dense,
    pub l2: Dense,
}

impl EdgeHead {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            l1: Dense::new(params, &format!("{name}.l1"), input, hidden, rng),
            l2: Dense::new(params, &format!("{name}.l2"), hidden, 2, rng),
        }
    }

    /// `len(pairs) x 2` logits.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        h: Var,
        pairs: &[(usize, usize)],
    ) -> Result<Var, NumericsError> {
        let us: Arc<[usize]> = pairs.iter().map(|p| p.0).collect();
        let vs: Arc<[usize]> = pairs.iter().map(|p| p.1).collect();
        let hu = tape.gather_rows(h, us)?;
        let hv = tape.gather_rows(h, vs)?;
        let prod = tape.mul(hu, hv)?;
        self.forward_features(tape, vars, prod)
    }

    /// Logits from precomputed pair features `H_u * H_v`.
    pub fn forward_features(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        prod: Var,
    ) -> Result<Var, NumericsError> {
        let z = self.l1.apply(tape, vars, prod)?;
        let z = tape.relu(z);
        self.l2.apply(tape, vars, z)
    }

    /// Precomputes what [`EdgeScorer`] needs from the trained weights.
    pub fn scorer<S: Scalar>(&self, params: &ParamSet, h: &Tensor) -> EdgeScorer<S> {
        let cast = |t: &Tensor| t.data().iter().map(|&x| S::lit(x)).collect::<Vec<S>>();
        let w2 = params.get(self.l2.w);
        let b2 = params.get(self.l2.b).data();
        EdgeScorer {
            n: h.rows(),
            d: h.cols(),
            hidden: self.l1.fan_out,
            h: cast(h),
            w1: cast(params.get(self.l1.w)),
            b1: cast(params.get(self.l1.b)),
            wdiff: (0..w2.rows())
                .map(|i| S::lit(w2.get(i, 1) - w2.get(i, 0)))
                .collect(),
            bdiff: S::lit(b2[1] - b2[0]),
        }
    }
}

/// Edge probabilities for all partners of a node without materializing pair
/// features: for fixed `u`, `(H_u * H_v) W1 = H_v diag(H_u) W1`, one GEMM per row.
pub struct EdgeScorer<S> {
    n: usize,
    d: usize,
    hidden: usize,
    h: Vec<S>,
    w1: Vec<S>,
    b1: Vec<S>,
    wdiff: Vec<S>,
    bdiff: S,
}

impl<S: Scalar> EdgeScorer<S> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Probability of an edge between `u` and each `v` in `u+1..n`, written to `out`.
    pub fn row_probabilities(&self, u: usize, out: &mut Vec<f64>) {
        let (d, k) = (self.d, self.hidden);
        let m = self.n - u - 1;
        out.clear();
        if m == 0 {
            return;
        }
        let hu = &self.h[u * d..(u + 1) * d];
        let mut scaled = self.w1.clone();
        for (row, &s) in scaled.chunks_mut(k).zip(hu) {
            row.iter_mut().for_each(|w| *w *= s);
        }
        let mut z = vec![S::zero(); m * k];
        let rest = &self.h[(u + 1) * d..];
        S::gemm(
            m,
            d,
            k,
            S::one(),
            rest,
            d as isize,
            1,
            &scaled,
            k as isize,
            1,
            S::zero(),
            &mut z,
            k as isize,
            1,
        );
        out.extend(z.chunks(k).map(|row| {
            let s = row
                .iter()
                .zip(&self.b1)
                .zip(&self.wdiff)
                .fold(self.bdiff, |acc, ((&zi, &bi), &wi)| {
                    acc + (zi + bi).max(S::zero()) * wi
                });
            sigmoid(s.to_f64().unwrap_or(0.0))
        }));
    }
}
