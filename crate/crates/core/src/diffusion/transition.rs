//! The `alpha I + (1 - alpha) 1 m^T` transition family and its Bayes posteriors.
//!
//! Everything here is generic over any number field, so tests can run the
//! algebra in exact rational arithmetic.

use num_traits::Num;

use crate::error::{Error, Result};

/// Number type the transition algebra can run in.
pub trait Prob: Num + Clone + PartialOrd {}

impl<T: Num + Clone + PartialOrd> Prob for T {}

/// Row-stochastic `alpha I + (1 - alpha) 1 m^T`, stored implicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix<P> {
    pub alpha: P,
    pub m: Vec<P>,
}

impl<P: Prob> TransitionMatrix<P> {
    pub fn new(alpha: P, m: Vec<P>) -> Self {
        Self { alpha, m }
    }

    pub fn classes(&self) -> usize {
        self.m.len()
    }

    /// Probability of moving from class `i` to class `j`.
    pub fn entry(&self, i: usize, j: usize) -> P {
        let mix = (P::one() - self.alpha.clone()) * self.m[j].clone();
        if i == j {
            self.alpha.clone() + mix
        } else {
            mix
        }
    }

    pub fn row(&self, i: usize) -> Vec<P> {
        (0..self.classes()).map(|j| self.entry(i, j)).collect()
    }

    pub fn dense(&self) -> Vec<Vec<P>> {
        (0..self.classes()).map(|i| self.row(i)).collect()
    }

    /// Product with another member of the family sharing `m`.
    pub fn then(&self, next: &Self) -> Self {
        Self::new(self.alpha.clone() * next.alpha.clone(), self.m.clone())
    }
}

/// `q(x_{t-1} | x_t, x_0)` for one cell: proportional to the `x_t` column of
/// the one-step matrix times the `x_0` row of the cumulative matrix at `t - 1`.
pub fn true_posterior<P: Prob>(
    step: &TransitionMatrix<P>,
    prev: &TransitionMatrix<P>,
    x0: usize,
    xt: usize,
) -> Result<Vec<P>> {
    let mut p: Vec<P> = (0..step.classes())
        .map(|k| step.entry(k, xt) * prev.entry(x0, k))
        .collect();
    let z = p.iter().cloned().fold(P::zero(), |a, b| a + b);
    if z == P::zero() {
        return Err(Error::Impossible(format!(
            "class {xt} cannot be reached from class {x0}"
        )));
    }
    for v in &mut p {
        *v = v.clone() / z.clone();
    }
    Ok(p)
}

/// `sum_{x0} p0[x0] q(x_{t-1} | x_t, x0)` in `O(C)`.
///
/// Terms whose `x0` cannot produce `x_t` are dropped and the rest
/// renormalized. If none can, the result falls back to the one-step
/// likelihood of `x_t`, normalized.
pub fn model_posterior<P: Prob>(
    p0: &[P],
    step: &TransitionMatrix<P>,
    prev: &TransitionMatrix<P>,
    xt: usize,
) -> Vec<P> {
    let c = step.classes();
    let mut out = vec![P::zero(); c];
    model_posterior_into(p0, step, prev, xt, &mut out);
    out
}

/// [`model_posterior`] writing into a caller-provided buffer of length `C`.
pub fn model_posterior_into<P: Prob>(
    p0: &[P],
    step: &TransitionMatrix<P>,
    prev: &TransitionMatrix<P>,
    xt: usize,
    out: &mut [P],
) {
    let c = step.classes();
    // the normalizer of the x0 posterior is the cumulative entry (x0, xt) at t
    let ta = prev.alpha.clone() * step.alpha.clone();
    let off = (P::one() - ta.clone()) * step.m[xt].clone();
    let mut wsum = P::zero();
    let mut dropped = false;
    for (k, o) in out.iter_mut().enumerate().take(c) {
        let z = if k == xt {
            ta.clone() + off.clone()
        } else {
            off.clone()
        };
        *o = if z > P::zero() {
            p0[k].clone() / z
        } else {
            dropped |= p0[k] != P::zero();
            P::zero()
        };
        wsum = wsum + o.clone();
    }
    if wsum == P::zero() {
        let mut z = P::zero();
        for (k, o) in out.iter_mut().enumerate().take(c) {
            *o = step.entry(k, xt);
            z = z + o.clone();
        }
        for o in out.iter_mut() {
            *o = o.clone() / z.clone();
        }
        return;
    }
    let keep = prev.alpha.clone();
    let mix = P::one() - keep.clone();
    let mut z = P::zero();
    for (k, o) in out.iter_mut().enumerate().take(c) {
        let reach = keep.clone() * o.clone() + mix.clone() * prev.m[k].clone() * wsum.clone();
        *o = step.entry(k, xt) * reach;
        z = z + o.clone();
    }
    if dropped {
        for o in out.iter_mut() {
            *o = o.clone() / z.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    type Q = Ratio<i128>;

    fn q(a: i128, b: i128) -> Q {
        Q::new(a, b)
    }

    fn dense_mul(a: &[Vec<Q>], b: &[Vec<Q>]) -> Vec<Vec<Q>> {
        let n = a.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).fold(q(0, 1), |s, k| s + a[i][k] * b[k][j]))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn extreme_alphas() {
        let m = vec![q(3, 10), q(7, 10)];
        let id = TransitionMatrix::new(q(1, 1), m.clone());
        assert_eq!(
            id.dense(),
            vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]]
        );
        let flat = TransitionMatrix::new(q(0, 1), m.clone());
        assert_eq!(flat.dense(), vec![m.clone(), m.clone()]);
        let half = TransitionMatrix::new(q(1, 2), m);
        assert_eq!(
            half.dense(),
            vec![vec![q(65, 100), q(35, 100)], vec![q(15, 100), q(85, 100)]]
        );
    }

    fn arb_case() -> impl Strategy<Value = (Vec<i128>, i128, i128, usize, usize)> {
        (2usize..=5)
            .prop_flat_map(|c| {
                (
                    prop::collection::vec(1i128..20, c),
                    1i128..=100,
                    1i128..=100,
                    0..c,
                    0..c,
                )
            })
            .prop_map(|(w, a, b, x0, xt)| (w, a.max(b), a.min(b), x0, xt))
    }

    proptest! {
        #[test]
        fn composition_and_bayes_are_exact((w, hi, lo, x0, xt) in arb_case()) {
            let total: i128 = w.iter().sum();
            let m: Vec<Q> = w.iter().map(|&x| q(x, total)).collect();
            let prev = TransitionMatrix::new(q(hi, 100), m.clone());
            let cur = TransitionMatrix::new(q(lo, 100), m.clone());
            let step = TransitionMatrix::new(cur.alpha / prev.alpha, m.clone());
            prop_assert_eq!(dense_mul(&prev.dense(), &step.dense()), cur.dense());

            // enumerate x_{t-1} on dense matrices
            let (dp, ds) = (prev.dense(), step.dense());
            let joint: Vec<Q> = (0..m.len()).map(|k| dp[x0][k] * ds[k][xt]).collect();
            let z = joint.iter().fold(q(0, 1), |s, &v| s + v);
            let oracle: Vec<Q> = joint.iter().map(|&v| v / z).collect();
            prop_assert_eq!(true_posterior(&step, &prev, x0, xt).unwrap(), oracle.clone());

            let mut p0 = vec![q(0, 1); m.len()];
            p0[x0] = q(1, 1);
            prop_assert_eq!(model_posterior(&p0, &step, &prev, xt), oracle);
        }

        #[test]
        fn model_posterior_is_the_mixture((w, hi, lo, _x0, xt) in arb_case(), pw in prop::collection::vec(0i128..10, 5)) {
            let c = w.len();
            let total: i128 = w.iter().sum();
            let m: Vec<Q> = w.iter().map(|&x| q(x, total)).collect();
            let prev = TransitionMatrix::new(q(hi, 100), m.clone());
            let step = TransitionMatrix::new(q(lo, 100) / prev.alpha, m);
            let ps: i128 = pw[..c].iter().sum::<i128>().max(1);
            let mut p0: Vec<Q> = pw[..c].iter().map(|&x| q(x, ps)).collect();
            if pw[..c].iter().all(|&x| x == 0) {
                p0[0] = q(1, 1);
            }
            let mut mix = vec![q(0, 1); c];
            for (x0, &p) in p0.iter().enumerate() {
                for (k, v) in true_posterior(&step, &prev, x0, xt).unwrap().into_iter().enumerate() {
                    mix[k] += p * v;
                }
            }
            prop_assert_eq!(model_posterior(&p0, &step, &prev, xt), mix);
        }
    }

    #[test]
    fn first_step_posterior_is_point_mass() {
        let m = vec![0.3, 0.7];
        let prev = TransitionMatrix::new(1.0, m.clone());
        let step = TransitionMatrix::new(0.6, m);
        assert_eq!(true_posterior(&step, &prev, 1, 0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn symmetric_marginal_gives_symmetric_posterior() {
        let m: Vec<f64> = vec![0.5, 0.5];
        let prev = TransitionMatrix::new(0.8, m.clone());
        let step = TransitionMatrix::new(0.625, m);
        let p = model_posterior(&[0.5, 0.5], &step, &prev, 0);
        let p1 = model_posterior(&[0.5, 0.5], &step, &prev, 1);
        assert!((p[0] - p1[1]).abs() < 1e-15 && (p[1] - p1[0]).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_observation_is_an_error() {
        let m: Vec<f64> = vec![0.0, 1.0];
        let prev = TransitionMatrix::new(1.0, m.clone());
        let step = TransitionMatrix::new(0.5, m);
        assert!(true_posterior(&step, &prev, 1, 0).is_err());
        let p = model_posterior(&[0.0, 1.0], &step, &prev, 0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
