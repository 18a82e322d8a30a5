//! Reverse-mode gradient tape over dense tensors.
//!
//! Every operation appends a node holding its forward value and enough
//! context to push gradients to its inputs. `backward` replays the nodes in
//! reverse insertion order, which is a valid topological order because
//! inputs always precede their consumers.

use std::sync::Arc;

use rand::Rng;

use super::{NumericsError, Scalar, SparseMatrix, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    Relu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor<S>,
        inv_std: Vec<S>,
    },
    Dropout {
        x: Var,
        mask: Vec<S>,
    },
    ConcatCols(Vec<Var>),
    RepeatRow(Var),
    GatherRows {
        x: Var,
        idx: Arc<[usize]>,
    },
    SpMM {
        mat: Arc<SparseMatrix<S>>,
        x: Var,
    },
    RowSum(Var),
    Mean(Var),
    SegmentedCe {
        logits: Var,
        probs: Tensor<S>,
        targets: Vec<usize>,
        segments: Vec<(usize, usize)>,
        count: usize,
    },
    BinaryCe {
        scores: Var,
        labels: Vec<S>,
    },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
}

/// Ordered record of operations supporting one backward pass.
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> NumericsError {
    NumericsError::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Registers a leaf (parameter or constant input).
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// `x + row` with `row` (`1 x d`) broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, NumericsError> {
        let (xv, rv) = (self.value(x), self.value(row));
        if rv.len() != xv.cols() {
            return Err(mismatch("add_row", xv.shape(), rv.shape()));
        }
        let mut value = xv.clone();
        let c = value.cols();
        for chunk in value.data_mut().chunks_mut(c.max(1)) {
            for (o, &b) in chunk.iter_mut().zip(rv.data()) {
                *o += b;
            }
        }
        Ok(self.push(value, Op::AddRow(x, row)))
    }

    /// `x W + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NumericsError> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: S) -> Var {
        let value = self.value(x).scale(c);
        self.push(value, Op::Scale(x, c))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self
            .value(x)
            .map(|v| if v > S::zero() { v } else { S::zero() });
        self.push(value, Op::Relu(x))
    }

    /// Per-row normalization with learned affine `gamma`, `beta` (`1 x d`).
    pub fn layer_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: S,
    ) -> Result<Var, NumericsError> {
        let xv = self.value(x);
        let d = xv.cols();
        let (gv, bv) = (self.value(gamma), self.value(beta));
        if gv.len() != d || bv.len() != d {
            return Err(mismatch("layer_norm", xv.shape(), gv.shape()));
        }
        let n = xv.rows();
        let dn = S::from_usize(d).unwrap();
        let mut xhat = Tensor::zeros(n, d);
        let mut inv_std = Vec::with_capacity(n);
        let mut out = Tensor::zeros(n, d);
        for i in 0..n {
            let row = xv.row(i);
            let mean = row.iter().copied().sum::<S>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / dn;
            let is = S::one() / (var + eps).sqrt();
            inv_std.push(is);
            let xh = xhat.row_mut(i);
            for (h, &v) in xh.iter_mut().zip(row) {
                *h = (v - mean) * is;
            }
            let o = out.row_mut(i);
            for j in 0..d {
                o[j] = xhat.get(i, j) * gv.data()[j] + bv.data()[j];
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    /// Inverted dropout. Identity (and no node) when `rate == 0` or not training.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Var {
        if !training || rate <= 0.0 {
            return x;
        }
        let keep = S::lit(1.0 / (1.0 - rate));
        let xv = self.value(x);
        let mask: Vec<S> = (0..xv.len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    S::zero()
                } else {
                    keep
                }
            })
            .collect();
        let value = Tensor::from_vec(
            xv.shape().to_vec(),
            xv.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect(),
        )
        .expect("same shape");
        self.push(value, Op::Dropout { x, mask })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let refs: Vec<&Tensor<S>> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Tensor::concat_cols(&refs)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Stacks a `1 x d` row `n` times.
    pub fn repeat_row(&mut self, x: Var, n: usize) -> Var {
        let xv = self.value(x);
        let d = xv.len();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            data.extend_from_slice(xv.data());
        }
        let value = Tensor::from_vec(vec![n, d], data).expect("repeat shape");
        self.push(value, Op::RepeatRow(x))
    }

    pub fn gather_rows(&mut self, x: Var, idx: Arc<[usize]>) -> Result<Var, NumericsError> {
        let xv = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= xv.rows()) {
            return Err(NumericsError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                bound: xv.rows(),
            });
        }
        let value = xv.gather_rows(&idx);
        Ok(self.push(value, Op::GatherRows { x, idx }))
    }

    /// Sparse-dense product `mat * x`.
    pub fn spmm(&mut self, mat: Arc<SparseMatrix<S>>, x: Var) -> Result<Var, NumericsError> {
        let xv = self.value(x);
        if mat.cols() != xv.rows() {
            return Err(mismatch("spmm", &[mat.rows(), mat.cols()], xv.shape()));
        }
        let value = mat.matmul_dense(xv);
        Ok(self.push(value, Op::SpMM { mat, x }))
    }

    /// Sum across columns: `n x d -> n x 1`.
    pub fn row_sum(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let n = xv.rows();
        let data = (0..n).map(|i| xv.row(i).iter().copied().sum()).collect();
        let value = Tensor::from_vec(vec![n, 1], data).expect("row sum shape");
        self.push(value, Op::RowSum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let m = xv.sum() / S::from_usize(xv.len().max(1)).unwrap();
        self.push(Tensor::scalar(m), Op::Mean(x))
    }

    /// Mean softmax cross-entropy over every `(row, segment)` cell.
    ///
    /// `segments` are `(offset, width)` column ranges, each an independent
    /// categorical; `targets[row * segments.len() + s]` is the class within
    /// segment `s`.
    pub fn segmented_cross_entropy(
        &mut self,
        logits: Var,
        segments: &[(usize, usize)],
        targets: &[usize],
    ) -> Result<Var, NumericsError> {
        let lv = self.value(logits);
        let (n, c) = (lv.rows(), lv.cols());
        let f = segments.len();
        if targets.len() != n * f {
            return Err(mismatch("cross_entropy", lv.shape(), &[targets.len()]));
        }
        if let Some(&(o, w)) = segments.iter().find(|&&(o, w)| o + w > c || w < 2) {
            return Err(mismatch("cross_entropy", lv.shape(), &[o, w]));
        }
        let mut probs = lv.clone();
        let mut total = S::zero();
        for i in 0..n {
            let row = probs.row_mut(i);
            for (s, &(o, w)) in segments.iter().enumerate() {
                let t = targets[i * f + s];
                if t >= w {
                    return Err(NumericsError::IndexOutOfRange {
                        op: "cross_entropy target",
                        index: t,
                        bound: w,
                    });
                }
                let seg = &mut row[o..o + w];
                let max = seg.iter().copied().fold(S::neg_infinity(), S::max);
                let lse = seg.iter().map(|&z| (z - max).exp()).sum::<S>().ln() + max;
                total += lse - seg[t];
                for z in seg.iter_mut() {
                    *z = (*z - lse).exp();
                }
            }
        }
        let count = (n * f).max(1);
        let loss = total / S::from_usize(count).unwrap();
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SegmentedCe {
                logits,
                probs,
                targets: targets.to_vec(),
                segments: segments.to_vec(),
                count,
            },
        ))
    }

    /// Mean softmax cross-entropy of an `n x C` logit matrix.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, NumericsError> {
        let c = self.value(logits).cols();
        self.segmented_cross_entropy(logits, &[(0, c)], targets)
    }

    /// Mean binary cross-entropy with logits for an `n x 1` score column.
    pub fn binary_cross_entropy(
        &mut self,
        scores: Var,
        labels: &[S],
    ) -> Result<Var, NumericsError> {
        let sv = self.value(scores);
        if sv.len() != labels.len() {
            return Err(mismatch(
                "binary_cross_entropy",
                sv.shape(),
                &[labels.len()],
            ));
        }
        let mut total = S::zero();
        for (&s, &y) in sv.data().iter().zip(labels) {
            // softplus(s) - y*s, stable for either sign of s
            let sp = if s > S::zero() {
                s + (-s).exp().ln_1p()
            } else {
                s.exp().ln_1p()
            };
            total += sp - y * s;
        }
        let loss = total / S::from_usize(labels.len().max(1)).unwrap();
        Ok(self.push(
            Tensor::scalar(loss),
            Op::BinaryCe {
                scores,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Gradients<S> {
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(1, 1, S::one()));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, i: usize, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
        let mut acc = |v: Var, delta: Tensor<S>| match &mut grads[v.0] {
            Some(existing) => existing.axpy(S::one(), &delta),
            slot @ None => *slot = Some(delta),
        };
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, g.matmul_nt(bv).expect("matmul grad"));
                acc(*b, av.matmul_tn(g).expect("matmul grad"));
            }
            Op::AddRow(x, row) => {
                acc(*x, g.clone());
                let d = g.cols();
                let mut sums = Tensor::zeros(1, d);
                for r in 0..g.rows() {
                    for (s, &v) in sums.data_mut().iter_mut().zip(g.row(r)) {
                        *s += v;
                    }
                }
                let shape = self.value(*row).shape().to_vec();
                acc(*row, Tensor::from_vec(shape, sums.into_data()).unwrap());
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, g.zip_map(bv, |x, y| x * y).unwrap());
                acc(*b, g.zip_map(av, |x, y| x * y).unwrap());
            }
            Op::Scale(x, c) => acc(*x, g.scale(*c)),
            Op::Relu(x) => {
                let xv = self.value(*x);
                acc(
                    *x,
                    g.zip_map(xv, |gv, v| if v > S::zero() { gv } else { S::zero() })
                        .unwrap(),
                );
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let gv = self.value(*gamma);
                let (n, d) = (g.rows(), g.cols());
                let dn = S::from_usize(d).unwrap();
                let mut dgamma = vec![S::zero(); d];
                let mut dbeta = vec![S::zero(); d];
                let mut dx = Tensor::zeros(n, d);
                let mut dxhat = vec![S::zero(); d];
                for r in 0..n {
                    let (gr, xr) = (g.row(r), xhat.row(r));
                    let mut sum_dxh = S::zero();
                    let mut sum_dxh_xh = S::zero();
                    for j in 0..d {
                        dgamma[j] += gr[j] * xr[j];
                        dbeta[j] += gr[j];
                        dxhat[j] = gr[j] * gv.data()[j];
                        sum_dxh += dxhat[j];
                        sum_dxh_xh += dxhat[j] * xr[j];
                    }
                    let k = inv_std[r] / dn;
                    let out = dx.row_mut(r);
                    for j in 0..d {
                        out[j] = k * (dn * dxhat[j] - sum_dxh - xr[j] * sum_dxh_xh);
                    }
                }
                acc(*x, dx);
                let gs = gv.shape().to_vec();
                acc(*gamma, Tensor::from_vec(gs.clone(), dgamma).unwrap());
                acc(*beta, Tensor::from_vec(gs, dbeta).unwrap());
            }
            Op::Dropout { x, mask } => {
                let data = g.data().iter().zip(mask).map(|(&a, &m)| a * m).collect();
                acc(*x, Tensor::from_vec(g.shape().to_vec(), data).unwrap());
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let part = Tensor::from_fn(g.rows(), w, |r, c| g.get(r, offset + c));
                    offset += w;
                    acc(p, part);
                }
            }
            Op::RepeatRow(x) => {
                let d = g.cols();
                let mut sums = vec![S::zero(); d];
                for r in 0..g.rows() {
                    for (s, &v) in sums.iter_mut().zip(g.row(r)) {
                        *s += v;
                    }
                }
                let shape = self.value(*x).shape().to_vec();
                acc(*x, Tensor::from_vec(shape, sums).unwrap());
            }
            Op::GatherRows { x, idx } => {
                let xv = self.value(*x);
                let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                for (r, &src) in idx.iter().enumerate() {
                    for (o, &v) in dx.row_mut(src).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                acc(*x, dx);
            }
            Op::SpMM { mat, x } => acc(*x, mat.matmul_dense_t(g)),
            Op::RowSum(x) => {
                let xv = self.value(*x);
                let dx = Tensor::from_fn(xv.rows(), xv.cols(), |r, _| g.get(r, 0));
                acc(*x, dx);
            }
            Op::Mean(x) => {
                let xv = self.value(*x);
                let k = g.item() / S::from_usize(xv.len().max(1)).unwrap();
                acc(
                    *x,
                    Tensor::from_vec(xv.shape().to_vec(), vec![k; xv.len()]).unwrap(),
                );
            }
            Op::SegmentedCe {
                logits,
                probs,
                targets,
                segments,
                count,
            } => {
                let k = g.item() / S::from_usize(*count).unwrap();
                let mut dl = probs.scale(k);
                let f = segments.len();
                for r in 0..dl.rows() {
                    let row = dl.row_mut(r);
                    for (s, &(o, _)) in segments.iter().enumerate() {
                        row[o + targets[r * f + s]] -= k;
                    }
                }
                acc(*logits, dl);
            }
            Op::BinaryCe { scores, labels } => {
                let sv = self.value(*scores);
                let k = g.item() / S::from_usize(labels.len().max(1)).unwrap();
                let data = sv
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&s, &y)| (sigmoid(s) - y) * k)
                    .collect();
                acc(
                    *scores,
                    Tensor::from_vec(sv.shape().to_vec(), data).unwrap(),
                );
            }
        }
    }
}

pub fn sigmoid<S: Scalar>(s: S) -> S {
    if s >= S::zero() {
        S::one() / (S::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (S::one() + e)
    }
}

/// Result of a backward pass.
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of a node, zero-filled when the loss does not depend on it.
    pub fn get(&self, v: Var, like: &Tensor<S>) -> Tensor<S> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::from_vec(like.shape().to_vec(), vec![S::zero(); like.len()]).unwrap(),
        }
    }

    /// One gradient per variable, each shaped like the variable's value.
    pub fn collect(&self, tape: &Tape<S>, vars: &[Var]) -> Vec<Tensor<S>> {
        vars.iter().map(|&v| self.get(v, tape.value(v))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type T = Tensor<f64>;

    #[test]
    fn relu_values() {
        let mut tape = Tape::new();
        let x = tape.leaf(T::from_rows(&[vec![-1.0, 2.0, 0.0]]).unwrap());
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn layer_norm_of_constant_row_is_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(T::full(1, 4, 3.0));
        let g = tape.leaf(T::full(1, 4, 1.0));
        let b = tape.leaf(T::zeros(1, 4));
        let y = tape.layer_norm(x, g, b, 1e-5).unwrap();
        assert!(tape.value(y).max_abs() < 1e-12);
    }

    #[test]
    fn dropout_disabled_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tape = Tape::new();
        let x = tape.leaf(T::full(2, 3, 1.5));
        assert_eq!(tape.dropout(x, 0.0, true, &mut rng), x);
        assert_eq!(tape.dropout(x, 0.5, false, &mut rng), x);
        let y = tape.dropout(x, 0.5, true, &mut rng);
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0 || v == 3.0));
    }

    fn ce(logits: Vec<f64>, target: usize) -> f64 {
        let mut tape = Tape::new();
        let n = logits.len();
        let x = tape.leaf(T::from_vec(vec![1, n], logits).unwrap());
        let l = tape.cross_entropy(x, &[target]).unwrap();
        tape.value(l).item()
    }

    #[test]
    fn cross_entropy_values() {
        assert!((ce(vec![0.0, 0.0], 0) - std::f64::consts::LN_2).abs() < 1e-12);
        let stable = ce(vec![1000.0, -1000.0], 0);
        assert!(stable.is_finite() && stable.abs() < 1e-12);
        // -ln(e^3 / (e + e^2 + e^3)), evaluated directly
        let e = std::f64::consts::E;
        let direct = -((e.powi(3)) / (e + e * e + e.powi(3))).ln();
        assert!((ce(vec![1.0, 2.0, 3.0], 2) - direct).abs() < 1e-12);
        assert!((direct - 0.4076).abs() < 1e-4);
    }

    #[test]
    fn cross_entropy_target_out_of_range() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(T::zeros(1, 2));
        let err = tape.cross_entropy(x, &[2]).unwrap_err();
        assert!(matches!(err, NumericsError::IndexOutOfRange { .. }));
    }

    #[test]
    fn square_gradient() {
        let err = grad_check(&[T::scalar(3.0)], 1e-5, |tape, p| {
            let sq = tape.mul(p[0], p[0])?;
            Ok(tape.mean(sq))
        })
        .unwrap();
        assert!(err < 1e-9);
        let mut tape = Tape::new();
        let x = tape.leaf(T::scalar(3.0));
        let sq = tape.mul(x, x).unwrap();
        let g = tape.backward(sq);
        assert_eq!(g.get(x, tape.value(x)).item(), 6.0);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let err = grad_check(&[T::full(2, 2, 0.7)], 1e-5, |tape, _| {
            Ok(tape.leaf(T::scalar(4.0)))
        })
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut r = || rng.random::<f64>() * 2.0 - 1.0;
        let x = T::from_fn(5, 4, |_, _| r());
        let w = T::from_fn(4, 6, |_, _| r());
        let b = T::from_fn(1, 6, |_, _| r());
        let gamma = T::from_fn(1, 6, |_, _| 1.0 + 0.3 * r());
        let beta = T::from_fn(1, 6, |_, _| r());
        let h = T::from_fn(1, 3, |_, _| r());
        let w2 = T::from_fn(9, 4, |_, _| r());
        let adj = Arc::new(SparseMatrix::from_rows(
            5,
            vec![
                vec![(0, 0.5), (1, 0.5)],
                vec![(0, 1.0 / 3.0), (1, 1.0 / 3.0), (2, 1.0 / 3.0)],
                vec![(2, 1.0)],
                vec![(3, 0.5), (4, 0.5)],
                vec![(1, 0.2), (4, 0.8)],
            ],
        ));
        let err = grad_check(&[x, w, b, gamma, beta, h, w2], 1e-5, |tape, p| {
            let z = tape.linear(p[0], p[1], p[2])?;
            let z = tape.relu(z);
            let z = tape.layer_norm(z, p[3], p[4], 1e-5)?;
            let z = tape.spmm(adj.clone(), z)?;
            let hr = tape.repeat_row(p[5], 5);
            let z = tape.concat_cols(&[z, hr])?;
            let z = tape.matmul(z, p[6])?;
            let idx: Arc<[usize]> = Arc::from(vec![0usize, 2, 2, 4]);
            let a = tape.gather_rows(z, idx)?;
            let idx2: Arc<[usize]> = Arc::from(vec![1usize, 3, 0, 4]);
            let bb = tape.gather_rows(z, idx2)?;
            let prod = tape.mul(a, bb)?;
            let s = tape.scale(prod, 0.7);
            let sum = tape.add(s, a)?;
            let scores = tape.row_sum(sum);
            let bce = tape.binary_cross_entropy(scores, &[1.0, 0.0, 1.0, 0.0])?;
            let ce =
                tape.segmented_cross_entropy(sum, &[(0, 2), (2, 2)], &[0, 1, 1, 0, 1, 1, 0, 0])?;
            tape.add(bce, ce)
        })
        .unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }
}
