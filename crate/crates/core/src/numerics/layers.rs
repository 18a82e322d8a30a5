use rand::Rng;

use super::{NumericsError, ParamId, ParamSet, Scalar, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalize {
    LayerNorm,
    None,
}

/// Fully connected layer `x W + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

/// Learned affine of a layer normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerNormParams {
    pub gamma: ParamId,
    pub beta: ParamId,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Adds a `fan_in x fan_out` weight drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn fan_in_uniform<S: Scalar, R: Rng + ?Sized>(
    params: &mut ParamSet<S>,
    name: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> ParamId {
    uniform_weight(
        params,
        name,
        fan_in,
        fan_out,
        1.0 / (fan_in.max(1) as f64).sqrt(),
        rng,
    )
}

/// Adds a `rows x cols` weight drawn uniformly from `[-bound, bound]`.
pub fn uniform_weight<S: Scalar, R: Rng + ?Sized>(
    params: &mut ParamSet<S>,
    name: &str,
    rows: usize,
    cols: usize,
    bound: f64,
    rng: &mut R,
) -> ParamId {
    let w = Tensor::from_fn(rows, cols, |_, _| {
        S::lit((rng.random::<f64>() * 2.0 - 1.0) * bound)
    });
    params.add(name, w)
}

impl Dense {
    /// Weights as in [`fan_in_uniform`], zero bias.
    pub fn new<S: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<S>,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let w = fan_in_uniform(params, &format!("{name}.weight"), fan_in, fan_out, rng);
        let b = params.add(format!("{name}.bias"), Tensor::zeros(1, fan_out));
        Self {
            w,
            b,
            fan_in,
            fan_out,
        }
    }

    pub fn apply<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        vars: &[Var],
        x: Var,
    ) -> Result<Var, NumericsError> {
        tape.linear(x, vars[self.w.0], vars[self.b.0])
    }

    /// `dropout(norm(act(x W + b)))`, each stage optional.
    #[allow(clippy::too_many_arguments)]
    pub fn forward<S: Scalar, R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<S>,
        vars: &[Var],
        x: Var,
        activation: Activation,
        norm: Option<&LayerNormParams>,
        dropout: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var, NumericsError> {
        let z = self.apply(tape, vars, x)?;
        let z = match activation {
            Activation::Relu => tape.relu(z),
            Activation::None => z,
        };
        let z = match norm {
            Some(ln) => ln.apply(tape, vars, z)?,
            None => z,
        };
        Ok(tape.dropout(z, dropout, training, rng))
    }
}

impl LayerNormParams {
    pub fn new<S: Scalar>(params: &mut ParamSet<S>, name: &str, dim: usize) -> Self {
        let gamma = params.add(format!("{name}.gamma"), Tensor::full(1, dim, S::one()));
        let beta = params.add(format!("{name}.beta"), Tensor::zeros(1, dim));
        Self { gamma, beta }
    }

    pub fn apply<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        vars: &[Var],
        x: Var,
    ) -> Result<Var, NumericsError> {
        tape.layer_norm(
            x,
            vars[self.gamma.0],
            vars[self.beta.0],
            S::lit(LAYER_NORM_EPS),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_layer_mlp_with_cross_entropy_passes_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamSet::<f64>::new();
        let l1 = Dense::new(&mut params, "l1", 5, 8, &mut rng);
        let ln = LayerNormParams::new(&mut params, "ln", 8);
        let l2 = Dense::new(&mut params, "l2", 8, 3, &mut rng);
        // non-trivial affine so gamma/beta gradients are exercised
        for t in params.tensors_mut() {
            for v in t.data_mut() {
                *v += 0.1 * (rng.random::<f64>() - 0.5);
            }
        }
        let x = Tensor::from_fn(6, 5, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let targets = [0usize, 2, 1, 1, 0, 2];
        let err = grad_check(params.tensors(), 1e-5, |tape, vars| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let xin = tape.leaf(x.clone());
            let h = l1.forward(
                tape,
                vars,
                xin,
                Activation::Relu,
                Some(&ln),
                0.0,
                false,
                &mut r,
            )?;
            let o = l2.forward(tape, vars, h, Activation::None, None, 0.0, false, &mut r)?;
            tape.cross_entropy(o, &targets)
        })
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn disabled_dropout_is_identity_on_normalized_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = ParamSet::<f64>::new();
        let l = Dense::new(&mut params, "l", 3, 4, &mut rng);
        let ln = LayerNormParams::new(&mut params, "ln", 4);
        let x = Tensor::from_fn(2, 3, |i, j| (i + 2 * j) as f64 - 1.0);
        let run = |rate: f64, training: bool| {
            let mut tape = Tape::new();
            let vars = params.bind(&mut tape);
            let xin = tape.leaf(x.clone());
            let mut r = ChaCha8Rng::seed_from_u64(9);
            let y = l
                .forward(
                    &mut tape,
                    &vars,
                    xin,
                    Activation::Relu,
                    Some(&ln),
                    rate,
                    training,
                    &mut r,
                )
                .unwrap();
            tape.value(y).clone()
        };
        assert_eq!(run(0.0, true), run(0.5, false));
    }
}
