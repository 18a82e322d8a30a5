use rand::Rng;

use super::inputs::GraphInputs;
use super::time::TimeEmbedding;
use crate::numerics::{fan_in_uniform, Dense, LayerNormParams, NumericsError, ParamId, Var};
use crate::{ParamSet, Tape};

/// Sizes of an encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderDims {
    pub input: usize,
    pub labels: Option<usize>,
    pub hidden: usize,
    pub label_hidden: usize,
    pub time_hidden: usize,
    pub layers: usize,
}

impl EncoderDims {
    /// Width of the readout: every layer of both channels plus the time embedding.
    pub fn output(&self) -> usize {
        let label = if self.labels.is_some() {
            self.label_hidden
        } else {
            0
        };
        (self.hidden + label) * (self.layers + 1) + self.time_hidden
    }
}

#[derive(Clone, Debug)]
struct LabelLayer {
    w: ParamId,
    b: ParamId,
    ln: LayerNormParams,
}

#[derive(Clone, Debug)]
struct Layer {
    time: Dense,
    w: ParamId,
    ln: LayerNormParams,
    label: Option<LabelLayer>,
}

/// Mean-aggregation MPNN over `N(v) + {v}` with an optional clean label channel.
#[derive(Clone, Debug)]
pub struct MpnnEncoder {
    pub dims: EncoderDims,
    time: TimeEmbedding,
    input: Dense,
    input_ln: LayerNormParams,
    label_input: Option<(Dense, LayerNormParams)>,
    layers: Vec<Layer>,
}

/// `dropout(layer_norm(relu(z)))`.
fn sigma<R: Rng + ?Sized>(
    tape: &mut Tape,
    vars: &[Var],
    z: Var,
    ln: &LayerNormParams,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var, NumericsError> {
    let z = tape.relu(z);
    let z = ln.apply(tape, vars, z)?;
    Ok(tape.dropout(z, dropout, training, rng))
}

impl MpnnEncoder {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        dims: EncoderDims,
        rng: &mut R,
    ) -> Self {
        let d = dims.hidden;
        let dy = dims.label_hidden;
        let time = TimeEmbedding::new(params, &format!("{name}.time"), dims.time_hidden, rng);
        let input = Dense::new(params, &format!("{name}.input"), dims.input, d, rng);
        let input_ln = LayerNormParams::new(params, &format!("{name}.input_ln"), d);
        let label_input = dims.labels.map(|c| {
            (
                Dense::new(params, &format!("{name}.label_input"), c, dy, rng),
                LayerNormParams::new(params, &format!("{name}.label_input_ln"), dy),
            )
        });
        let layers = (0..dims.layers)
            .map(|l| {
                let p = format!("{name}.layer{l}");
                let msg = d + if dims.labels.is_some() { dy } else { 0 };
                Layer {
                    time: Dense::new(params, &format!("{p}.time"), dims.time_hidden, d, rng),
                    w: fan_in_uniform(params, &format!("{p}.msg"), msg, d, rng),
                    ln: LayerNormParams::new(params, &format!("{p}.ln"), d),
                    label: dims.labels.map(|_| LabelLayer {
                        w: fan_in_uniform(params, &format!("{p}.label_msg"), dy, dy, rng),
                        b: params.add(format!("{p}.label_bias"), crate::Tensor::zeros(1, dy)),
                        ln: LayerNormParams::new(params, &format!("{p}.label_ln"), dy),
                    }),
                }
            })
            .collect();
        Self {
            dims,
            time,
            input,
            input_ln,
            label_input,
            layers,
        }
    }

    pub fn time_embedding(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        t: usize,
        total: usize,
    ) -> Result<Var, NumericsError> {
        self.time.forward(tape, vars, t, total)
    }

    /// Node representations `H`, `n x dims.output()`.
    #[allow(clippy::too_many_arguments)]
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        inputs: &GraphInputs,
        t: usize,
        total: usize,
        dropout: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var, NumericsError> {
        let h = self.time.forward(tape, vars, t, total)?;
        let x = tape.spmm(inputs.attrs.clone(), vars[self.input.w.0])?;
        let x = tape.add_row(x, vars[self.input.b.0])?;
        let mut x = sigma(tape, vars, x, &self.input_ln, dropout, training, rng)?;
        let mut y = match (&self.label_input, &inputs.labels) {
            (Some((dense, ln)), Some(onehot)) => {
                let z = tape.spmm(onehot.clone(), vars[dense.w.0])?;
                let z = tape.add_row(z, vars[dense.b.0])?;
                Some(sigma(tape, vars, z, ln, dropout, training, rng)?)
            }
            (None, _) => None,
            (Some(_), None) => {
                return Err(NumericsError::ShapeMismatch {
                    op: "label channel without labels",
                    left: vec![inputs.n],
                    right: vec![0],
                })
            }
        };
        let mut xs = vec![x];
        let mut ys: Vec<Var> = y.into_iter().collect();
        for layer in &self.layers {
            let msg = match y {
                Some(yv) => tape.concat_cols(&[x, yv])?,
                None => x,
            };
            let agg = tape.spmm(inputs.adj.clone(), msg)?;
            let z = tape.matmul(agg, vars[layer.w.0])?;
            let tb = layer.time.apply(tape, vars, h)?;
            let z = tape.add_row(z, tb)?;
            let x_next = sigma(tape, vars, z, &layer.ln, dropout, training, rng)?;
            if let (Some(yv), Some(ll)) = (y, &layer.label) {
                let agg = tape.spmm(inputs.adj.clone(), yv)?;
                let z = tape.matmul(agg, vars[ll.w.0])?;
                let z = tape.add_row(z, vars[ll.b.0])?;
                let y_next = sigma(tape, vars, z, &ll.ln, dropout, training, rng)?;
                ys.push(y_next);
                y = Some(y_next);
            }
            xs.push(x_next);
            x = x_next;
        }
        let hrep = tape.repeat_row(h, inputs.n);
        let mut parts = xs;
        parts.extend(ys);
        parts.push(hrep);
        tape.concat_cols(&parts)
    }
}
