use rand::Rng;

use super::heads::AttrHead;
use super::inputs::GraphInputs;
use super::time::TimeEmbedding;
use crate::numerics::{uniform_weight, LayerNormParams, NumericsError, ParamId, Var};
use crate::{ParamSet, Tape, Tensor};

/// Structure-free attribute denoiser: one hidden layer over
/// `[one-hot x_t | one-hot y | h_t]`, then per-attribute heads.
#[derive(Clone, Debug)]
pub struct AttrMlp {
    time: TimeEmbedding,
    w_attr: ParamId,
    w_label: Option<ParamId>,
    w_time: ParamId,
    bias: ParamId,
    ln: LayerNormParams,
    pub head: AttrHead,
}

impl AttrMlp {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        cardinalities: &[usize],
        labels: Option<usize>,
        hidden: usize,
        time_hidden: usize,
        rng: &mut R,
    ) -> Self {
        let width: usize = cardinalities.iter().sum();
        let bound = 1.0 / ((width + labels.unwrap_or(0) + time_hidden) as f64).sqrt();
        let time = TimeEmbedding::new(params, &format!("{name}.time"), time_hidden, rng);
        // one linear map over the concatenated input, stored in blocks so the
        // one-hot parts stay sparse
        let w_attr = uniform_weight(
            params,
            &format!("{name}.attr_in"),
            width,
            hidden,
            bound,
            rng,
        );
        let w_label = labels
            .map(|c| uniform_weight(params, &format!("{name}.label_in"), c, hidden, bound, rng));
        let w_time = uniform_weight(
            params,
            &format!("{name}.time_in"),
            time_hidden,
            hidden,
            bound,
            rng,
        );
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(1, hidden));
        Self {
            time,
            w_attr,
            w_label,
            w_time,
            bias,
            ln: LayerNormParams::new(params, &format!("{name}.ln"), hidden),
            head: AttrHead::new(params, &format!("{name}.head"), hidden, cardinalities, rng),
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

    /// Per-node logits, `n x sum(C_f)`. Only the attribute and label encodings of
    /// `inputs` are read.
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
        let mut z = tape.spmm(inputs.attrs.clone(), vars[self.w_attr.0])?;
        if let (Some(w), Some(y)) = (self.w_label, &inputs.labels) {
            let zy = tape.spmm(y.clone(), vars[w.0])?;
            z = tape.add(z, zy)?;
        }
        let tb = tape.linear(h, vars[self.w_time.0], vars[self.bias.0])?;
        let z = tape.add_row(z, tb)?;
        let z = tape.relu(z);
        let z = self.ln.apply(tape, vars, z)?;
        let z = tape.dropout(z, dropout, training, rng);
        self.head.forward(tape, vars, z)
    }
}
