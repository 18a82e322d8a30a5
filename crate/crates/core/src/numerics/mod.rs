//! Dense tensor arithmetic, a reverse-mode tape, parameters, and the optimizer.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the rest of the
//! crate instantiates it at `f64` through the aliases in the crate root.

mod gradcheck;
mod layers;
mod optim;
mod params;
mod scalar;
mod sparse;
mod tape;
mod tensor;

pub use gradcheck::grad_check;
pub use layers::{
    fan_in_uniform, uniform_weight, Activation, Dense, LayerNormParams, Normalize, LAYER_NORM_EPS,
};
pub use optim::{clip_grad_norm, AmsGrad, OptimizerConfig};
pub use params::{ParamId, ParamSet};
pub use scalar::Scalar;
pub use sparse::SparseMatrix;
pub use tape::{sigmoid, Gradients, Tape, Var};
pub use tensor::{softmax_in_place, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension error in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} values")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("index error in {op}: {index} not below {bound}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
}
