//! Discrete denoising diffusion for large attributed graphs.
//!
//! The crate learns a generative model of a single graph with categorical
//! node attributes (and optional node labels), samples synthetic graphs in
//! synchronous, asynchronous, and label-conditional modes, and evaluates
//! them against the original with structural statistics and an ML-utility
//! protocol.
//!
//! Numeric kernels are generic over [`numerics::Scalar`]; the aliases below
//! fix the working precision of the models at `f64`.

pub mod baselines;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod eval_ml;
pub mod eval_structural;
pub mod generation;
pub mod graphdata;
pub mod numerics;
pub mod report;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use graphdata::{AttributedGraph, Marginals};

pub type Tensor = numerics::Tensor<f64>;
pub type Tape = numerics::Tape<f64>;
pub type ParamSet = numerics::ParamSet<f64>;
pub type SparseMatrix = numerics::SparseMatrix<f64>;
