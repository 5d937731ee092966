//! Intervention extrapolation through identifiable representations.
//!
//! An autoencoder whose encoder is pushed towards linear invariance with
//! respect to exogenous actions (a kernel maximum-moment penalty) recovers the
//! latent predictors up to an affine map. A control-function stage on top of
//! that representation then predicts `E[Y | do(A = a*)]` for actions outside
//! the training support.

pub mod error;
pub mod experiment;
pub mod kernels;
pub mod models;
pub mod numcore;
pub mod pipeline;
pub mod prop1;
pub mod scm;

pub use error::{Error, Result};
pub use numcore::{DenseMatrix, Graph, NodeId, RngStream};
