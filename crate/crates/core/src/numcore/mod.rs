//! Dense algebra, reverse-mode gradients, Adam and random streams.

pub mod gradcheck;
mod graph;
mod linalg;
mod matrix;
mod optim;
mod rng;

pub use graph::{Gradients, Graph, NodeId};
pub use linalg::{
    annihilator, cholesky, cholesky_solve, least_squares_fit, min_singular_value, symmetric_eigenvalues,
    LeastSquares, RIDGE,
};
pub use matrix::DenseMatrix;
pub use optim::{adam_update, AdamConfig, AdamState};
pub use rng::{stream_id, RngStream};

/// Negative slope of every LeakyReLU in the crate.
pub const LEAKY_SLOPE: f64 = 0.01;
