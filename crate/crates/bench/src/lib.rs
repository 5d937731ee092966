//! Shared fixtures for the benchmarks.

use rep4ex::models::{Activation, Mlp, TrainConfig};
use rep4ex::scm::{sample_unmix, Dataset, ScmUnmixConfig};
use rep4ex::{DenseMatrix, RngStream};

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    RngStream::new(seed, 0xBE).normal_matrix(rows, cols)
}

/// The default three-hidden-layer network shape.
pub fn default_mlp(input: usize, output: usize, seed: u64) -> Mlp {
    let dims = TrainConfig::default().dims(input, output);
    Mlp::init(&dims, Activation::LeakyRelu, &mut RngStream::new(seed, 0xBF))
}

/// A `d = 2`, `α = 5` unmixing sample.
pub fn unmix_sample(n: usize) -> Dataset {
    sample_unmix(&ScmUnmixConfig::random(2, 10, 5.0, 0), n, 0)
}
