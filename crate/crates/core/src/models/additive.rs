use super::train::{mse_node, run_minibatch, BatchOutcome};
use super::{Activation, Mlp, TrainConfig};
use crate::error::{Error, Result};
use crate::numcore::{DenseMatrix, RngStream};
use serde::{Deserialize, Serialize};

const TAG_INIT: u64 = 0x30;
const TAG_BATCHES: u64 = 0x31;

/// `y ≈ ν(ω) + ψ(v)` with two independent networks; `ν` carries the
/// representation and `ψ` the control variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveRegressor {
    pub nu: Mlp,
    pub psi: Mlp,
    /// Per-epoch mean batch MSE.
    pub trace: Vec<f64>,
}

impl AdditiveRegressor {
    pub fn predict(&self, omega: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
        self.nu.forward(omega).add(&self.psi.forward(v))
    }

    pub fn nu(&self, omega: &DenseMatrix) -> DenseMatrix {
        self.nu.forward(omega)
    }
}

/// Joint minibatch fit of `ν` and `ψ` on squared error.
pub fn fit_additive_regressor(
    omega: &DenseMatrix,
    v: &DenseMatrix,
    y: &DenseMatrix,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<AdditiveRegressor> {
    let n = y.rows();
    if omega.rows() != n || v.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "additive fit rows: omega {}, v {}, y {}",
            omega.rows(),
            v.rows(),
            n
        )));
    }
    let mut s = RngStream::derived(seed, &[TAG_INIT]);
    let mut nu = Mlp::init(&cfg.dims(omega.cols(), y.cols()), Activation::LeakyRelu, &mut s);
    let mut psi = Mlp::init(&cfg.dims(v.cols(), y.cols()), Activation::LeakyRelu, &mut s);
    let split = nu.tensor_count();
    let mut params = nu.params();
    params.extend(psi.params());

    let mut stream = RngStream::derived(seed, &[TAG_BATCHES]);
    let trace = run_minibatch(n, 1, cfg, &mut stream, &mut params, |g, p, idx| {
        let on = g.constant(omega.select_rows(idx));
        let vn = g.constant(v.select_rows(idx));
        let yn = g.constant(y.select_rows(idx));
        let a = nu.forward_graph(g, on, &p[..split]);
        let b = psi.forward_graph(g, vn, &p[split..]);
        let pred = g.add(a, b);
        let loss = mse_node(g, pred, yn);
        let l = g.value(loss).item();
        Ok(BatchOutcome { loss, metrics: [l, 0.0] })
    })?;
    nu.set_params(&params[..split]);
    psi.set_params(&params[split..]);
    Ok(AdditiveRegressor { nu, psi, trace: trace.into_iter().map(|t| t[0]).collect() })
}
