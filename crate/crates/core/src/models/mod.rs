//! Networks and their training loops.

mod additive;
mod autoencoder;
mod mlp;
mod train;

pub use additive::{fit_additive_regressor, AdditiveRegressor};
pub use autoencoder::{
    ae_loss_batch, pretrain_oracle, train_autoencoder, AeLoss, AutoencoderModel, BoundAutoencoder, ModelDoc,
    TraceEntry,
};
pub use mlp::{Activation, LayerDoc, Mlp, MlpDoc};
pub use train::{fit_regression, TrainConfig};

use crate::error::{Error, Result};
use crate::numcore::{annihilator, least_squares_fit, DenseMatrix, Graph, NodeId};
use serde::{Deserialize, Serialize};

/// Affine map `a ↦ W a + α` from actions to representation space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// d×k
    pub w: DenseMatrix,
    /// length d
    pub alpha: Vec<f64>,
}

impl LinearFit {
    /// From `(k+1)×d` coefficients of a regression on `[1 | A]`.
    pub fn from_coefficients(coef: &DenseMatrix) -> Self {
        let d = coef.cols();
        let k = coef.rows() - 1;
        let alpha = coef.row(0).to_vec();
        let w = DenseMatrix::from_fn(d, k, |i, j| coef[(j + 1, i)]);
        Self { w, alpha }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Rows of `A·Wᵀ + α`.
    pub fn predict(&self, a: &DenseMatrix) -> DenseMatrix {
        a.matmul_nt(&self.w).add_row(&DenseMatrix::from_vec(1, self.dim(), self.alpha.clone()))
    }

    /// `W a* + α` for a single action.
    pub fn predict_one(&self, a_star: &[f64]) -> Vec<f64> {
        self.predict(&DenseMatrix::from_vec(1, a_star.len(), a_star.to_vec())).into_vec()
    }
}

/// OLS of `phi_x` on `[1 | A]`; returns the fit and the residuals
/// `phi_x − (A·Wᵀ + α)`.
pub fn residual_projection(phi_x: &DenseMatrix, a: &DenseMatrix) -> Result<(LinearFit, DenseMatrix)> {
    if phi_x.rows() != a.rows() {
        return Err(Error::ShapeMismatch(format!("{} representation rows vs {} action rows", phi_x.rows(), a.rows())));
    }
    let fit = least_squares_fit(&a.with_intercept(), phi_x)?;
    Ok((LinearFit::from_coefficients(&fit.coefficients), fit.residuals))
}

/// Residuals on a graph as `Π·phi_x`, where `Π` is the annihilator of
/// `[1 | A]` and enters as a constant, so `∂residuals/∂phi_x = Π`.
pub fn residual_projection_graph(g: &mut Graph, phi_x: NodeId, a: &DenseMatrix) -> Result<NodeId> {
    let pi = annihilator(&a.with_intercept())?;
    let pi = g.constant(pi);
    Ok(g.matmul(pi, phi_x))
}
