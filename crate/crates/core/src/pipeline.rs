//! End-to-end intervention extrapolation: representation learning, control
//! variables, additive regression and do-effect estimation, plus the metrics
//! and model-selection helpers used around them.

use crate::error::{Error, Result};
use crate::models::{
    fit_additive_regressor, fit_regression, residual_projection, train_autoencoder, AdditiveRegressor,
    AutoencoderModel, LinearFit, Mlp, TrainConfig,
};
use crate::numcore::{least_squares_fit, stream_id, DenseMatrix, RngStream};
use crate::scm::{Dataset, Observed};
use serde::{Deserialize, Serialize};

/// Default cutoff on reconstruction-loss inflation when choosing λ.
pub const LAMBDA_CUTOFF: f64 = 0.2;
/// Default λ grid, largest first.
pub const LAMBDA_GRID: [f64; 5] = [1e4, 1e3, 1e2, 10.0, 1.0];

const TAG_VANILLA: u64 = 0x40;
const TAG_MMR: u64 = 0x41;
const TAG_REGRESSOR: u64 = 0x42;
const TAG_MLP: u64 = 0x43;
const TAG_SPLIT: u64 = 0x44;

fn sub_seed(seed: u64, tag: u64) -> u64 {
    stream_id(&[seed, tag])
}

/// Training settings for the two stages.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub autoencoder: TrainConfig,
    pub regressor: TrainConfig,
}

impl PipelineConfig {
    /// Same settings for every network.
    pub fn uniform(cfg: TrainConfig) -> Self {
        Self { autoencoder: cfg.clone(), regressor: cfg }
    }
}

/// Second stage on a given representation `ω = φ(x)`: the affine fit of `ω`
/// on the actions, the training control variables, the additive regressor
/// and the mean correction `δ̂ = mean ν(ω_i) − mean y_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlStage {
    pub linear_fit: LinearFit,
    pub regressor: AdditiveRegressor,
    pub delta: f64,
    /// Control variables `v_i = ω_i − (Ŵ a_i + α̂)` of the training sample.
    pub controls: DenseMatrix,
}

/// Fits the control-function stage on representation `omega`.
pub fn fit_control_stage(
    omega: &DenseMatrix,
    a: &DenseMatrix,
    y: &DenseMatrix,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<ControlStage> {
    let (linear_fit, controls) = residual_projection(omega, a)?;
    let regressor = fit_additive_regressor(omega, &controls, y, cfg, seed)?;
    let delta = regressor.nu(omega).mean() - y.mean();
    if !delta.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: cfg.epochs, batch: 0 });
    }
    Ok(ControlStage { linear_fit, regressor, delta, controls })
}

impl ControlStage {
    /// `(1/n) Σᵢ ν(Ŵ a* + α̂ + vᵢ) − δ̂` over the stored control sample.
    pub fn estimate_do(&self, a_star: &[f64]) -> Result<f64> {
        self.estimate_do_with(a_star, &self.controls)
    }

    /// As [`ControlStage::estimate_do`] with an explicit control sample.
    pub fn estimate_do_with(&self, a_star: &[f64], controls: &DenseMatrix) -> Result<f64> {
        let k = self.linear_fit.w.cols();
        if a_star.len() != k {
            return Err(Error::ShapeMismatch(format!("a* has {} entries, expected {k}", a_star.len())));
        }
        if controls.cols() != self.linear_fit.dim() {
            return Err(Error::ShapeMismatch(format!(
                "control sample has {} columns, expected {}",
                controls.cols(),
                self.linear_fit.dim()
            )));
        }
        let center = DenseMatrix::from_vec(1, controls.cols(), self.linear_fit.predict_one(a_star));
        Ok(self.regressor.nu(&controls.add_row(&center)).mean() - self.delta)
    }

    /// `ν(ω) + ψ(ω − (Ŵ a* + α̂))` for each row of `omega`.
    pub fn estimate_do_given_omega(&self, omega: &DenseMatrix, a_star: &[f64]) -> Result<DenseMatrix> {
        let k = self.linear_fit.w.cols();
        if a_star.len() != k {
            return Err(Error::ShapeMismatch(format!("a* has {} entries, expected {k}", a_star.len())));
        }
        let center = DenseMatrix::from_vec(1, omega.cols(), self.linear_fit.predict_one(a_star));
        let v = omega.sub(&DenseMatrix::from_fn(omega.rows(), omega.cols(), |_, j| center[(0, j)]));
        Ok(self.regressor.predict(omega, &v))
    }
}

/// A trained encoder together with its control-function stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rep4ExModel {
    pub autoencoder: AutoencoderModel,
    pub stage: ControlStage,
}

impl Rep4ExModel {
    pub fn estimate_do(&self, a_star: &[f64]) -> Result<f64> {
        self.stage.estimate_do(a_star)
    }

    /// Conditional estimate `E[Y | X = x, do(A = a*)]` for each row of `x`.
    pub fn estimate_do_given_x(&self, x: &DenseMatrix, a_star: &[f64]) -> Result<DenseMatrix> {
        self.stage.estimate_do_given_omega(&self.autoencoder.encode(x), a_star)
    }
}

/// Vanilla autoencoder followed by the MMR fine-tune started from it.
#[derive(Clone, Debug)]
pub struct TrainedPair {
    pub vanilla: AutoencoderModel,
    pub mmr: AutoencoderModel,
}

/// Trains the `λ = 0` model, then the `λ` model warm-started from it.
pub fn train_mmr_pair(data: Observed<'_>, d: usize, lambda: f64, cfg: &TrainConfig, seed: u64) -> Result<TrainedPair> {
    let vanilla = train_vanilla(data, d, cfg, seed)?;
    let mmr = train_mmr_from(data, &vanilla, lambda, cfg, seed)?;
    Ok(TrainedPair { vanilla, mmr })
}

pub fn train_vanilla(data: Observed<'_>, d: usize, cfg: &TrainConfig, seed: u64) -> Result<AutoencoderModel> {
    train_autoencoder(data, d, 0.0, cfg, None, sub_seed(seed, TAG_VANILLA))
}

pub fn train_mmr_from(
    data: Observed<'_>,
    init: &AutoencoderModel,
    lambda: f64,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<AutoencoderModel> {
    train_autoencoder(data, init.latent_dim(), lambda, cfg, Some(init), sub_seed(seed, TAG_MMR))
}

/// The full procedure on a training sample with outcome.
pub fn run_rep4ex(train: Observed<'_>, d: usize, lambda: f64, cfg: &PipelineConfig, seed: u64) -> Result<Rep4ExModel> {
    train.require_y()?;
    let pair = train_mmr_pair(train, d, lambda, &cfg.autoencoder, seed)?;
    rep4ex_from_encoder(train, pair.mmr, cfg, seed)
}

/// Second stage on an already trained autoencoder.
pub fn rep4ex_from_encoder(
    train: Observed<'_>,
    autoencoder: AutoencoderModel,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Rep4ExModel> {
    let y = train.require_y()?;
    let omega = autoencoder.encode(train.x);
    let stage = fit_control_stage(&omega, train.a, y, &cfg.regressor, sub_seed(seed, TAG_REGRESSOR))?;
    Ok(Rep4ExModel { autoencoder, stage })
}

/// Oracle variant: the true latent `Z` is the representation.
pub fn rep4ex_oracle(data: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<ControlStage> {
    let y = data.observed().require_y()?;
    fit_control_stage(&data.hidden().z, data.a(), y, &cfg.regressor, sub_seed(seed, TAG_REGRESSOR))
}

/// Affine map `(J, d₀)` from a representation to the true latent plus its fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineWitness {
    /// d_z × d_φ
    pub j: DenseMatrix,
    pub d0: Vec<f64>,
    /// Uniform average over latent coordinates of `1 − SSE/SST`.
    pub r_squared: f64,
}

/// OLS of the true latent `z` on `[1 | phi]`.
pub fn r_squared_affine(phi: &DenseMatrix, z: &DenseMatrix) -> Result<AffineWitness> {
    let n = phi.rows();
    if z.rows() != n {
        return Err(Error::ShapeMismatch(format!("{n} representation rows vs {} latent rows", z.rows())));
    }
    if n < phi.cols() + 2 {
        return Err(Error::TooFewSamples { needed: phi.cols() + 2, got: n });
    }
    let fit = least_squares_fit(&phi.with_intercept(), z)?;
    let lin = LinearFit::from_coefficients(&fit.coefficients);
    let means = z.col_means();
    let mut total = 0.0;
    for c in 0..z.cols() {
        let sst: f64 = (0..n).map(|i| (z[(i, c)] - means[(0, c)]).powi(2)).sum();
        if !(sst > 0.0) {
            return Err(Error::DegenerateSample);
        }
        let sse: f64 = (0..n).map(|i| fit.residuals[(i, c)].powi(2)).sum();
        total += 1.0 - sse / sst;
    }
    Ok(AffineWitness { j: lin.w, d0: lin.alpha, r_squared: total / z.cols() as f64 })
}

/// One row of the λ-selection table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub reconstruction: f64,
    pub inflation: f64,
}

#[derive(Clone, Debug)]
pub struct LambdaChoice {
    pub selected: f64,
    pub baseline_reconstruction: f64,
    pub rows: Vec<LambdaRow>,
    pub vanilla: AutoencoderModel,
    /// Trained models in candidate order.
    pub models: Vec<AutoencoderModel>,
}

impl LambdaChoice {
    pub fn selected_model(&self) -> &AutoencoderModel {
        let i = self.rows.iter().position(|r| r.lambda == self.selected).expect("selected λ is a candidate");
        &self.models[i]
    }
}

/// Picks the largest λ whose reconstruction loss is within `cutoff` relative
/// inflation of the `λ = 0` baseline, scanning from the largest candidate and
/// falling back to the smallest. Every candidate is trained from the same
/// vanilla warm start so the full inflation table is available.
pub fn choose_lambda(
    candidates: &[f64],
    cutoff: f64,
    data: Observed<'_>,
    d: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LambdaChoice> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if candidates.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidConfig("lambda candidates must be strictly decreasing".into()));
    }
    let vanilla = train_vanilla(data, d, cfg, seed)?;
    let r0 = vanilla.reconstruction_loss(data.x);
    let mut rows = Vec::with_capacity(candidates.len());
    let mut models = Vec::with_capacity(candidates.len());
    for &lambda in candidates {
        let m = train_mmr_from(data, &vanilla, lambda, cfg, seed)?;
        let r = m.reconstruction_loss(data.x);
        rows.push(LambdaRow { lambda, reconstruction: r, inflation: r / r0 - 1.0 });
        models.push(m);
    }
    let selected = select_lambda(&rows, cutoff);
    Ok(LambdaChoice { selected, baseline_reconstruction: r0, rows, vanilla, models })
}

/// The selection rule on a precomputed table (largest candidate first).
pub fn select_lambda(rows: &[LambdaRow], cutoff: f64) -> f64 {
    let last = rows.last().expect("non-empty table").lambda;
    rows[..rows.len() - 1].iter().find(|r| r.inflation < cutoff).map_or(last, |r| r.lambda)
}

/// Direct regression of `y` on `a`, evaluated on `grid` (rows are actions).
pub fn mlp_baseline(a: &DenseMatrix, y: &DenseMatrix, grid: &DenseMatrix, cfg: &TrainConfig, seed: u64) -> Result<(Mlp, DenseMatrix)> {
    let (net, _) = fit_regression(a, y, cfg, sub_seed(seed, TAG_MLP), 0)?;
    let pred = net.forward(grid);
    Ok((net, pred))
}

/// Holds out the rows whose first action coordinate lies above the
/// `(1 − q)` empirical quantile, so train and test supports are disjoint
/// along that axis.
pub fn split_extrapolation_aware(data: &Dataset, q: f64) -> Result<(Dataset, Dataset)> {
    let n_test = test_size(data.n(), q)?;
    let a = data.a();
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&i, &j| a[(i, 0)].total_cmp(&a[(j, 0)]).then(i.cmp(&j)));
    let (train, test) = order.split_at(data.n() - n_test);
    finish_split(data, train, test)
}

/// Uniformly random split with the same test fraction.
pub fn split_random(data: &Dataset, q: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n_test = test_size(data.n(), q)?;
    let mut order: Vec<usize> = (0..data.n()).collect();
    RngStream::derived(seed, &[TAG_SPLIT]).shuffle(&mut order);
    let (test, train) = order.split_at(n_test);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    finish_split(data, &train, &test)
}

fn test_size(n: usize, q: f64) -> Result<usize> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction must lie in (0, 1), got {q}")));
    }
    Ok((q * n as f64).round() as usize)
}

fn finish_split(data: &Dataset, train: &[usize], test: &[usize]) -> Result<(Dataset, Dataset)> {
    let need = data.a().cols() + 2;
    if train.len() < need || test.len() < need {
        return Err(Error::DegenerateSplit { train: train.len(), test: test.len() });
    }
    Ok((data.select_rows(train), data.select_rows(test)))
}
