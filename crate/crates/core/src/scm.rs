//! Synthetic structural causal models with hidden ground truth.
//!
//! Two families are simulated:
//!
//! * unmixing: `A ~ Unif(−1,1)^k`, `Z = α·M₀A + V`, `X = g₀(Z)`;
//! * extrapolation: `A ~ Unif([−γ,γ]^k)`, `Z = M₀A + V`, `X = g₀(Z) + σ_x·ε_X`,
//!   `Y = ℓ(Z) + U` with `U = h(V) + ε_U`, or `(U, V)` jointly Gaussian with
//!   correlation `ρ` in the confounding mode.
//!
//! Structural parameters (`g₀`, `M₀`, `Σ_V`, `h`, `ℓ`) are drawn once per
//! config seed; each call to a sampler takes a `draw` index selecting an
//! independent sampling stream, so training and evaluation samples share the
//! same mechanism.

use crate::error::{Error, Result};
use crate::models::{Activation, Mlp};
use crate::numcore::{cholesky, min_singular_value, DenseMatrix, RngStream};
use serde::{Deserialize, Serialize};

/// Width and depth of the mixing network `g₀`.
pub const MIXING_HIDDEN: [usize; 3] = [16, 16, 16];
/// Hidden width of the random tanh networks `h` and `ℓ`.
pub const TANH_HIDDEN: usize = 64;
/// Monte-Carlo sample size used to center random `h`.
pub const CENTERING_SAMPLES: usize = 100_000;
/// M₀ is redrawn until its smallest singular value exceeds this.
pub const MIN_SINGULAR: f64 = 1e-6;

// Stream labels.
const TAG_MIXING: u64 = 0x01;
const TAG_M0: u64 = 0x02;
const TAG_SIGMA: u64 = 0x03;
const TAG_OUTCOME: u64 = 0x04;
const TAG_CENTER: u64 = 0x05;
const TAG_SAMPLE: u64 = 0x10;
const TAG_DO_MC: u64 = 0x11;

/// Latent confounders and predictors. Evaluation only.
#[derive(Clone, Debug, PartialEq)]
pub struct Hidden {
    pub z: DenseMatrix,
    pub v: DenseMatrix,
    pub u: Option<DenseMatrix>,
}

/// A sample of `(A, X, Y)` plus its hidden block.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    a: DenseMatrix,
    x: DenseMatrix,
    y: Option<DenseMatrix>,
    hidden: Hidden,
}

/// What a learner is allowed to see: actions, features and, when present,
/// the outcome.
#[derive(Clone, Copy, Debug)]
pub struct Observed<'a> {
    pub a: &'a DenseMatrix,
    pub x: &'a DenseMatrix,
    pub y: Option<&'a DenseMatrix>,
}

impl<'a> Observed<'a> {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn require_y(&self) -> Result<&'a DenseMatrix> {
        self.y.ok_or(Error::MissingBlock("Y"))
    }
}

impl Dataset {
    /// Panics if block row counts disagree.
    pub fn new(a: DenseMatrix, x: DenseMatrix, y: Option<DenseMatrix>, hidden: Hidden) -> Self {
        let n = a.rows();
        assert_eq!(x.rows(), n, "X rows");
        assert!(y.as_ref().is_none_or(|y| y.rows() == n), "Y rows");
        assert_eq!(hidden.z.rows(), n, "Z rows");
        assert_eq!(hidden.v.rows(), n, "V rows");
        assert!(hidden.u.as_ref().is_none_or(|u| u.rows() == n), "U rows");
        Self { a, x, y, hidden }
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn observed(&self) -> Observed<'_> {
        Observed { a: &self.a, x: &self.x, y: self.y.as_ref() }
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> Option<&DenseMatrix> {
        self.y.as_ref()
    }

    /// Ground truth for metrics and oracles; never fed to a learner.
    pub fn hidden(&self) -> &Hidden {
        &self.hidden
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            a: self.a.select_rows(idx),
            x: self.x.select_rows(idx),
            y: self.y.as_ref().map(|y| y.select_rows(idx)),
            hidden: Hidden {
                z: self.hidden.z.select_rows(idx),
                v: self.hidden.v.select_rows(idx),
                u: self.hidden.u.as_ref().map(|u| u.select_rows(idx)),
            },
        }
    }
}

/// The mixing function `g₀`: LeakyReLU network `d → 16 → 16 → 16 → m` with
/// every weight and bias i.i.d. `Unif(−1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingNetwork(Mlp);

impl MixingNetwork {
    pub fn random(d: usize, m: usize, stream: &mut RngStream) -> Self {
        let mut dims = vec![d];
        dims.extend_from_slice(&MIXING_HIDDEN);
        dims.push(m);
        Self(Mlp::uniform(&dims, Activation::LeakyRelu, -1.0, 1.0, stream))
    }

    pub fn apply(&self, z: &DenseMatrix) -> DenseMatrix {
        self.0.forward(z)
    }

    pub fn network(&self) -> &Mlp {
        &self.0
    }
}

/// `Σ_V = BBᵀ + diag(w)` with `B` (d×d, drawn row-major first) and `w`
/// entrywise `Unif(0, 1)`.
pub fn make_sigma_v(d: usize, stream: &mut RngStream) -> DenseMatrix {
    assert!(d >= 1, "latent dimension must be positive");
    let b = stream.uniform_matrix(d, d, 0.0, 1.0);
    let w: Vec<f64> = (0..d).map(|_| stream.uniform(0.0, 1.0)).collect();
    let mut sigma = b.matmul_nt(&b);
    for (i, wi) in w.into_iter().enumerate() {
        sigma[(i, i)] += wi;
    }
    sigma
}

/// `M₀` (d×k) with entries `Unif(−2, 2)`, redrawn until full row rank.
pub fn draw_m0(d: usize, k: usize, stream: &mut RngStream) -> DenseMatrix {
    assert!(k >= d, "full row rank needs k >= d");
    loop {
        let m0 = stream.uniform_matrix(d, k, -2.0, 2.0);
        if min_singular_value(&m0) > MIN_SINGULAR {
            return m0;
        }
    }
}

/// `n` draws of `N(0, Σ)` as rows.
fn gaussian_rows(n: usize, sigma: &DenseMatrix, stream: &mut RngStream) -> DenseMatrix {
    let l = cholesky(sigma).expect("covariance must be positive definite");
    stream.normal_matrix(n, sigma.rows()).matmul_nt(&l)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmUnmixConfig {
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub m0: DenseMatrix,
    pub sigma_v: DenseMatrix,
    pub mixing: MixingNetwork,
    pub seed: u64,
}

impl ScmUnmixConfig {
    /// Random structure with `k = d`. The structure depends on `seed` only, so
    /// sweeping `alpha` at a fixed seed changes nothing else.
    pub fn random(d: usize, m: usize, alpha: f64, seed: u64) -> Self {
        let k = d;
        let mixing = MixingNetwork::random(d, m, &mut RngStream::derived(seed, &[TAG_MIXING]));
        let m0 = draw_m0(d, k, &mut RngStream::derived(seed, &[TAG_M0]));
        let sigma_v = make_sigma_v(d, &mut RngStream::derived(seed, &[TAG_SIGMA]));
        Self { d, k, m, alpha, m0, sigma_v, mixing, seed }
    }
}

/// `A ~ Unif(−1,1)^k`, `V ~ N(0, Σ_V)`, `Z = α·M₀A + V`, `X = g₀(Z)`.
pub fn sample_unmix(cfg: &ScmUnmixConfig, n: usize, draw: u64) -> Dataset {
    let mut s = RngStream::derived(cfg.seed, &[TAG_SAMPLE, draw]);
    let a = s.uniform_matrix(n, cfg.k, -1.0, 1.0);
    let v = gaussian_rows(n, &cfg.sigma_v, &mut s);
    let z = a.matmul_nt(&cfg.m0).scale(cfg.alpha).add(&v);
    let x = cfg.mixing.apply(&z);
    Dataset::new(a, x, None, Hidden { z, v, u: None })
}

/// Outcome mechanism `(h, ℓ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeSpec {
    /// `h(v) = v³/5`, `ℓ(z) = −2z + 10·sin z` (d = 1).
    Cubic1d,
    /// One-hidden-layer tanh networks with `Unif(−1,1)` weights; `h` is
    /// shifted by `h_offset` so that `E[h(V)] = 0`.
    RandomTanh { h: Mlp, ell: Mlp, h_offset: f64 },
}

impl OutcomeSpec {
    /// `ℓ` applied row-wise, n×1.
    pub fn ell(&self, z: &DenseMatrix) -> DenseMatrix {
        match self {
            OutcomeSpec::Cubic1d => z.map(|z| -2.0 * z + 10.0 * z.sin()),
            OutcomeSpec::RandomTanh { ell, .. } => ell.forward(z),
        }
    }

    /// `h` applied row-wise (centered), n×1.
    pub fn h(&self, v: &DenseMatrix) -> DenseMatrix {
        match self {
            OutcomeSpec::Cubic1d => v.map(|v| v * v * v / 5.0),
            OutcomeSpec::RandomTanh { h, h_offset, .. } => h.forward(v).map(|x| x - h_offset),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmExtrapConfig {
    pub gamma: f64,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub m0: DenseMatrix,
    pub sigma_v: DenseMatrix,
    pub mixing: MixingNetwork,
    pub outcome: OutcomeSpec,
    /// Confounding mode: `(U, V)` bivariate Gaussian with correlation `rho`.
    pub rho: Option<f64>,
    /// Standard deviation of additive noise on `X`.
    pub sigma_x: f64,
    pub seed: u64,
}

impl ScmExtrapConfig {
    /// One-dimensional `A` and `Z`, two-dimensional `X`, cubic/sine outcome.
    pub fn one_dim(gamma: f64, seed: u64) -> Self {
        let (d, k, m) = (1, 1, 2);
        Self {
            gamma,
            d,
            k,
            m,
            m0: draw_m0(d, k, &mut RngStream::derived(seed, &[TAG_M0])),
            sigma_v: make_sigma_v(d, &mut RngStream::derived(seed, &[TAG_SIGMA])),
            mixing: MixingNetwork::random(d, m, &mut RngStream::derived(seed, &[TAG_MIXING])),
            outcome: OutcomeSpec::Cubic1d,
            rho: None,
            sigma_x: 0.0,
            seed,
        }
    }

    /// `k = d`, `m = 10`, training support `[−1, 1]^d`, random tanh `h`, `ℓ`.
    pub fn multi_dim(d: usize, seed: u64) -> Self {
        let (k, m) = (d, 10);
        let sigma_v = make_sigma_v(d, &mut RngStream::derived(seed, &[TAG_SIGMA]));
        let mut s = RngStream::derived(seed, &[TAG_OUTCOME]);
        let dims = [d, TANH_HIDDEN, 1];
        let h = Mlp::uniform(&dims, Activation::Tanh, -1.0, 1.0, &mut s);
        let ell = Mlp::uniform(&dims, Activation::Tanh, -1.0, 1.0, &mut s);
        let v = gaussian_rows(CENTERING_SAMPLES, &sigma_v, &mut RngStream::derived(seed, &[TAG_CENTER]));
        let h_offset = h.forward(&v).mean();
        Self {
            gamma: 1.0,
            d,
            k,
            m,
            m0: draw_m0(d, k, &mut RngStream::derived(seed, &[TAG_M0])),
            sigma_v,
            mixing: MixingNetwork::random(d, m, &mut RngStream::derived(seed, &[TAG_MIXING])),
            outcome: OutcomeSpec::RandomTanh { h, ell, h_offset },
            rho: None,
            sigma_x: 0.0,
            seed,
        }
    }

    pub fn with_confounding(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_noise(mut self, sigma_x: f64) -> Self {
        self.sigma_x = sigma_x;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.sigma_x >= 0.0) {
            return Err(Error::InvalidConfig(format!("sigma_x must be nonnegative, got {}", self.sigma_x)));
        }
        if let Some(rho) = self.rho {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidConfig(format!("rho must lie in [0, 1), got {rho}")));
            }
            if self.d != 1 {
                return Err(Error::ConfoundingModeDim);
            }
        }
        Ok(())
    }

    /// Draws of the control noise `V` (and of `U` in the confounding mode).
    fn noise(&self, n: usize, s: &mut RngStream) -> (DenseMatrix, DenseMatrix) {
        match self.rho {
            Some(rho) => {
                let v = s.normal_matrix(n, 1);
                let e = s.normal_matrix(n, 1);
                let c = (1.0 - rho * rho).sqrt();
                let u = v.zip_map(&e, |v, e| rho * v + c * e);
                (v, u)
            }
            None => {
                let v = gaussian_rows(n, &self.sigma_v, s);
                let eps = s.normal_matrix(n, 1);
                let u = self.outcome.h(&v).add(&eps);
                (v, u)
            }
        }
    }

    fn control_noise(&self, n: usize, s: &mut RngStream) -> DenseMatrix {
        match self.rho {
            Some(_) => s.normal_matrix(n, 1),
            None => gaussian_rows(n, &self.sigma_v, s),
        }
    }
}

/// One sample of the extrapolation SCM.
pub fn sample_extrap(cfg: &ScmExtrapConfig, n: usize, draw: u64) -> Result<Dataset> {
    cfg.validate()?;
    let mut s = RngStream::derived(cfg.seed, &[TAG_SAMPLE, draw]);
    let a = s.uniform_matrix(n, cfg.k, -cfg.gamma, cfg.gamma);
    let (v, u) = cfg.noise(n, &mut s);
    let z = a.matmul_nt(&cfg.m0).add(&v);
    let mut x = cfg.mixing.apply(&z);
    if cfg.sigma_x > 0.0 {
        x = x.add(&s.normal_matrix(n, cfg.m).scale(cfg.sigma_x));
    }
    let y = cfg.outcome.ell(&z).add(&u);
    Ok(Dataset::new(a, x, Some(y), Hidden { z, v, u: Some(u) }))
}

/// Monte-Carlo estimate of an interventional mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoMean {
    pub mean: f64,
    pub std_error: f64,
}

pub const MIN_DO_SAMPLES: usize = 10_000;

/// `E[Y | do(A = a*)] = E[ℓ(M₀a* + V)]` over fresh draws of `V`.
pub fn true_do_mean(cfg: &ScmExtrapConfig, a_star: &[f64], n_mc: usize, draw: u64) -> Result<DoMean> {
    cfg.validate()?;
    if a_star.len() != cfg.k {
        return Err(Error::ShapeMismatch(format!("a* has {} entries, expected {}", a_star.len(), cfg.k)));
    }
    if n_mc < MIN_DO_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_DO_SAMPLES, got: n_mc });
    }
    let mut s = RngStream::derived(cfg.seed, &[TAG_DO_MC, draw]);
    let shift = cfg.m0.matmul(&DenseMatrix::column_vector(a_star)).transpose();
    let z = cfg.control_noise(n_mc, &mut s).add_row(&shift);
    let vals = cfg.outcome.ell(&z);
    let mean = vals.mean();
    let var = vals.as_slice().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n_mc - 1) as f64;
    Ok(DoMean { mean, std_error: (var / n_mc as f64).sqrt() })
}
