//! Seeded, table-producing drivers for every simulation study.
//!
//! A run enumerates grid points, picks λ once per grid point on the first
//! repetition (when λ is `"auto"`), then executes every (grid point,
//! repetition) job on a worker pool. Each job owns its data, models and
//! streams, so the output does not depend on scheduling.

use crate::error::{Error, Result};
use crate::models::{pretrain_oracle, AutoencoderModel, TrainConfig};
use crate::numcore::{stream_id, DenseMatrix, RngStream};
use crate::pipeline::{
    choose_lambda, mlp_baseline, r_squared_affine, rep4ex_from_encoder, rep4ex_oracle, run_rep4ex, split_extrapolation_aware,
    split_random, train_mmr_from, train_mmr_pair, LambdaChoice, PipelineConfig, Rep4ExModel, LAMBDA_CUTOFF, LAMBDA_GRID,
};
use crate::prop1::{self, Which};
use crate::scm::{sample_extrap, sample_unmix, true_do_mean, Dataset, ScmExtrapConfig, ScmUnmixConfig, MIN_DO_SAMPLES};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fmt::Write as _;
use std::str::FromStr;

pub const AE_MMR: &str = "AE-MMR";
pub const AE_VANILLA: &str = "AE-Vanilla";
pub const AE_MMR_ORACLE: &str = "AE-MMR-Oracle";
pub const REP4EX_CF: &str = "Rep4Ex-CF";
pub const REP4EX_CF_ORACLE: &str = "Rep4Ex-CF-Oracle";
pub const MLP: &str = "MLP";

const TAG_TEST_POINTS: u64 = 0x50;
const TAG_SPLIT_EXTRAP: u64 = 0x51;
const TAG_SPLIT_RANDOM: u64 = 0x52;
const TAG_PROP1: u64 = 0x53;

const DRAW_TRAIN: u64 = 0;
const DRAW_EVAL: u64 = 1;
const DRAW_TRUTH: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    UnmixFig2,
    Extrap1dFig3,
    ExtrapndFig4,
    ConfoundFig7,
    NoisyxFig8,
    Prop1,
    LambdaSweep,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::UnmixFig2,
        ExperimentId::Extrap1dFig3,
        ExperimentId::ExtrapndFig4,
        ExperimentId::ConfoundFig7,
        ExperimentId::NoisyxFig8,
        ExperimentId::Prop1,
        ExperimentId::LambdaSweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::UnmixFig2 => "unmix-fig2",
            ExperimentId::Extrap1dFig3 => "extrap1d-fig3",
            ExperimentId::ExtrapndFig4 => "extrapnd-fig4",
            ExperimentId::ConfoundFig7 => "confound-fig7",
            ExperimentId::NoisyxFig8 => "noisyx-fig8",
            ExperimentId::Prop1 => "prop1",
            ExperimentId::LambdaSweep => "lambda-sweep",
        }
    }

    fn is_unmix(self) -> bool {
        matches!(self, ExperimentId::UnmixFig2 | ExperimentId::LambdaSweep)
    }

    fn is_extrap(self) -> bool {
        matches!(
            self,
            ExperimentId::Extrap1dFig3 | ExperimentId::ExtrapndFig4 | ExperimentId::ConfoundFig7 | ExperimentId::NoisyxFig8
        )
    }

    /// Methods run when the config does not filter them.
    pub fn default_methods(self) -> &'static [&'static str] {
        match self {
            ExperimentId::UnmixFig2 => &[AE_MMR, AE_VANILLA, AE_MMR_ORACLE],
            ExperimentId::ExtrapndFig4 => &[REP4EX_CF, REP4EX_CF_ORACLE, MLP],
            ExperimentId::Extrap1dFig3 | ExperimentId::ConfoundFig7 | ExperimentId::NoisyxFig8 => &[REP4EX_CF, MLP],
            ExperimentId::Prop1 | ExperimentId::LambdaSweep => &[],
        }
    }

    fn allowed_methods(self) -> &'static [&'static str] {
        match self {
            ExperimentId::UnmixFig2 => &[AE_MMR, AE_VANILLA, AE_MMR_ORACLE],
            e if e.is_extrap() => &[REP4EX_CF, REP4EX_CF_ORACLE, MLP],
            _ => &[],
        }
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWord {
    Auto,
}

/// `"auto"` runs the reconstruction-inflation heuristic on the first
/// repetition of every grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSetting {
    Auto(AutoWord),
    Fixed(f64),
}

impl Default for LambdaSetting {
    fn default() -> Self {
        LambdaSetting::Auto(AutoWord::Auto)
    }
}

impl FromStr for LambdaSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::default());
        }
        s.parse::<f64>()
            .map(LambdaSetting::Fixed)
            .map_err(|_| Error::InvalidConfig(format!("lambda must be 'auto' or a number, got '{s}'")))
    }
}

fn default_lambda_grid() -> Vec<f64> {
    LAMBDA_GRID.to_vec()
}
fn default_cutoff() -> f64 {
    LAMBDA_CUTOFF
}
fn default_repetitions() -> usize {
    5
}
fn default_mixing_dim() -> usize {
    10
}
fn default_n_mc() -> usize {
    100_000
}
fn default_grid_points() -> usize {
    121
}
fn default_grid_max() -> f64 {
    3.0
}
fn default_test_points() -> usize {
    100
}
fn default_prop1_samples() -> usize {
    1_000_000
}
fn default_output_dir() -> String {
    "results".into()
}

/// A complete experiment description; unset grids take per-experiment
/// defaults in [`ExperimentConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default)]
    pub rhos: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma_xs: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda: LambdaSetting,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Training sample size.
    #[serde(default)]
    pub n: Option<usize>,
    /// Observed dimension `m` of the unmixing study.
    #[serde(default = "default_mixing_dim")]
    pub mixing_dim: usize,
    #[serde(default)]
    pub autoencoder: TrainConfig,
    #[serde(default)]
    pub regressor: TrainConfig,
    /// Monte-Carlo draws per interventional truth.
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    /// Equally spaced `a*` over `[−grid_max, grid_max]` (one-dimensional studies).
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_grid_max")]
    pub grid_max: f64,
    /// Draws from `Unif([−3, −1]^d)` (multi-dimensional study).
    #[serde(default = "default_test_points")]
    pub test_points: usize,
    #[serde(default = "default_prop1_samples")]
    pub prop1_samples: usize,
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    /// Held-out fraction for the split diagnostic; off when unset.
    #[serde(default)]
    pub split_fraction: Option<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

impl ExperimentConfig {
    /// Defaults for `experiment` with nothing else set.
    pub fn new(experiment: ExperimentId) -> Self {
        serde_json::from_value(json!({ "experiment": experiment })).expect("defaults deserialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Fills unset grids and methods, then validates.
    pub fn resolve(&self) -> Result<Self> {
        let mut c = self.clone();
        let e = c.experiment;
        let unmix = e.is_unmix();
        c.alphas.get_or_insert_with(|| if unmix { vec![0.5, 1.0, 2.0, 5.0] } else { vec![] });
        c.dims.get_or_insert_with(|| match e {
            ExperimentId::UnmixFig2 | ExperimentId::LambdaSweep => vec![2, 4],
            ExperimentId::ExtrapndFig4 => vec![2, 4, 10],
            _ => vec![1],
        });
        c.gammas.get_or_insert_with(|| match e {
            ExperimentId::Extrap1dFig3 => vec![0.2, 0.7, 1.2],
            ExperimentId::ConfoundFig7 | ExperimentId::NoisyxFig8 => vec![1.2],
            ExperimentId::ExtrapndFig4 => vec![1.0],
            _ => vec![],
        });
        c.rhos.get_or_insert_with(|| if e == ExperimentId::ConfoundFig7 { vec![0.0, 0.1, 0.5, 0.9] } else { vec![] });
        c.sigma_xs.get_or_insert_with(|| if e == ExperimentId::NoisyxFig8 { vec![1.0, 2.0, 4.0] } else { vec![] });
        c.n.get_or_insert(if unmix { 1000 } else { 10_000 });
        c.methods.get_or_insert_with(|| e.default_methods().iter().map(|s| s.to_string()).collect());
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let e = self.experiment;
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        let grid = |name: &str, v: &Option<Vec<f64>>, ok: &dyn Fn(f64) -> bool| -> Result<()> {
            let v = v.as_deref().unwrap_or(&[]);
            if v.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} grid must be non-empty")));
            }
            match v.iter().find(|&&x| !ok(x)) {
                Some(x) => Err(Error::InvalidConfig(format!("{name} value {x} out of range"))),
                None => Ok(()),
            }
        };
        let dims = self.dims.as_deref().unwrap_or(&[]);
        if e.is_unmix() {
            grid("alphas", &self.alphas, &|a| a.is_finite() && a >= 0.0)?;
            if dims.is_empty() || dims.contains(&0) {
                return bad("dims must be a non-empty list of positive integers".into());
            }
            if self.mixing_dim == 0 {
                return bad("mixing_dim must be positive".into());
            }
        }
        if e.is_extrap() {
            grid("gammas", &self.gammas, &|g| g.is_finite() && g > 0.0)?;
            match e {
                ExperimentId::ExtrapndFig4 => {
                    if dims.is_empty() || dims.contains(&0) {
                        return bad("dims must be a non-empty list of positive integers".into());
                    }
                }
                ExperimentId::ConfoundFig7 => grid("rhos", &self.rhos, &|r| (0.0..1.0).contains(&r))?,
                ExperimentId::NoisyxFig8 => grid("sigma_xs", &self.sigma_xs, &|s| s.is_finite() && s >= 0.0)?,
                _ => {}
            }
            if matches!(e, ExperimentId::ConfoundFig7 | ExperimentId::NoisyxFig8) && self.gammas.as_ref().map_or(0, Vec::len) != 1 {
                return bad(format!("{} takes exactly one gamma", e.as_str()));
            }
            if self.n_mc < MIN_DO_SAMPLES {
                return bad(format!("n_mc must be at least {MIN_DO_SAMPLES}"));
            }
            if self.grid_points < 2 || !(self.grid_max > 0.0) || self.test_points == 0 {
                return bad("evaluation grid needs grid_points >= 2, grid_max > 0 and test_points >= 1".into());
            }
        }
        if let LambdaSetting::Fixed(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return bad(format!("lambda must be nonnegative, got {l}"));
            }
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        if self.lambda_grid.windows(2).any(|w| !(w[0] > w[1])) || self.lambda_grid.iter().any(|&l| !(l > 0.0)) {
            return bad("lambda_grid must be positive and strictly decreasing".into());
        }
        if !(self.cutoff > 0.0) {
            return bad(format!("cutoff must be positive, got {}", self.cutoff));
        }
        if self.n.is_some_and(|n| n < 10) {
            return bad("n must be at least 10".into());
        }
        if let Some(q) = self.split_fraction {
            if !(q > 0.0 && q < 1.0) {
                return bad(format!("split_fraction must lie in (0, 1), got {q}"));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if e == ExperimentId::Prop1 && self.prop1_samples < 2 {
            return bad("prop1_samples must be at least 2".into());
        }
        let allowed = e.allowed_methods();
        for m in self.methods.as_deref().unwrap_or(&[]) {
            if !allowed.contains(&m.as_str()) {
                return bad(format!("method '{m}' is not available for {}", e.as_str()));
            }
        }
        self.autoencoder.validate()?;
        self.regressor.validate()
    }

    fn runs(&self, method: &str) -> bool {
        self.methods.as_ref().is_some_and(|m| m.iter().any(|x| x == method))
    }

    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig { autoencoder: self.autoencoder.clone(), regressor: self.regressor.clone() }
    }

    fn n_train(&self) -> usize {
        self.n.expect("resolved config")
    }

    /// Grid points in output order. Call on a resolved config.
    pub fn points(&self) -> Vec<GridPoint> {
        let list = |v: &Option<Vec<f64>>| v.clone().unwrap_or_default();
        let dims = self.dims.clone().unwrap_or_default();
        let gamma0 = list(&self.gammas).first().copied().unwrap_or(1.0);
        let kinds: Vec<PointKind> = match self.experiment {
            ExperimentId::UnmixFig2 | ExperimentId::LambdaSweep => dims
                .iter()
                .flat_map(|&d| list(&self.alphas).into_iter().map(move |alpha| PointKind::Unmix { d, alpha }))
                .collect(),
            ExperimentId::Extrap1dFig3 => list(&self.gammas)
                .into_iter()
                .map(|gamma| PointKind::Extrap { gamma, d: 1, rho: None, sigma_x: 0.0 })
                .collect(),
            ExperimentId::ExtrapndFig4 => {
                dims.iter().map(|&d| PointKind::Extrap { gamma: 1.0, d, rho: None, sigma_x: 0.0 }).collect()
            }
            ExperimentId::ConfoundFig7 => list(&self.rhos)
                .into_iter()
                .map(|rho| PointKind::Extrap { gamma: gamma0, d: 1, rho: Some(rho), sigma_x: 0.0 })
                .collect(),
            ExperimentId::NoisyxFig8 => list(&self.sigma_xs)
                .into_iter()
                .map(|sigma_x| PointKind::Extrap { gamma: gamma0, d: 1, rho: None, sigma_x })
                .collect(),
            ExperimentId::Prop1 => vec![],
        };
        kinds.into_iter().enumerate().map(|(index, kind)| GridPoint { index, kind }).collect()
    }

    /// Seed of one (grid point, repetition) job.
    pub fn job_seed(&self, point: usize, rep: usize) -> u64 {
        stream_id(&[self.master_seed, point as u64, rep as u64])
    }

    /// Training sample of a (grid point, repetition) job.
    pub fn training_data(&self, point: &GridPoint, rep: usize) -> Result<Dataset> {
        let seed = self.job_seed(point.index, rep);
        match point.kind {
            PointKind::Unmix { d, alpha } => {
                Ok(sample_unmix(&ScmUnmixConfig::random(d, self.mixing_dim, alpha, seed), self.n_train(), DRAW_TRAIN))
            }
            PointKind::Extrap { .. } => sample_extrap(&self.extrap_scm(point, seed)?, self.n_train(), DRAW_TRAIN),
        }
    }

    fn extrap_scm(&self, point: &GridPoint, seed: u64) -> Result<ScmExtrapConfig> {
        let PointKind::Extrap { gamma, d, rho, sigma_x } = point.kind else {
            return Err(Error::InvalidConfig("not an extrapolation grid point".into()));
        };
        let mut scm = if self.experiment == ExperimentId::ExtrapndFig4 {
            ScmExtrapConfig::multi_dim(d, seed)
        } else {
            ScmExtrapConfig::one_dim(gamma, seed)
        };
        if let Some(rho) = rho {
            scm = scm.with_confounding(rho);
        }
        scm = scm.with_noise(sigma_x);
        scm.validate()?;
        Ok(scm)
    }

    /// Runs the λ heuristic on the first repetition of one grid point.
    pub fn choose_lambda_at(&self, point: &GridPoint) -> Result<LambdaChoice> {
        let data = self.training_data(point, 0)?;
        choose_lambda(&self.lambda_grid, self.cutoff, data.observed(), point.kind.latent_dim(), &self.autoencoder, self.job_seed(point.index, 0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointKind {
    Unmix { d: usize, alpha: f64 },
    Extrap { gamma: f64, d: usize, rho: Option<f64>, sigma_x: f64 },
}

impl PointKind {
    pub fn latent_dim(&self) -> usize {
        match *self {
            PointKind::Unmix { d, .. } | PointKind::Extrap { d, .. } => d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub kind: PointKind,
}

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn text(s: &str) -> Self {
        Cell::Text(s.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Float(x) => Some(x),
            Cell::Int(i) => Some(i as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn write(&self, out: &mut String) {
        match self {
            Cell::Float(x) if x.is_finite() => write!(out, "{x:.16e}").unwrap(),
            Cell::Float(x) => write!(out, "{x}").unwrap(),
            Cell::Int(i) => write!(out, "{i}").unwrap(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => write!(out, "\"{}\"", s.replace('"', "\"\"")).unwrap(),
            Cell::Text(s) => out.push_str(s),
            Cell::Empty => {}
        }
    }
}

/// Header plus rows; rows are kept in (grid point, repetition, in-job) order.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new<S: AsRef<str>>(name: &str, header: &[S]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                c.write(&mut out);
            }
            out.push('\n');
        }
        out
    }
}

/// `a_*, x_*, y` and, with `with_hidden`, `z_*, v_*, u`. Absent blocks
/// (no outcome in the unmixing study) are omitted.
pub fn dataset_table(name: &str, data: &Dataset, with_hidden: bool) -> ResultTable {
    let h = data.hidden();
    let mut blocks: Vec<(&str, &DenseMatrix)> = vec![("a", data.a()), ("x", data.x())];
    if let Some(y) = data.y() {
        blocks.push(("y", y));
    }
    if with_hidden {
        blocks.push(("z", &h.z));
        blocks.push(("v", &h.v));
        if let Some(u) = &h.u {
            blocks.push(("u", u));
        }
    }
    let mut header = Vec::new();
    for (p, m) in &blocks {
        if matches!(*p, "y" | "u") && m.cols() == 1 {
            header.push(p.to_string());
        } else {
            header.extend((1..=m.cols()).map(|j| format!("{p}_{j}")));
        }
    }
    let mut t = ResultTable::new(name, &header);
    t.rows = (0..data.n())
        .map(|i| blocks.iter().flat_map(|(_, m)| m.row(i).iter().map(|&v| Cell::Float(v))).collect())
        .collect();
    t
}

/// Tables plus the sidecar document describing how they were produced.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub tables: Vec<ResultTable>,
    pub sidecar: serde_json::Value,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&ResultTable> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// λ used by one grid point plus the heuristic's table when it ran.
#[derive(Clone, Debug)]
struct PointLambda {
    lambda: f64,
    choice: Option<LambdaChoice>,
}

#[derive(Default)]
struct JobRows {
    main: Vec<Vec<Cell>>,
    split: Vec<Vec<Cell>>,
}

fn main_header(e: ExperimentId) -> &'static [&'static str] {
    match e {
        ExperimentId::UnmixFig2 => &["method", "alpha", "dim_z", "rep", "r_squared", "error"],
        ExperimentId::Extrap1dFig3 => &["gamma", "a_star", "method", "rep", "prediction", "truth", "error"],
        ExperimentId::ExtrapndFig4 => &["method", "dim_z", "rep", "mse", "error"],
        ExperimentId::ConfoundFig7 => &["rho", "a_star", "method", "rep", "prediction", "truth", "error"],
        ExperimentId::NoisyxFig8 => &["sigma_x", "a_star", "method", "rep", "prediction", "truth", "error"],
        ExperimentId::LambdaSweep => {
            &["alpha", "dim_z", "rep", "lambda", "reconstruction", "inflation", "r_squared", "selected", "error"]
        }
        ExperimentId::Prop1 => &["regime", "a", "s1", "s2", "difference"],
    }
}

const SPLIT_HEADER: &[&str] = &["setting", "value", "rep", "split", "heldout_mse", "error"];

/// Runs a resolved-or-raw config end to end.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let cfg = config.resolve()?;
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| run_resolved(cfg)),
        None => run_resolved(cfg),
    }
}

fn run_resolved(cfg: ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.experiment == ExperimentId::Prop1 {
        return Ok(run_prop1(cfg));
    }
    let points = cfg.points();
    let needs_choice = cfg.experiment == ExperimentId::LambdaSweep || matches!(cfg.lambda, LambdaSetting::Auto(_));

    // The heuristic runs once per grid point, on the first repetition.
    let lambdas: Vec<Result<PointLambda>> = points
        .par_iter()
        .map(|p| match cfg.lambda {
            _ if needs_choice => cfg.choose_lambda_at(p).map(|c| PointLambda { lambda: c.selected, choice: Some(c) }),
            LambdaSetting::Fixed(l) => Ok(PointLambda { lambda: l, choice: None }),
            LambdaSetting::Auto(_) => unreachable!(),
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..cfg.repetitions).map(move |r| (p, r))).collect();
    let outputs: Vec<JobRows> = jobs
        .par_iter()
        .map(|&(p, rep)| {
            let point = &points[p];
            match &lambdas[p] {
                Ok(pl) => run_job(&cfg, point, rep, pl),
                Err(e) => failed_job(&cfg, point, rep, e),
            }
        })
        .collect();

    let mut main = ResultTable::new(&format!("{}.csv", cfg.experiment.as_str()), main_header(cfg.experiment));
    let mut split = ResultTable::new("split_diagnostic.csv", SPLIT_HEADER);
    for o in outputs {
        main.rows.extend(o.main);
        split.rows.extend(o.split);
    }
    let mut tables = vec![main];
    if cfg.split_fraction.is_some() && cfg.experiment.is_extrap() {
        tables.push(split);
    }

    let selection: Vec<serde_json::Value> = points
        .iter()
        .zip(&lambdas)
        .map(|(p, l)| match l {
            Ok(pl) => json!({
                "point": p,
                "lambda": pl.lambda,
                "baseline_reconstruction": pl.choice.as_ref().map(|c| c.baseline_reconstruction),
                "table": pl.choice.as_ref().map(|c| &c.rows),
            }),
            Err(e) => json!({ "point": p, "error": e.to_string() }),
        })
        .collect();
    let sidecar = sidecar(&cfg, &tables, json!(selection));
    Ok(ExperimentOutput { config: cfg, tables, sidecar })
}

fn sidecar(cfg: &ExperimentConfig, tables: &[ResultTable], lambda_selection: serde_json::Value) -> serde_json::Value {
    json!({
        "experiment": cfg.experiment,
        "master_seed": cfg.master_seed,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "lambda_selection": lambda_selection,
        "tables": tables.iter().map(|t| json!({ "file": t.name, "header": t.header })).collect::<Vec<_>>(),
    })
}

fn err_text<T>(r: &Result<T>) -> Cell {
    match r {
        Ok(_) => Cell::Empty,
        Err(e) => Cell::Text(e.to_string()),
    }
}

fn float_or_nan(r: &Result<f64>) -> Cell {
    Cell::Float(*r.as_ref().unwrap_or(&f64::NAN))
}

fn setting_cells(cfg: &ExperimentConfig, point: &GridPoint) -> Vec<Cell> {
    match (cfg.experiment, point.kind) {
        (ExperimentId::Extrap1dFig3, PointKind::Extrap { gamma, .. }) => vec![Cell::Float(gamma)],
        (ExperimentId::ConfoundFig7, PointKind::Extrap { rho, .. }) => vec![Cell::Float(rho.unwrap_or(0.0))],
        (ExperimentId::NoisyxFig8, PointKind::Extrap { sigma_x, .. }) => vec![Cell::Float(sigma_x)],
        _ => vec![],
    }
}

fn split_setting(cfg: &ExperimentConfig, point: &GridPoint) -> [Cell; 2] {
    let PointKind::Extrap { gamma, d, rho, sigma_x } = point.kind else { unreachable!() };
    match cfg.experiment {
        ExperimentId::ExtrapndFig4 => [Cell::text("dim_z"), Cell::Int(d as u64)],
        ExperimentId::ConfoundFig7 => [Cell::text("rho"), Cell::Float(rho.unwrap_or(0.0))],
        ExperimentId::NoisyxFig8 => [Cell::text("sigma_x"), Cell::Float(sigma_x)],
        _ => [Cell::text("gamma"), Cell::Float(gamma)],
    }
}

/// Rows recording a failure that prevented the whole job from running.
fn failed_job(cfg: &ExperimentConfig, point: &GridPoint, rep: usize, e: &Error) -> JobRows {
    let msg = Cell::Text(e.to_string());
    let r = Cell::Int(rep as u64);
    let mut rows = JobRows::default();
    let methods = cfg.methods.clone().unwrap_or_default();
    match (cfg.experiment, point.kind) {
        (ExperimentId::UnmixFig2, PointKind::Unmix { d, alpha }) => {
            for m in &methods {
                rows.main.push(vec![Cell::text(m), Cell::Float(alpha), Cell::Int(d as u64), r.clone(), Cell::Float(f64::NAN), msg.clone()]);
            }
        }
        (ExperimentId::LambdaSweep, PointKind::Unmix { d, alpha }) => {
            let mut row = vec![Cell::Float(alpha), Cell::Int(d as u64), r.clone()];
            row.extend([Cell::Empty, Cell::Float(f64::NAN), Cell::Float(f64::NAN), Cell::Float(f64::NAN), Cell::Empty, msg.clone()]);
            rows.main.push(row);
        }
        (ExperimentId::ExtrapndFig4, PointKind::Extrap { d, .. }) => {
            for m in &methods {
                rows.main.push(vec![Cell::text(m), Cell::Int(d as u64), r.clone(), Cell::Float(f64::NAN), msg.clone()]);
            }
        }
        _ => {
            for m in &methods {
                let mut row = setting_cells(cfg, point);
                row.extend([Cell::Empty, Cell::text(m), r.clone(), Cell::Float(f64::NAN), Cell::Float(f64::NAN), msg.clone()]);
                rows.main.push(row);
            }
        }
    }
    if cfg.split_fraction.is_some() && cfg.experiment.is_extrap() {
        for s in ["extrapolation", "random"] {
            let mut row = split_setting(cfg, point).to_vec();
            row.extend([r.clone(), Cell::text(s), Cell::Float(f64::NAN), msg.clone()]);
            rows.split.push(row);
        }
    }
    rows
}

fn run_job(cfg: &ExperimentConfig, point: &GridPoint, rep: usize, pl: &PointLambda) -> JobRows {
    // Only the first repetition reuses the heuristic's models; they are the
    // models this job would train anyway, since seeds coincide.
    let reuse = if rep == 0 { pl.choice.as_ref() } else { None };
    let out = match cfg.experiment {
        ExperimentId::UnmixFig2 => unmix_job(cfg, point, rep, pl.lambda, reuse),
        ExperimentId::LambdaSweep => sweep_job(cfg, point, rep, reuse),
        _ => extrap_job(cfg, point, rep, pl.lambda, reuse),
    };
    out.unwrap_or_else(|e| failed_job(cfg, point, rep, &e))
}

fn unmix_job(cfg: &ExperimentConfig, point: &GridPoint, rep: usize, lambda: f64, reuse: Option<&LambdaChoice>) -> Result<JobRows> {
    let PointKind::Unmix { d, alpha } = point.kind else { unreachable!() };
    let seed = cfg.job_seed(point.index, rep);
    let scm = ScmUnmixConfig::random(d, cfg.mixing_dim, alpha, seed);
    let train = sample_unmix(&scm, cfg.n_train(), DRAW_TRAIN);
    let eval = sample_unmix(&scm, cfg.n_train(), DRAW_EVAL);
    let r2 = |m: &AutoencoderModel| r_squared_affine(&m.encode(eval.x()), &eval.hidden().z).map(|w| w.r_squared);
    let ae = &cfg.autoencoder;

    let mut results: Vec<(&str, Result<f64>)> = Vec::new();
    if cfg.runs(AE_MMR) || cfg.runs(AE_VANILLA) {
        let pair = match reuse {
            Some(c) => Ok((c.vanilla.clone(), c.selected_model().clone())),
            None => train_mmr_pair(train.observed(), d, lambda, ae, seed).map(|p| (p.vanilla, p.mmr)),
        };
        for (name, pick) in [(AE_MMR, 1), (AE_VANILLA, 0)] {
            if cfg.runs(name) {
                let r = match &pair {
                    Ok((v, m)) => r2(if pick == 1 { m } else { v }),
                    Err(e) => Err(Error::InvalidConfig(format!("training failed: {e}"))),
                };
                results.push((name, r));
            }
        }
    }
    if cfg.runs(AE_MMR_ORACLE) {
        let r = pretrain_oracle(train.observed(), &train.hidden().z, ae, seed)
            .and_then(|init| train_mmr_from(train.observed(), &init, lambda, ae, seed))
            .and_then(|m| r2(&m));
        results.push((AE_MMR_ORACLE, r));
    }
    let rows = results
        .into_iter()
        .map(|(m, r)| vec![Cell::text(m), Cell::Float(alpha), Cell::Int(d as u64), Cell::Int(rep as u64), float_or_nan(&r), err_text(&r)])
        .collect();
    Ok(JobRows { main: rows, split: vec![] })
}

fn sweep_job(cfg: &ExperimentConfig, point: &GridPoint, rep: usize, reuse: Option<&LambdaChoice>) -> Result<JobRows> {
    let PointKind::Unmix { d, alpha } = point.kind else { unreachable!() };
    let seed = cfg.job_seed(point.index, rep);
    let scm = ScmUnmixConfig::random(d, cfg.mixing_dim, alpha, seed);
    let eval = sample_unmix(&scm, cfg.n_train(), DRAW_EVAL);
    let owned;
    let choice = match reuse {
        Some(c) => c,
        None => {
            let train = sample_unmix(&scm, cfg.n_train(), DRAW_TRAIN);
            owned = choose_lambda(&cfg.lambda_grid, cfg.cutoff, train.observed(), d, &cfg.autoencoder, seed)?;
            &owned
        }
    };
    let r2 = |m: &AutoencoderModel| r_squared_affine(&m.encode(eval.x()), &eval.hidden().z).map(|w| w.r_squared);
    let mut rows = Vec::new();
    let mut push = |lambda: f64, recon: f64, infl: f64, m: &AutoencoderModel| {
        let r = r2(m);
        rows.push(vec![
            Cell::Float(alpha),
            Cell::Int(d as u64),
            Cell::Int(rep as u64),
            Cell::Float(lambda),
            Cell::Float(recon),
            Cell::Float(infl),
            float_or_nan(&r),
            Cell::Int((lambda == choice.selected) as u64),
            err_text(&r),
        ]);
    };
    push(0.0, choice.baseline_reconstruction, 0.0, &choice.vanilla);
    for (row, m) in choice.rows.iter().zip(&choice.models) {
        push(row.lambda, row.reconstruction, row.inflation, m);
    }
    Ok(JobRows { main: rows, split: vec![] })
}

/// Actions at which the interventional mean is evaluated.
fn evaluation_actions(cfg: &ExperimentConfig, point: &GridPoint, seed: u64) -> DenseMatrix {
    let d = point.kind.latent_dim();
    if cfg.experiment == ExperimentId::ExtrapndFig4 {
        RngStream::derived(seed, &[TAG_TEST_POINTS]).uniform_matrix(cfg.test_points, d, -3.0, -1.0)
    } else {
        let (g, m) = (cfg.grid_max, cfg.grid_points);
        DenseMatrix::from_fn(m, 1, |i, _| -g + 2.0 * g * i as f64 / (m - 1) as f64)
    }
}

fn extrap_job(cfg: &ExperimentConfig, point: &GridPoint, rep: usize, lambda: f64, reuse: Option<&LambdaChoice>) -> Result<JobRows> {
    let seed = cfg.job_seed(point.index, rep);
    let scm = cfg.extrap_scm(point, seed)?;
    let d = point.kind.latent_dim();
    let train = sample_extrap(&scm, cfg.n_train(), DRAW_TRAIN)?;
    let y = train.observed().require_y()?;
    let actions = evaluation_actions(cfg, point, seed);
    let truth: Vec<f64> = (0..actions.rows())
        .map(|i| true_do_mean(&scm, actions.row(i), cfg.n_mc, DRAW_TRUTH).map(|t| t.mean))
        .collect::<Result<_>>()?;
    let pcfg = cfg.pipeline();

    let predict_all = |f: &dyn Fn(&[f64]) -> Result<f64>| -> Result<Vec<f64>> { (0..actions.rows()).map(|i| f(actions.row(i))).collect() };
    let rep4ex = || -> Result<Rep4ExModel> {
        match reuse {
            Some(c) => rep4ex_from_encoder(train.observed(), c.selected_model().clone(), &pcfg, seed),
            None => run_rep4ex(train.observed(), d, lambda, &pcfg, seed),
        }
    };
    let mut results: Vec<(&str, Result<Vec<f64>>)> = Vec::new();
    if cfg.runs(REP4EX_CF) {
        results.push((REP4EX_CF, rep4ex().and_then(|m| predict_all(&|a| m.estimate_do(a)))));
    }
    if cfg.runs(REP4EX_CF_ORACLE) {
        results.push((REP4EX_CF_ORACLE, rep4ex_oracle(&train, &pcfg, seed).and_then(|s| predict_all(&|a| s.estimate_do(a)))));
    }
    if cfg.runs(MLP) {
        let r = mlp_baseline(train.a(), y, &actions, &cfg.regressor, seed).map(|(_, p)| p.into_vec());
        results.push((MLP, r));
    }

    let rep_cell = Cell::Int(rep as u64);
    let mut rows = JobRows::default();
    for (method, r) in &results {
        if cfg.experiment == ExperimentId::ExtrapndFig4 {
            let mse = r.as_ref().map(|p| p.iter().zip(&truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64);
            let mse = mse.map_err(|e| Error::InvalidConfig(e.to_string()));
            rows.main.push(vec![Cell::text(method), Cell::Int(d as u64), rep_cell.clone(), float_or_nan(&mse), err_text(&mse)]);
            continue;
        }
        for (i, &t) in truth.iter().enumerate() {
            let mut row = setting_cells(cfg, point);
            let pred = r.as_ref().map(|p| p[i]).map_err(|e| Error::InvalidConfig(e.to_string()));
            row.extend([Cell::Float(actions[(i, 0)]), Cell::text(method), rep_cell.clone(), float_or_nan(&pred), Cell::Float(t), err_text(&pred)]);
            rows.main.push(row);
        }
    }

    if let Some(q) = cfg.split_fraction {
        for (name, split) in [
            ("extrapolation", split_extrapolation_aware(&train, q)),
            ("random", split_random(&train, q, stream_id(&[seed, TAG_SPLIT_RANDOM]))),
        ] {
            let tag = if name == "random" { TAG_SPLIT_RANDOM } else { TAG_SPLIT_EXTRAP };
            let mse = split.and_then(|(tr, te)| heldout_mse(&tr, &te, d, lambda, &pcfg, stream_id(&[seed, tag])));
            let mut row = split_setting(cfg, point).to_vec();
            row.extend([rep_cell.clone(), Cell::text(name), float_or_nan(&mse), err_text(&mse)]);
            rows.split.push(row);
        }
    }
    Ok(rows)
}

/// Mean squared error of `E[Y | X = x, do(A = a)]` on held-out `(a, x, y)`.
fn heldout_mse(train: &Dataset, test: &Dataset, d: usize, lambda: f64, cfg: &PipelineConfig, seed: u64) -> Result<f64> {
    let model = run_rep4ex(train.observed(), d, lambda, cfg, seed)?;
    let y = test.observed().require_y()?;
    let omega = model.autoencoder.encode(test.x());
    let mut sse = 0.0;
    for i in 0..test.n() {
        let w = omega.select_rows(&[i]);
        let p = model.stage.estimate_do_given_omega(&w, test.a().row(i))?;
        sse += (p[(0, 0)] - y[(i, 0)]).powi(2);
    }
    Ok(sse / test.n() as f64)
}

/// Midpoint grids of 50 actions inside `(0, 1)` and `(−3, −2)`.
pub const PROP1_GRID: usize = 50;

fn run_prop1(cfg: ExperimentConfig) -> ExperimentOutput {
    let mut grid = ResultTable::new("prop1.csv", main_header(ExperimentId::Prop1));
    let obs = prop1::observational_table(&prop1::midpoint_grid(0.0, 1.0, PROP1_GRID)).expect("grid inside (0, 1)");
    let int = prop1::interventional_table(&prop1::midpoint_grid(-3.0, -2.0, PROP1_GRID));
    for (regime, rows) in [("observational", obs), ("interventional", int)] {
        for r in rows {
            grid.rows.push(vec![Cell::text(regime), Cell::Float(r.a), Cell::Float(r.s1), Cell::Float(r.s2), Cell::Float(r.difference())]);
        }
    }
    let mut mc = ResultTable::new("prop1_mc.csv", &["scm", "regime", "a", "mc_mean", "mc_std_error", "exact", "z_score"]);
    for c in prop1::mc_checks(cfg.prop1_samples, stream_id(&[cfg.master_seed, TAG_PROP1])) {
        let (regime, a) = match c.a {
            Some(a) => ("interventional", Cell::Float(a)),
            None => ("observational", Cell::Empty),
        };
        mc.rows.push(vec![
            Cell::text(c.which.label()),
            Cell::text(regime),
            a,
            Cell::Float(c.estimate.mean),
            Cell::Float(c.estimate.std_error),
            Cell::Float(c.exact),
            Cell::Float(c.z_score()),
        ]);
    }
    let mass: Vec<f64> = Which::BOTH.iter().map(|&w| prop1::quadrature_mass(w, f64::NEG_INFINITY, f64::INFINITY, 1e-13)).collect();
    let tables = vec![grid, mc];
    let mut side = sidecar(&cfg, &tables, serde_json::Value::Null);
    side["total_mass_quadrature"] = json!(mass);
    side["note"] = json!(prop1::TAIL_BOUND_NOTE);
    ExperimentOutput { config: cfg, tables, sidecar: side }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(e: ExperimentId) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(e);
        let t = TrainConfig { epochs: 2, batch_size: 64, hidden: vec![8], ..Default::default() };
        c.autoencoder = t.clone();
        c.regressor = t;
        c.repetitions = 2;
        c.n = Some(200);
        c.n_mc = MIN_DO_SAMPLES;
        c.grid_points = 5;
        c.test_points = 3;
        c.lambda_grid = vec![10.0, 1.0];
        c
    }

    #[test]
    fn ids_round_trip_through_serde_and_str() {
        for e in ExperimentId::ALL {
            let s = serde_json::to_value(e).unwrap();
            assert_eq!(s.as_str().unwrap(), e.as_str());
            assert_eq!(e.as_str().parse::<ExperimentId>().unwrap(), e);
        }
    }

    #[test]
    fn lambda_setting_parses_both_forms() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"experiment":"unmix-fig2","lambda":"auto"}"#).unwrap();
        assert!(matches!(c.lambda, LambdaSetting::Auto(_)));
        let c: ExperimentConfig = serde_json::from_str(r#"{"experiment":"unmix-fig2","lambda":100}"#).unwrap();
        assert_eq!(c.lambda, LambdaSetting::Fixed(100.0));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment":"unmix-fig2","lambda":"big"}"#).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ExperimentConfig::from_json(r#"{"experiment":"prop1","repetitons":3}"#).unwrap_err();
        assert!(err.to_string().contains("repetitons"), "{err}");
    }

    #[test]
    fn defaults_resolve_per_experiment() {
        let c = ExperimentConfig::new(ExperimentId::UnmixFig2).resolve().unwrap();
        assert_eq!(c.alphas.as_deref(), Some(&[0.5, 1.0, 2.0, 5.0][..]));
        assert_eq!(c.dims.as_deref(), Some(&[2, 4][..]));
        assert_eq!(c.n, Some(1000));
        assert_eq!(c.points().len(), 8);
        let c = ExperimentConfig::new(ExperimentId::ConfoundFig7).resolve().unwrap();
        assert_eq!(c.points().len(), 4);
        assert_eq!(c.n, Some(10_000));
        assert_eq!(ExperimentConfig::new(ExperimentId::ExtrapndFig4).resolve().unwrap().points().len(), 3);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = ExperimentConfig::new(ExperimentId::UnmixFig2);
        c.repetitions = 0;
        assert!(matches!(c.resolve(), Err(Error::InvalidConfig(_))));
        let mut c = ExperimentConfig::new(ExperimentId::ConfoundFig7);
        c.rhos = Some(vec![]);
        assert!(c.resolve().is_err());
        let mut c = ExperimentConfig::new(ExperimentId::Extrap1dFig3);
        c.methods = Some(vec![AE_MMR.into()]);
        assert!(c.resolve().is_err());
        let mut c = ExperimentConfig::new(ExperimentId::UnmixFig2);
        c.lambda_grid = vec![1.0, 10.0];
        assert!(c.resolve().is_err());
    }

    #[test]
    fn job_seeds_distinct() {
        let c = ExperimentConfig::new(ExperimentId::UnmixFig2);
        let mut seeds: Vec<u64> = (0..4).flat_map(|p| (0..5).map(move |r| (p, r))).map(|(p, r)| c.job_seed(p, r)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 20);
    }

    #[test]
    fn csv_cells_round_trip() {
        let mut t = ResultTable::new("t.csv", &["x", "msg"]);
        let x = 0.1 + 0.2;
        t.rows.push(vec![Cell::Float(x), Cell::text("a, \"b\"")]);
        let csv = t.to_csv();
        let line = csv.lines().nth(1).unwrap();
        let (num, msg) = line.split_once(',').unwrap();
        assert_eq!(num.parse::<f64>().unwrap().to_bits(), x.to_bits());
        assert_eq!(msg, "\"a, \"\"b\"\"\"");
    }

    #[test]
    fn tiny_unmix_run_has_expected_shape() {
        let mut c = tiny(ExperimentId::UnmixFig2);
        c.alphas = Some(vec![1.0]);
        c.dims = Some(vec![2]);
        let out = run_experiment(&c).unwrap();
        let t = &out.tables[0];
        assert_eq!(t.header, main_header(ExperimentId::UnmixFig2).to_vec());
        assert_eq!(t.rows.len(), 2 * 3);
        assert!(t.rows.iter().all(|r| r[5] == Cell::Empty && r[4].as_f64().unwrap().is_finite()));
        assert!(out.sidecar["lambda_selection"][0]["table"].is_array());
    }

    #[test]
    fn sweep_marks_each_repetitions_own_selection() {
        let mut c = tiny(ExperimentId::LambdaSweep);
        c.alphas = Some(vec![1.0]);
        c.dims = Some(vec![2]);
        c.repetitions = 4;
        let out = run_experiment(&c).unwrap();
        let t = &out.tables[0];
        for rep in 0..4u64 {
            let rows: Vec<&Vec<Cell>> = t.rows.iter().filter(|r| r[2] == Cell::Int(rep) && r[3].as_f64() != Some(0.0)).collect();
            let table: Vec<crate::pipeline::LambdaRow> = rows
                .iter()
                .map(|r| crate::pipeline::LambdaRow { lambda: r[3].as_f64().unwrap(), reconstruction: r[4].as_f64().unwrap(), inflation: r[5].as_f64().unwrap() })
                .collect();
            let want = crate::pipeline::select_lambda(&table, c.cutoff);
            let marked: Vec<f64> = rows.iter().filter(|r| r[7] == Cell::Int(1)).map(|r| r[3].as_f64().unwrap()).collect();
            assert_eq!(marked, vec![want], "rep {rep}");
        }
    }

    #[test]
    fn reused_first_repetition_matches_fresh_training() {
        let mut c = tiny(ExperimentId::UnmixFig2);
        c.alphas = Some(vec![2.0]);
        c.dims = Some(vec![2]);
        c.repetitions = 1;
        c.methods = Some(vec![AE_MMR.into()]);
        let auto = run_experiment(&c).unwrap();
        let lambda = auto.sidecar["lambda_selection"][0]["lambda"].as_f64().unwrap();
        c.lambda = LambdaSetting::Fixed(lambda);
        let fixed = run_experiment(&c).unwrap();
        assert_eq!(auto.tables[0].rows, fixed.tables[0].rows);
    }

    #[test]
    fn tiny_extrap_run_is_deterministic_and_complete() {
        let mut c = tiny(ExperimentId::Extrap1dFig3);
        c.gammas = Some(vec![1.2]);
        c.lambda = LambdaSetting::Fixed(1.0);
        c.split_fraction = Some(0.2);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.tables[0].to_csv(), b.tables[0].to_csv());
        assert_eq!(a.tables[0].rows.len(), 2 * 2 * 5);
        assert_eq!(a.tables[1].rows.len(), 2 * 2);
        assert_eq!(a.sidecar, b.sidecar);
    }

    #[test]
    fn tables_do_not_depend_on_thread_count() {
        let mut c = tiny(ExperimentId::Extrap1dFig3);
        c.gammas = Some(vec![1.2]);
        c.lambda = LambdaSetting::default();
        c.repetitions = 3;
        c.threads = Some(1);
        let a = run_experiment(&c).unwrap();
        c.threads = Some(3);
        let b = run_experiment(&c).unwrap();
        for (x, y) in a.tables.iter().zip(&b.tables) {
            assert_eq!(x.to_csv(), y.to_csv(), "{}", x.name);
        }
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut c = tiny(ExperimentId::ExtrapndFig4);
        c.dims = Some(vec![2]);
        c.lambda = LambdaSetting::Fixed(1.0);
        c.repetitions = 1;
        c.n = Some(10);
        c.autoencoder.batch_size = 2; // every batch is shorter than k + 2
        let out = run_experiment(&c).unwrap();
        let t = &out.tables[0];
        let err = t.column("error").unwrap();
        let rep = t.rows.iter().find(|r| r[0].as_str() == Some(REP4EX_CF)).unwrap();
        assert!(rep[3].as_f64().unwrap().is_nan());
        assert!(rep[err].as_str().is_some());
    }

    #[test]
    fn dataset_table_columns() {
        let c = ExperimentConfig::new(ExperimentId::Extrap1dFig3).resolve().unwrap();
        let mut c = c;
        c.n = Some(20);
        let p = c.points()[0];
        let ds = c.training_data(&p, 0).unwrap();
        let t = dataset_table("d.csv", &ds, true);
        assert_eq!(t.header, ["a_1", "x_1", "x_2", "y", "z_1", "v_1", "u"]);
        assert_eq!(t.rows.len(), 20);
        assert_eq!(dataset_table("d.csv", &ds, false).header.len(), 4);
    }

    #[test]
    fn prop1_tables() {
        let mut c = ExperimentConfig::new(ExperimentId::Prop1);
        c.prop1_samples = 10_000;
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.tables[0].rows.len(), 2 * PROP1_GRID);
        assert_eq!(out.tables[1].rows.len(), 6);
        assert!(out.sidecar["note"].as_str().unwrap().contains("1/12"));
    }
}
