//! Fitting parameterized transition models.
//!
//! A model is a row-softmax over logits. [`ModelClass::Full`] has one free
//! logit vector per `(s, a)` and can represent any strictly positive kernel.
//! [`ModelClass::RankLimited`] mixes `rank` shared basis rows with per-`(s, a)`
//! mixture weights so a true kernel may be out of reach.
//!
//! Training is gradient descent on the summed per-cell loss. The KL gradient is
//! analytic for the full class; every other gradient is a central finite
//! difference. Each step backtracks until the loss does not increase.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{kernel_lipschitz, FiniteMdp, MdpError, TransitionTensor};
use crate::metric::MetricSpace;
use crate::planner::{evaluate_policy, greedy_policy, gvi, BackupOperator, GviConfig, PlannerError};
use crate::rng::seeded;
use crate::transport::{kl_divergence, wasserstein_dual, wasserstein_primal, Distribution, TransportError};
use crate::vaml::{theorem_bound, VamlError};

/// Maximum number of step halvings per iteration.
pub const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("model shape ({got_n}, {got_m}) does not match the MDP ({n}, {m})")]
    Shape { n: usize, m: usize, got_n: usize, got_m: usize },
    #[error("parameter vector has {got} entries, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("invalid loss kind `{0}` (expected kl, wasserstein or vaml:<c >= 0>)")]
    BadKind(String),
    #[error("invalid fit configuration: {0}")]
    BadConfig(String),
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("cannot initialise logits from a kernel with a zero entry at ({s}, {a}, {next})")]
    ZeroProbability { s: usize, a: usize, next: usize },
    #[error("no loss kinds to compare")]
    NoKinds,
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Vaml(#[from] VamlError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelClass {
    Full,
    RankLimited { rank: usize },
}

impl ModelClass {
    pub fn num_params(self, n: usize, m: usize) -> usize {
        match self {
            Self::Full => n * m * n,
            Self::RankLimited { rank } => rank * n + n * m * rank,
        }
    }
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

fn to_distribution(p: Vec<f64>) -> Distribution {
    Distribution::normalized(p).expect("softmax rows are finite and positive")
}

/// Logits of a softmax transition model.
///
/// Layout for `Full`: logit of `s'` for `(s, a)` at `(s*m + a)*n + s'`.
/// Layout for `RankLimited`: `rank` basis rows of `n` logits, then `rank`
/// mixture logits per `(s, a)` in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub m: usize,
    pub class: ModelClass,
    pub theta: Vec<f64>,
}

impl ModelParams {
    pub fn new(n: usize, m: usize, class: ModelClass, theta: Vec<f64>) -> Result<Self, LearnerError> {
        if n == 0 || m == 0 {
            return Err(LearnerError::BadConfig("model needs at least one state and one action".into()));
        }
        if let ModelClass::RankLimited { rank: 0 } = class {
            return Err(LearnerError::BadConfig("rank must be at least 1".into()));
        }
        let expected = class.num_params(n, m);
        if theta.len() != expected {
            return Err(LearnerError::ParamLength { expected, got: theta.len() });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(LearnerError::BadConfig("logits must be finite".into()));
        }
        Ok(Self { n, m, class, theta })
    }

    /// All-zero logits, that is uniform rows.
    pub fn uniform(n: usize, m: usize, class: ModelClass) -> Result<Self, LearnerError> {
        Self::new(n, m, class, vec![0.0; class.num_params(n, m)])
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random(n: usize, m: usize, class: ModelClass, scale: f64, seed: u64) -> Result<Self, LearnerError> {
        let mut rng = seeded(seed);
        let theta = (0..class.num_params(n, m)).map(|_| rng.gen_range(-1.0..=1.0) * scale).collect();
        Self::new(n, m, class, theta)
    }

    /// Full-class logits `ln T`, which reproduce a strictly positive `T` exactly
    /// up to rounding.
    pub fn from_transition(t: &TransitionTensor) -> Result<Self, LearnerError> {
        let (n, m) = (t.states(), t.actions());
        let mut theta = Vec::with_capacity(n * m * n);
        for s in 0..n {
            for a in 0..m {
                for (next, &p) in t.row(s, a).iter().enumerate() {
                    if p <= 0.0 {
                        return Err(LearnerError::ZeroProbability { s, a, next });
                    }
                    theta.push(p.ln());
                }
            }
        }
        Self::new(n, m, ModelClass::Full, theta)
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    fn basis(&self, rank: usize) -> Vec<Vec<f64>> {
        (0..rank).map(|k| softmax(&self.theta[k * self.n..(k + 1) * self.n])).collect()
    }

    fn rank_row(&self, rank: usize, basis: &[Vec<f64>], s: usize, a: usize) -> Vec<f64> {
        let off = rank * self.n + (s * self.m + a) * rank;
        let w = softmax(&self.theta[off..off + rank]);
        let mut row = vec![0.0; self.n];
        for (wk, bk) in w.iter().zip(basis) {
            for (r, b) in row.iter_mut().zip(bk) {
                *r += wk * b;
            }
        }
        row
    }

    pub fn row(&self, s: usize, a: usize) -> Distribution {
        match self.class {
            ModelClass::Full => {
                let off = (s * self.m + a) * self.n;
                to_distribution(softmax(&self.theta[off..off + self.n]))
            }
            ModelClass::RankLimited { rank } => to_distribution(self.rank_row(rank, &self.basis(rank), s, a)),
        }
    }

    pub fn transition(&self) -> TransitionTensor {
        let rows = match self.class {
            ModelClass::Full => (0..self.n * self.m)
                .map(|k| to_distribution(softmax(&self.theta[k * self.n..(k + 1) * self.n])))
                .collect(),
            ModelClass::RankLimited { rank } => {
                let basis = self.basis(rank);
                (0..self.n)
                    .flat_map(|s| (0..self.m).map(move |a| (s, a)))
                    .map(|(s, a)| to_distribution(self.rank_row(rank, &basis, s, a)))
                    .collect()
            }
        };
        TransitionTensor::new(self.n, self.m, rows).expect("rows have the model shape")
    }
}

/// Per-cell divergence between `T(·|s,a)` and `T̂(·|s,a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LossKind {
    /// `KL(T ‖ T̂)`
    Kl,
    /// `W(T, T̂)` by the primal coupling LP.
    Wasserstein,
    /// `(c · W(T, T̂))²` by the dual LP over the `c`-Lipschitz ball.
    Vaml(f64),
}

impl LossKind {
    pub fn vaml(c: f64) -> Result<Self, LearnerError> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(LearnerError::BadKind(format!("vaml:{c}")));
        }
        Ok(Self::Vaml(c))
    }

    pub fn cell_loss(self, p: &Distribution, q: &Distribution, space: &MetricSpace) -> Result<f64, LearnerError> {
        Ok(match self {
            Self::Kl => kl_divergence(p, q)?,
            Self::Wasserstein => wasserstein_primal(p, q, space)?.cost,
            Self::Vaml(c) if c == 0.0 => 0.0,
            Self::Vaml(c) => wasserstein_dual(p, q, space, c)?.value.powi(2),
        })
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kl => write!(f, "kl"),
            Self::Wasserstein => write!(f, "wasserstein"),
            Self::Vaml(c) => write!(f, "vaml:{c}"),
        }
    }
}

impl FromStr for LossKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "kl" => Ok(Self::Kl),
            "wasserstein" | "w" => Ok(Self::Wasserstein),
            _ => match t.strip_prefix("vaml:") {
                Some(c) => c.trim().parse::<f64>().map_err(|_| LearnerError::BadKind(s.into())).and_then(Self::vaml),
                None => Err(LearnerError::BadKind(s.into())),
            },
        }
    }
}

impl TryFrom<String> for LossKind {
    type Error = LearnerError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LossKind> for String {
    fn from(k: LossKind) -> Self {
        k.to_string()
    }
}

fn check_shape(mdp: &FiniteMdp, model: &ModelParams) -> Result<(), LearnerError> {
    if (model.n, model.m) != (mdp.states(), mdp.actions()) {
        return Err(LearnerError::Shape { n: mdp.states(), m: mdp.actions(), got_n: model.n, got_m: model.m });
    }
    Ok(())
}

/// Per-cell losses in `(s, a)` row-major order.
pub fn cell_losses(mdp: &FiniteMdp, that: &TransitionTensor, kind: LossKind) -> Result<Vec<f64>, LearnerError> {
    let t = mdp.transition();
    let mut out = Vec::with_capacity(mdp.states() * mdp.actions());
    for s in 0..mdp.states() {
        for a in 0..mdp.actions() {
            out.push(kind.cell_loss(t.row(s, a), that.row(s, a), mdp.space())?);
        }
    }
    Ok(out)
}

/// Unweighted mean of the per-cell losses.
pub fn aggregate_loss(mdp: &FiniteMdp, model: &ModelParams, kind: LossKind) -> Result<f64, LearnerError> {
    check_shape(mdp, model)?;
    let cells = cell_losses(mdp, &model.transition(), kind)?;
    Ok(cells.iter().sum::<f64>() / cells.len() as f64)
}

fn summed_loss(mdp: &FiniteMdp, model: &ModelParams, kind: LossKind) -> Result<f64, LearnerError> {
    Ok(cell_losses(mdp, &model.transition(), kind)?.iter().sum())
}

/// Gradient of the summed KL loss for the full class: `q − p` per row.
pub fn analytic_kl_gradient(mdp: &FiniteMdp, model: &ModelParams) -> Result<Vec<f64>, LearnerError> {
    check_shape(mdp, model)?;
    if model.class != ModelClass::Full {
        return Err(LearnerError::BadConfig("analytic KL gradient needs the full model class".into()));
    }
    let n = model.n;
    let mut g = Vec::with_capacity(model.num_params());
    for s in 0..mdp.states() {
        for a in 0..mdp.actions() {
            let p = mdp.transition().row(s, a);
            let q = model.row(s, a);
            g.extend((0..n).map(|j| q[j] - p[j]));
        }
    }
    Ok(g)
}

/// Central finite-difference gradient of the summed loss.
///
/// For the full class a logit only moves its own row, so only that cell is
/// re-evaluated.
pub fn finite_difference_gradient(
    mdp: &FiniteMdp,
    model: &ModelParams,
    kind: LossKind,
    eps: f64,
) -> Result<Vec<f64>, LearnerError> {
    check_shape(mdp, model)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(LearnerError::BadConfig(format!("fd_epsilon must be positive, got {eps}")));
    }
    let mut g = vec![0.0; model.num_params()];
    match model.class {
        ModelClass::Full => {
            let n = model.n;
            let mut logits = vec![0.0; n];
            let mut probs = vec![0.0; n];
            for cell in 0..mdp.states() * mdp.actions() {
                let (s, a) = (cell / mdp.actions(), cell % mdp.actions());
                let p = mdp.transition().row(s, a);
                let off = cell * n;
                let mut eval = |logits: &[f64]| -> Result<f64, LearnerError> {
                    softmax_into(logits, &mut probs);
                    kind.cell_loss(p, &to_distribution(probs.clone()), mdp.space())
                };
                for j in 0..n {
                    logits.copy_from_slice(&model.theta[off..off + n]);
                    logits[j] += eps;
                    let plus = eval(&logits)?;
                    logits[j] -= 2.0 * eps;
                    let minus = eval(&logits)?;
                    g[off + j] = (plus - minus) / (2.0 * eps);
                }
            }
        }
        ModelClass::RankLimited { .. } => {
            let mut probe = model.clone();
            for k in 0..model.num_params() {
                probe.theta[k] = model.theta[k] + eps;
                let plus = summed_loss(mdp, &probe, kind)?;
                probe.theta[k] = model.theta[k] - eps;
                let minus = summed_loss(mdp, &probe, kind)?;
                probe.theta[k] = model.theta[k];
                g[k] = (plus - minus) / (2.0 * eps);
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub iters: usize,
    pub step_size: f64,
    pub seed: u64,
    pub fd_epsilon: f64,
    /// Observer period in iterations; 0 means only the first and last iterate.
    pub log_every: usize,
    pub class: ModelClass,
    /// Half-width of the uniform initial logit distribution.
    pub init_scale: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { iters: 2000, step_size: 0.1, seed: 0, fd_epsilon: 1e-5, log_every: 100, class: ModelClass::Full, init_scale: 0.5 }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<(), LearnerError> {
        if self.iters == 0 {
            return Err(LearnerError::BadConfig("iters must be at least 1".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(LearnerError::BadConfig(format!("step_size must be positive, got {}", self.step_size)));
        }
        if !(self.fd_epsilon > 0.0 && self.fd_epsilon.is_finite()) {
            return Err(LearnerError::BadConfig(format!("fd_epsilon must be positive, got {}", self.fd_epsilon)));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(LearnerError::BadConfig(format!("init_scale must be nonnegative, got {}", self.init_scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub kind: LossKind,
    /// Aggregate loss of the initial iterate followed by one entry per iteration.
    pub loss_curve: Vec<f64>,
    pub final_model: ModelParams,
    pub planning_gap: f64,
    /// Final per-cell losses in `(s, a)` row-major order.
    pub final_losses: Vec<f64>,
}

impl TrainReport {
    pub fn loss_curve_csv(&self) -> String {
        let mut out = String::from("iteration,loss\n");
        for (i, l) in self.loss_curve.iter().enumerate() {
            out.push_str(&format!("{i},{l:e}\n"));
        }
        out
    }
}

/// `‖V* − V^π̂‖∞` on the true MDP, where `π̂` is greedy for max-backup value
/// iteration on the model and `V*` is the exact value of the greedy policy of
/// max-backup value iteration on the true MDP.
pub fn planning_gap(mdp: &FiniteMdp, that: &TransitionTensor) -> Result<f64, LearnerError> {
    let cfg = GviConfig::default();
    let model_mdp = mdp.with_transition(that.clone())?;
    let pi_hat = greedy_policy(&gvi(&model_mdp, BackupOperator::Max, &cfg)?.q);
    let pi_star = greedy_policy(&gvi(mdp, BackupOperator::Max, &cfg)?.q);
    let v_hat = evaluate_policy(mdp, &pi_hat)?;
    let v_star = evaluate_policy(mdp, &pi_star)?;
    Ok(v_star.iter().zip(v_hat.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

pub fn fit_model(mdp: &FiniteMdp, kind: LossKind, cfg: &FitConfig) -> Result<TrainReport, LearnerError> {
    fit_model_observed(mdp, kind, cfg, |_, _| {})
}

/// Like [`fit_model`], calling `observe(k, &model_k)` at `k = 0`, every
/// `log_every` iterations and at the final iterate.
pub fn fit_model_observed(
    mdp: &FiniteMdp,
    kind: LossKind,
    cfg: &FitConfig,
    mut observe: impl FnMut(usize, &ModelParams),
) -> Result<TrainReport, LearnerError> {
    cfg.validate()?;
    let cells = (mdp.states() * mdp.actions()) as f64;
    let mut model = ModelParams::random(mdp.states(), mdp.actions(), cfg.class, cfg.init_scale, cfg.seed)?;
    let mut loss = summed_loss(mdp, &model, kind)?;
    if !loss.is_finite() {
        return Err(LearnerError::NonFiniteLoss { iteration: 0 });
    }
    let mut curve = Vec::with_capacity(cfg.iters + 1);
    curve.push(loss / cells);
    observe(0, &model);
    let mut trial = model.clone();
    for it in 1..=cfg.iters {
        let grad = match (kind, model.class) {
            (LossKind::Kl, ModelClass::Full) => analytic_kl_gradient(mdp, &model)?,
            _ => finite_difference_gradient(mdp, &model, kind, cfg.fd_epsilon)?,
        };
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(LearnerError::NonFiniteLoss { iteration: it });
        }
        let mut step = cfg.step_size;
        for _ in 0..MAX_BACKTRACKS {
            for ((t, &x), &g) in trial.theta.iter_mut().zip(&model.theta).zip(&grad) {
                *t = x - step * g;
            }
            let next = summed_loss(mdp, &trial, kind)?;
            if !next.is_finite() {
                return Err(LearnerError::NonFiniteLoss { iteration: it });
            }
            if next <= loss {
                std::mem::swap(&mut model, &mut trial);
                loss = next;
                break;
            }
            step *= 0.5;
        }
        curve.push(loss / cells);
        if it == cfg.iters || (cfg.log_every > 0 && it % cfg.log_every == 0) {
            observe(it, &model);
        }
    }
    let that = model.transition();
    let final_losses = cell_losses(mdp, &that, kind)?;
    let planning_gap = planning_gap(mdp, &that)?;
    Ok(TrainReport { kind, loss_curve: curve, final_model: model, planning_gap, final_losses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Loss the model was trained on.
    pub trained_on: LossKind,
    /// Aggregate loss of this model under every compared kind, in input order.
    pub cross_losses: Vec<f64>,
    /// Per-cell losses under every compared kind, in input order.
    pub cell_losses: Vec<Vec<f64>>,
    pub planning_gap: f64,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub kinds: Vec<LossKind>,
    pub rows: Vec<ComparisonRow>,
    /// Lipschitz radius from the theorem bound; `None` when `γ K_W ≥ 1`.
    pub theorem_c: Option<f64>,
    /// `γ K_W(T)`
    pub contraction: f64,
}

impl Comparison {
    /// One row per trained model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trained_on,planning_gap,final_train_loss");
        for k in &self.kinds {
            out.push_str(&format!(",loss_{k}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{:e},{:e}", r.trained_on, r.planning_gap, r.final_train_loss));
            for l in &r.cross_losses {
                out.push_str(&format!(",{l:e}"));
            }
            out.push('\n');
        }
        out
    }

    /// Rows are trained kinds, columns are evaluated kinds.
    pub fn cross_matrix_csv(&self) -> String {
        let mut out = String::from("trained_on\\evaluated");
        for k in &self.kinds {
            out.push_str(&format!(",{k}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.trained_on.to_string());
            for l in &r.cross_losses {
                out.push_str(&format!(",{l:e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Trains one model per kind under the same configuration and evaluates every
/// model under every kind.
pub fn compare_losses(mdp: &FiniteMdp, kinds: &[LossKind], cfg: &FitConfig) -> Result<Comparison, LearnerError> {
    if kinds.is_empty() {
        return Err(LearnerError::NoKinds);
    }
    let contraction = mdp.gamma() * kernel_lipschitz(mdp)?.constant;
    let theorem_c = match theorem_bound(mdp) {
        Ok(b) => Some(b.c.value()),
        Err(VamlError::NotContracting { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mut rows = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let report = fit_model(mdp, kind, cfg)?;
        let that = report.final_model.transition();
        let mut cross_losses = Vec::with_capacity(kinds.len());
        let mut per_cell = Vec::with_capacity(kinds.len());
        for &eval in kinds {
            let cells = cell_losses(mdp, &that, eval)?;
            cross_losses.push(cells.iter().sum::<f64>() / cells.len() as f64);
            per_cell.push(cells);
        }
        rows.push(ComparisonRow {
            trained_on: kind,
            cross_losses,
            cell_losses: per_cell,
            planning_gap: report.planning_gap,
            final_train_loss: *report.loss_curve.last().expect("curve has the initial entry"),
        });
    }
    Ok(Comparison { kinds: kinds.to_vec(), rows, theorem_c, contraction })
}
