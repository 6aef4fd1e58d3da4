//! Finite MDPs on a metric state space.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{uniform_lipschitz_constant, MetricError, MetricSpace, UniformLipschitzReport};
use crate::rng;
use crate::transport::{wasserstein_primal, Distribution, TransportError};

/// Row-sum tolerance applied to transition rows read from files.
pub const FILE_ROW_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("cannot read or write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid MDP JSON at `{path}`: {message}")]
    Json { path: String, message: String },
    #[error("{what}: expected {expected} entries, got {got}")]
    Shape { what: String, expected: usize, got: usize },
    #[error("transition[{s}][{a}] is not a distribution: {source}")]
    BadRow { s: usize, a: usize, source: TransportError },
    #[error("reward[{s}][{a}] is not finite")]
    NonFiniteReward { s: usize, a: usize },
    #[error("gamma must lie in [0, 1), got {0}")]
    BadGamma(f64),
    #[error("an MDP needs at least one action")]
    NoActions,
    #[error("invalid generator parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Next-state distributions for every `(s, a)`, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTensor {
    n: usize,
    m: usize,
    rows: Vec<Distribution>,
}

impl TransitionTensor {
    pub fn new(n: usize, m: usize, rows: Vec<Distribution>) -> Result<Self, MdpError> {
        if rows.len() != n * m {
            return Err(MdpError::Shape { what: "transition rows".into(), expected: n * m, got: rows.len() });
        }
        for (k, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(MdpError::Shape {
                    what: format!("transition[{}][{}]", k / m, k % m),
                    expected: n,
                    got: r.len(),
                });
            }
        }
        Ok(Self { n, m, rows })
    }

    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> Distribution) -> Result<Self, MdpError> {
        let rows = (0..n).flat_map(|s| (0..m).map(move |a| (s, a))).map(|(s, a)| f(s, a)).collect();
        Self::new(n, m, rows)
    }

    pub fn states(&self) -> usize {
        self.n
    }

    pub fn actions(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &Distribution {
        &self.rows[s * self.m + a]
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    /// `Σ_{s'} T(s'|s, a) v(s')`.
    pub fn expectation(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.row(s, a).iter().zip(v).map(|(p, x)| p * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    space: MetricSpace,
    actions: usize,
    reward: Vec<f64>,
    transition: TransitionTensor,
    gamma: f64,
}

impl FiniteMdp {
    /// `reward[s][a]`; `transition` must share the state count of `space`.
    pub fn new(
        space: MetricSpace,
        reward: Vec<Vec<f64>>,
        transition: TransitionTensor,
        gamma: f64,
    ) -> Result<Self, MdpError> {
        let n = space.len();
        let m = transition.actions();
        if m == 0 {
            return Err(MdpError::NoActions);
        }
        if transition.states() != n {
            return Err(MdpError::Shape { what: "transition states".into(), expected: n, got: transition.states() });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(MdpError::BadGamma(gamma));
        }
        if reward.len() != n {
            return Err(MdpError::Shape { what: "reward".into(), expected: n, got: reward.len() });
        }
        let mut flat = Vec::with_capacity(n * m);
        for (s, row) in reward.into_iter().enumerate() {
            if row.len() != m {
                return Err(MdpError::Shape { what: format!("reward[{s}]"), expected: m, got: row.len() });
            }
            if let Some(a) = row.iter().position(|r| !r.is_finite()) {
                return Err(MdpError::NonFiniteReward { s, a });
            }
            flat.extend(row);
        }
        Ok(Self { space, actions: m, reward: flat, transition, gamma })
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn states(&self) -> usize {
        self.space.len()
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.actions + a]
    }

    pub fn reward_rows(&self) -> Vec<Vec<f64>> {
        self.reward.chunks(self.actions).map(<[f64]>::to_vec).collect()
    }

    /// Rewards of action `a` as a function of the state.
    pub fn reward_column(&self, a: usize) -> Vec<f64> {
        (0..self.states()).map(|s| self.reward(s, a)).collect()
    }

    pub fn transition(&self) -> &TransitionTensor {
        &self.transition
    }

    /// Same states, actions, rewards and discount with another kernel.
    pub fn with_transition(&self, transition: TransitionTensor) -> Result<Self, MdpError> {
        Self::new(self.space.clone(), self.reward_rows(), transition, self.gamma)
    }

    /// Adds `shift` to every reward.
    pub fn with_reward_shift(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.reward.iter_mut().for_each(|r| *r += shift);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelLipschitzReport {
    pub constant: f64,
    pub action: usize,
    pub witness: (usize, usize),
}

/// Uniform Lipschitz constant of the reward columns over the state metric.
pub fn reward_lipschitz(mdp: &FiniteMdp) -> UniformLipschitzReport {
    let cols: Vec<Vec<f64>> = (0..mdp.actions()).map(|a| mdp.reward_column(a)).collect();
    uniform_lipschitz_constant(&cols, mdp.space()).expect("reward columns match the state space")
}

/// `max_a max_{s₁≠s₂} W(T(·|s₁,a), T(·|s₂,a)) / d(s₁, s₂)` with exact primal W.
pub fn kernel_lipschitz(mdp: &FiniteMdp) -> Result<KernelLipschitzReport, MdpError> {
    kernel_lipschitz_of(mdp.transition(), mdp.space())
}

pub fn kernel_lipschitz_of(t: &TransitionTensor, space: &MetricSpace) -> Result<KernelLipschitzReport, MdpError> {
    let n = t.states();
    let mut best = KernelLipschitzReport { constant: 0.0, action: 0, witness: (0, if n > 1 { 1 } else { 0 }) };
    for a in 0..t.actions() {
        for s1 in 0..n {
            for s2 in (s1 + 1)..n {
                let (p, q) = (t.row(s1, a), t.row(s2, a));
                if p == q {
                    continue;
                }
                let ratio = wasserstein_primal(p, q, space)?.cost / space.dist(s1, s2);
                if ratio > best.constant {
                    best = KernelLipschitzReport { constant: ratio, action: a, witness: (s1, s2) };
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StateLayout {
    /// Unit-spaced points on a line.
    Line,
    /// Equally spaced points on the unit circle.
    Circle,
    /// Unit lattice with `cols` columns, filled row-major.
    Grid { cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BaseMap {
    Identity,
    /// Per action, a clamped random walk over state indices with steps in
    /// `[-max_step, max_step]`; its Lipschitz constant on the line is at most `max_step`.
    RandomWalk { max_step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    /// Weight of the uniform distribution in every transition row.
    pub smoothing: f64,
    pub seed: u64,
    #[serde(default = "default_layout")]
    pub layout: StateLayout,
    #[serde(default = "default_base_map")]
    pub base_map: BaseMap,
    /// Lipschitz constant the reward matrix is rescaled to.
    #[serde(default = "default_reward_lipschitz")]
    pub reward_lipschitz: f64,
}

fn default_layout() -> StateLayout {
    StateLayout::Line
}
fn default_base_map() -> BaseMap {
    BaseMap::RandomWalk { max_step: 1 }
}
fn default_reward_lipschitz() -> f64 {
    1.0
}

impl GeneratorConfig {
    pub fn new(n: usize, m: usize, gamma: f64, smoothing: f64, seed: u64) -> Self {
        Self {
            n,
            m,
            gamma,
            smoothing,
            seed,
            layout: default_layout(),
            base_map: default_base_map(),
            reward_lipschitz: default_reward_lipschitz(),
        }
    }
}

/// A generated instance together with its measured constants.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedMdp {
    pub mdp: FiniteMdp,
    pub kernel: KernelLipschitzReport,
    pub reward: UniformLipschitzReport,
}

pub fn generate_lipschitz_mdp(n: usize, m: usize, gamma: f64, smoothing: f64, seed: u64) -> Result<GeneratedMdp, MdpError> {
    generate(&GeneratorConfig::new(n, m, gamma, smoothing, seed))
}

/// Mixes a deterministic state map with the uniform distribution and draws
/// rewards in `[-1, 1]` rescaled to the target Lipschitz constant. Uniform
/// weight `λ` gives `K_W(T) ≤ (1 − λ)·K(map)`; the realized constant is measured.
pub fn generate(cfg: &GeneratorConfig) -> Result<GeneratedMdp, MdpError> {
    let GeneratorConfig { n, m, gamma, smoothing, seed, layout, base_map, reward_lipschitz: target } = *cfg;
    if n < 1 {
        return Err(MdpError::BadParameter("n must be at least 1".into()));
    }
    if m < 1 {
        return Err(MdpError::NoActions);
    }
    if !(0.0..=1.0).contains(&smoothing) {
        return Err(MdpError::BadParameter(format!("smoothing must lie in [0, 1], got {smoothing}")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(MdpError::BadGamma(gamma));
    }
    if !(target >= 0.0 && target.is_finite()) {
        return Err(MdpError::BadParameter(format!("reward_lipschitz must be finite and >= 0, got {target}")));
    }
    let space = match layout {
        StateLayout::Line => MetricSpace::unit_line(n),
        StateLayout::Circle => MetricSpace::regular_circle(n),
        StateLayout::Grid { cols } => {
            if cols == 0 || n % cols != 0 {
                return Err(MdpError::BadParameter(format!("grid with {cols} columns cannot hold {n} states")));
            }
            MetricSpace::grid(n / cols, cols)
        }
    };

    let mut rng = rng::seeded(seed);
    let maps: Vec<Vec<usize>> = (0..m).map(|_| base_state_map(&mut rng, n, layout, base_map)).collect();
    let uniform = Distribution::uniform(n);
    let transition = TransitionTensor::from_fn(n, m, |s, a| {
        Distribution::point_mass(n, maps[a][s]).mix(&uniform, smoothing)
    })?;

    let mut reward: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    let cols: Vec<Vec<f64>> = (0..m).map(|a| reward.iter().map(|r| r[a]).collect()).collect();
    let raw = uniform_lipschitz_constant(&cols, &space)?.constant;
    if raw > 0.0 {
        let scale = target / raw;
        reward.iter_mut().flatten().for_each(|r| *r *= scale);
    }

    let mdp = FiniteMdp::new(space, reward, transition, gamma)?;
    let kernel = kernel_lipschitz(&mdp)?;
    let reward = reward_lipschitz(&mdp);
    Ok(GeneratedMdp { mdp, kernel, reward })
}

fn base_state_map(rng: &mut rng::CellRng, n: usize, layout: StateLayout, base: BaseMap) -> Vec<usize> {
    match (base, layout) {
        (BaseMap::Identity, _) => (0..n).collect(),
        (BaseMap::RandomWalk { max_step }, StateLayout::Line) => {
            let k = max_step as i64;
            let mut cur = rng.gen_range(0..n) as i64;
            let mut map = Vec::with_capacity(n);
            for _ in 0..n {
                map.push(cur as usize);
                cur = (cur + rng.gen_range(-k..=k)).clamp(0, n as i64 - 1);
            }
            map
        }
        (BaseMap::RandomWalk { .. }, StateLayout::Circle) => {
            let shift = rng.gen_range(0..n);
            (0..n).map(|s| (s + shift) % n).collect()
        }
        (BaseMap::RandomWalk { .. }, StateLayout::Grid { cols }) => {
            let rows = n / cols;
            let dr = rng.gen_range(-1i64..=1);
            let dc = rng.gen_range(-1i64..=1);
            (0..n)
                .map(|s| {
                    let r = ((s / cols) as i64 + dr).clamp(0, rows as i64 - 1) as usize;
                    let c = ((s % cols) as i64 + dc).clamp(0, cols as i64 - 1) as usize;
                    r * cols + c
                })
                .collect()
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    space: serde_json::Value,
    actions: usize,
    gamma: f64,
    reward: Vec<Vec<f64>>,
    transition: Vec<Vec<Vec<f64>>>,
}

pub fn mdp_from_json(text: &str) -> Result<FiniteMdp, MdpError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: MdpFile = serde_path_to_error::deserialize(de).map_err(|e| MdpError::Json {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let space: MetricSpace = serde_json::from_value(raw.space)
        .map_err(|e| MdpError::Json { path: "space".into(), message: e.to_string() })?;
    let n = space.len();
    let m = raw.actions;
    if m == 0 {
        return Err(MdpError::NoActions);
    }
    if raw.transition.len() != n {
        return Err(MdpError::Shape { what: "transition".into(), expected: n, got: raw.transition.len() });
    }
    let mut rows = Vec::with_capacity(n * m);
    for (s, per_state) in raw.transition.into_iter().enumerate() {
        if per_state.len() != m {
            return Err(MdpError::Shape { what: format!("transition[{s}]"), expected: m, got: per_state.len() });
        }
        for (a, p) in per_state.into_iter().enumerate() {
            if p.len() != n {
                return Err(MdpError::Shape { what: format!("transition[{s}][{a}]"), expected: n, got: p.len() });
            }
            let row = Distribution::with_tolerance(p, FILE_ROW_TOL).map_err(|source| MdpError::BadRow { s, a, source })?;
            rows.push(row);
        }
    }
    let transition = TransitionTensor::new(n, m, rows)?;
    FiniteMdp::new(space, raw.reward, transition, raw.gamma)
}

pub fn mdp_to_json(mdp: &FiniteMdp) -> String {
    let n = mdp.states();
    let m = mdp.actions();
    let file = MdpFile {
        space: serde_json::to_value(mdp.space()).expect("metric spaces serialize"),
        actions: m,
        gamma: mdp.gamma(),
        reward: mdp.reward_rows(),
        transition: (0..n)
            .map(|s| (0..m).map(|a| mdp.transition().row(s, a).to_vec()).collect())
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("MDP files serialize")
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<FiniteMdp, MdpError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MdpError::Io { path: path.display().to_string(), source })?;
    mdp_from_json(&text)
}

pub fn save_mdp(mdp: &FiniteMdp, path: impl AsRef<Path>) -> Result<(), MdpError> {
    let path = path.as_ref();
    fs::write(path, mdp_to_json(mdp)).map_err(|source| MdpError::Io { path: path.display().to_string(), source })
}
