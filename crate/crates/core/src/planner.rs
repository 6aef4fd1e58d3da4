//! Generalized value iteration.
//!
//! The Bellman backup `Q(s,a) ← R(s,a) + γ Σ T(s'|s,a) f(Q(s',·))` is run with
//! any non-expansion `f` from [`BackupOperator`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::dense::{solve_linear_system, DenseError};
use crate::mdp::FiniteMdp;
use crate::metric::ScalarField;

/// Below this β mellowmax is evaluated as the mean.
pub const MELLOWMAX_MEAN_CUTOFF: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("backup operator applied to an empty vector")]
    EmptyInput,
    #[error("invalid operator `{0}` (expected max, mean, eps-greedy:<e in [0,1]> or mellowmax:<beta > 0>)")]
    BadOperator(String),
    #[error("value iteration did not converge in {iterations} sweeps (last diff {last_diff:e})")]
    NotConverged { iterations: usize, last_diff: f64 },
    #[error("delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("Q function has shape {got:?}, expected {expected:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("policy action {action} at state {state} is out of range")]
    BadPolicy { state: usize, action: usize },
    #[error("policy evaluation system is singular: {0}")]
    Singular(#[from] DenseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackupOperator {
    Max,
    Mean,
    /// `ε·mean + (1 − ε)·max`
    EpsGreedy(f64),
    /// `log(mean(exp(β x))) / β`
    Mellowmax(f64),
}

impl BackupOperator {
    pub fn eps_greedy(epsilon: f64) -> Result<Self, PlannerError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(PlannerError::BadOperator(format!("eps-greedy:{epsilon}")));
        }
        Ok(Self::EpsGreedy(epsilon))
    }

    pub fn mellowmax(beta: f64) -> Result<Self, PlannerError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(PlannerError::BadOperator(format!("mellowmax:{beta}")));
        }
        Ok(Self::Mellowmax(beta))
    }

    pub fn apply(&self, x: &[f64]) -> Result<f64, PlannerError> {
        if x.is_empty() {
            return Err(PlannerError::EmptyInput);
        }
        Ok(self.apply_nonempty(x))
    }

    fn apply_nonempty(&self, x: &[f64]) -> f64 {
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = || x.iter().sum::<f64>() / x.len() as f64;
        let v = match *self {
            BackupOperator::Max => return max,
            BackupOperator::Mean => mean(),
            BackupOperator::EpsGreedy(e) => e * mean() + (1.0 - e) * max,
            BackupOperator::Mellowmax(beta) if beta < MELLOWMAX_MEAN_CUTOFF => mean(),
            BackupOperator::Mellowmax(beta) => {
                // max + log1p(mean(expm1(β(x − max)))) / β
                let s = x.iter().map(|v| (beta * (v - max)).exp_m1()).sum::<f64>() / x.len() as f64;
                max + s.ln_1p() / beta
            }
        };
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        v.clamp(min, max)
    }
}

/// Free-function form of [`BackupOperator::apply`].
pub fn apply_operator(op: BackupOperator, x: &[f64]) -> Result<f64, PlannerError> {
    op.apply(x)
}

impl fmt::Display for BackupOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackupOperator::Max => write!(f, "max"),
            BackupOperator::Mean => write!(f, "mean"),
            BackupOperator::EpsGreedy(e) => write!(f, "eps-greedy:{e}"),
            BackupOperator::Mellowmax(b) => write!(f, "mellowmax:{b}"),
        }
    }
}

impl FromStr for BackupOperator {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PlannerError::BadOperator(s.to_string());
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim().parse::<f64>().map_err(|_| bad())?)),
            None => (s.trim(), None),
        };
        match (name, param) {
            ("max", None) => Ok(Self::Max),
            ("mean", None) => Ok(Self::Mean),
            ("eps-greedy", Some(e)) => Self::eps_greedy(e).map_err(|_| bad()),
            ("mellowmax", Some(b)) => Self::mellowmax(b).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for BackupOperator {
    type Error = PlannerError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BackupOperator> for String {
    fn from(op: BackupOperator) -> Self {
        op.to_string()
    }
}

/// State-action values, row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    states: usize,
    actions: usize,
    q: Vec<f64>,
}

impl QFunction {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self { states, actions, q: vec![0.0; states * actions] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, PlannerError> {
        let states = rows.len();
        let actions = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != actions) {
            return Err(PlannerError::Shape { expected: (states, actions), got: (states, bad.len()) });
        }
        Ok(Self { states, actions, q: rows.into_iter().flatten().collect() })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.actions..(s + 1) * self.actions]
    }

    /// Values of action `a` across states.
    pub fn column(&self, a: usize) -> Vec<f64> {
        (0..self.states).map(|s| self.get(s, a)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.actions).map(|a| self.column(a)).collect()
    }

    /// `v(s) = f(Q(s, ·))`.
    pub fn state_values(&self, op: BackupOperator) -> ScalarField {
        let v = (0..self.states).map(|s| op.apply_nonempty(self.row(s))).collect();
        ScalarField::new(v).expect("backups of finite values are finite")
    }

    pub fn max_abs_diff(&self, other: &QFunction) -> f64 {
        self.q.iter().zip(&other.q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GviConfig {
    pub delta: f64,
    pub max_iter: usize,
    pub q0: Option<QFunction>,
    /// Update `Q` in place while sweeping instead of from the previous iterate.
    pub in_place: bool,
}

impl Default for GviConfig {
    fn default() -> Self {
        Self { delta: 1e-10, max_iter: 1_000_000, q0: None, in_place: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GviResult {
    pub q: QFunction,
    pub v: ScalarField,
    pub iterations: usize,
    pub final_diff: f64,
}

pub fn gvi(mdp: &FiniteMdp, op: BackupOperator, cfg: &GviConfig) -> Result<GviResult, PlannerError> {
    gvi_observed(mdp, op, cfg, |_, _| {})
}

/// Like [`gvi`], calling `observe(k, &Q_k)` for the initial iterate (`k = 0`)
/// and after every sweep.
pub fn gvi_observed(
    mdp: &FiniteMdp,
    op: BackupOperator,
    cfg: &GviConfig,
    mut observe: impl FnMut(usize, &QFunction),
) -> Result<GviResult, PlannerError> {
    if !(cfg.delta > 0.0) {
        return Err(PlannerError::BadDelta(cfg.delta));
    }
    let (n, m) = (mdp.states(), mdp.actions());
    let mut q = match &cfg.q0 {
        Some(q0) if (q0.states, q0.actions) != (n, m) => {
            return Err(PlannerError::Shape { expected: (n, m), got: (q0.states, q0.actions) })
        }
        Some(q0) => q0.clone(),
        None => QFunction::zeros(n, m),
    };
    let gamma = mdp.gamma();
    let t = mdp.transition();
    observe(0, &q);
    let mut v: Vec<f64> = (0..n).map(|s| op.apply_nonempty(q.row(s))).collect();
    let mut diff = f64::INFINITY;
    for sweep in 1..=cfg.max_iter {
        diff = 0.0;
        if cfg.in_place {
            for s in 0..n {
                for a in 0..m {
                    let old = q.get(s, a);
                    let new = mdp.reward(s, a) + gamma * t.expectation(s, a, &v);
                    q.q[s * m + a] = new;
                    v[s] = op.apply_nonempty(q.row(s));
                    diff = diff.max((new - old).abs());
                }
            }
        } else {
            let mut next = q.q.clone();
            for s in 0..n {
                for a in 0..m {
                    let new = mdp.reward(s, a) + gamma * t.expectation(s, a, &v);
                    diff = diff.max((new - q.get(s, a)).abs());
                    next[s * m + a] = new;
                }
            }
            q.q = next;
        }
        v = (0..n).map(|s| op.apply_nonempty(q.row(s))).collect();
        observe(sweep, &q);
        if diff < cfg.delta {
            let v = ScalarField::new(v).expect("finite");
            return Ok(GviResult { q, v, iterations: sweep, final_diff: diff });
        }
    }
    Err(PlannerError::NotConverged { iterations: cfg.max_iter, last_diff: diff })
}

/// Deterministic policy: one action index per state.
pub type Policy = Vec<usize>;

/// Per-state argmax; ties go to the lowest action index.
pub fn greedy_policy(q: &QFunction) -> Policy {
    (0..q.states())
        .map(|s| {
            let row = q.row(s);
            let mut best = 0;
            for (a, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Solves `(I − γ T_π) V = R_π` exactly.
pub fn evaluate_policy(mdp: &FiniteMdp, policy: &[usize]) -> Result<ScalarField, PlannerError> {
    let n = mdp.states();
    if policy.len() != n {
        return Err(PlannerError::Shape { expected: (n, 1), got: (policy.len(), 1) });
    }
    if let Some((state, &action)) = policy.iter().enumerate().find(|(_, &a)| a >= mdp.actions()) {
        return Err(PlannerError::BadPolicy { state, action });
    }
    let gamma = mdp.gamma();
    let mut a = vec![0.0; n * n];
    let mut r = vec![0.0; n];
    for s in 0..n {
        let row = mdp.transition().row(s, policy[s]);
        for s2 in 0..n {
            a[s * n + s2] = -gamma * row[s2];
        }
        a[s * n + s] += 1.0;
        r[s] = mdp.reward(s, policy[s]);
    }
    let v = solve_linear_system(n, a, &r)?;
    Ok(ScalarField::new(v).expect("finite system solution"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TransitionTensor;
    use crate::metric::MetricSpace;
    use crate::transport::Distribution;

    fn self_loop(r: f64, gamma: f64) -> FiniteMdp {
        let t = TransitionTensor::from_fn(1, 1, |_, _| Distribution::point_mass(1, 0)).unwrap();
        FiniteMdp::new(MetricSpace::unit_line(1), vec![vec![r]], t, gamma).unwrap()
    }

    #[test]
    fn operator_examples() {
        assert_eq!(BackupOperator::Max.apply(&[1.0, 2.0, 3.0]).unwrap(), 3.0);
        let x = [0.3, -1.2, 4.0, 2.5];
        let mean = x.iter().sum::<f64>() / 4.0;
        assert!((BackupOperator::EpsGreedy(1.0).apply(&x).unwrap() - mean).abs() < 1e-15);
        for beta in [0.1, 1.0, 50.0, 1e4] {
            let v = BackupOperator::Mellowmax(beta).apply(&[2.5; 5]).unwrap();
            assert!((v - 2.5).abs() < 1e-15);
        }
        assert_eq!(BackupOperator::Mean.apply(&[]).unwrap_err(), PlannerError::EmptyInput);
    }

    #[test]
    fn mellowmax_limits() {
        let x = [0.3, -0.9, 0.95, 0.1];
        let mean = x.iter().sum::<f64>() / 4.0;
        assert!((BackupOperator::Mellowmax(1000.0).apply(&x).unwrap() - 0.95).abs() < 1e-2);
        assert!((BackupOperator::Mellowmax(1e-6).apply(&x).unwrap() - mean).abs() < 1e-6);
        assert!((BackupOperator::Mellowmax(1e-9).apply(&x).unwrap() - mean).abs() < 1e-15);
    }

    #[test]
    fn operator_strings_round_trip() {
        for s in ["max", "mean", "eps-greedy:0.1", "mellowmax:5"] {
            let op: BackupOperator = s.parse().unwrap();
            assert_eq!(op.to_string().parse::<BackupOperator>().unwrap(), op);
        }
        assert_eq!("mellowmax:5.0".parse::<BackupOperator>().unwrap(), BackupOperator::Mellowmax(5.0));
        for bad in ["eps-greedy:1.5", "mellowmax:0", "mellowmax", "max:3", "softmax"] {
            assert!(bad.parse::<BackupOperator>().is_err(), "{bad}");
        }
    }

    #[test]
    fn self_loop_fixed_point() {
        let cfg = GviConfig::default();
        for op in [BackupOperator::Max, BackupOperator::Mean, BackupOperator::Mellowmax(3.0)] {
            let r = gvi(&self_loop(2.0, 0.9), op, &cfg).unwrap();
            assert!((r.q.get(0, 0) - 20.0).abs() < cfg.delta / 0.1);
            assert!(r.final_diff < cfg.delta);
        }
        let v = evaluate_policy(&self_loop(2.0, 0.9), &[0]).unwrap();
        assert!((v[0] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn zero_discount_returns_rewards() {
        let g = crate::mdp::generate_lipschitz_mdp(4, 2, 0.0, 0.5, 1).unwrap().mdp;
        let r = gvi(&g, BackupOperator::Max, &GviConfig::default()).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                assert_eq!(r.q.get(s, a), g.reward(s, a));
            }
        }
        let v = evaluate_policy(&g, &[1, 0, 1, 1]).unwrap();
        assert_eq!(v[0], g.reward(0, 1));
    }

    #[test]
    fn in_place_mode_reaches_same_fixed_point() {
        let g = crate::mdp::generate_lipschitz_mdp(5, 2, 0.8, 0.3, 2).unwrap().mdp;
        let sync = gvi(&g, BackupOperator::Max, &GviConfig::default()).unwrap();
        let cfg = GviConfig { in_place: true, ..GviConfig::default() };
        let inplace = gvi(&g, BackupOperator::Max, &cfg).unwrap();
        assert!(sync.q.max_abs_diff(&inplace.q) < 1e-8);
    }

    #[test]
    fn non_convergence_is_an_error() {
        let g = crate::mdp::generate_lipschitz_mdp(3, 2, 0.99, 0.3, 2).unwrap().mdp;
        let cfg = GviConfig { max_iter: 3, ..GviConfig::default() };
        assert!(matches!(gvi(&g, BackupOperator::Max, &cfg), Err(PlannerError::NotConverged { iterations: 3, .. })));
    }

    #[test]
    fn greedy_tie_breaking() {
        let q = QFunction::from_rows(vec![vec![1.0, 1.0, 1.0], vec![0.0, 2.0, 2.0]]).unwrap();
        assert_eq!(greedy_policy(&q), vec![0, 1]);
        let dominant = QFunction::from_rows(vec![vec![0.0, 5.0], vec![-3.0, 1.0]]).unwrap();
        assert_eq!(greedy_policy(&dominant), vec![1, 1]);
    }
}
