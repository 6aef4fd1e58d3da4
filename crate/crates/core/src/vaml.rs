//! Value-aware model losses.
//!
//! For a learned kernel `T̂` the pointwise Bellman model error of a fixed value
//! function is `l(s,a) = γ Σ (T − T̂)(s'|s,a) v(s')`. The value-aware loss takes
//! the worst case of its undiscounted square over a function class; over the
//! ball of `C`-Lipschitz functions this sup is a dual transport LP, so
//! `L(s,a) = (C · W(T(·|s,a), T̂(·|s,a)))²`. [`verify_equivalence`] checks that
//! identity cell by cell by solving the dual and the primal LP independently.
//!
//! The radius `C` comes from [`theorem_bound`]: when `γ K_W(T) < 1`, value
//! iteration with any non-expansion backup has Lipschitz iterates bounded by
//! `K(R) / (1 − γ K_W(T))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{kernel_lipschitz, reward_lipschitz, FiniteMdp, MdpError, TransitionTensor};
use crate::metric::{lipschitz_constant, uniform_lipschitz_constant, MetricError, ScalarField};
use crate::planner::{gvi, BackupOperator, GviConfig, PlannerError};
use crate::transport::{kl_divergence, wasserstein_dual, wasserstein_primal, TransportError};

#[derive(Debug, Error)]
pub enum VamlError {
    #[error("the Lipschitz radius must be finite and nonnegative, got {0}")]
    BadRadius(f64),
    #[error("theorem precondition violated: gamma * K_W(T) = {contraction} >= 1")]
    NotContracting { contraction: f64 },
    #[error("model has shape {got:?}, expected {expected:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("state-action ({s}, {a}) is out of range")]
    OutOfRange { s: usize, a: usize },
    #[error("value function has {got} entries, expected {expected}")]
    ValueLength { expected: usize, got: usize },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// Radius `C` of the class of `C`-Lipschitz value functions.
///
/// `C = 0` is allowed: it is what the bound gives for constant rewards and the
/// class degenerates to constants, on which every model error vanishes.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ValueClassBound(f64);

impl ValueClassBound {
    pub fn new(c: f64) -> Result<Self, VamlError> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(VamlError::BadRadius(c));
        }
        Ok(Self(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_cell(mdp: &FiniteMdp, that: &TransitionTensor, s: usize, a: usize) -> Result<(), VamlError> {
    let expected = (mdp.states(), mdp.actions());
    let got = (that.states(), that.actions());
    if expected != got {
        return Err(VamlError::Shape { expected, got });
    }
    if s >= expected.0 || a >= expected.1 {
        return Err(VamlError::OutOfRange { s, a });
    }
    Ok(())
}

/// `γ Σ_{s'} (T(s'|s,a) − T̂(s'|s,a)) v(s')`, sign kept.
pub fn pointwise_model_error(
    mdp: &FiniteMdp,
    that: &TransitionTensor,
    v: &[f64],
    s: usize,
    a: usize,
) -> Result<f64, VamlError> {
    check_cell(mdp, that, s, a)?;
    if v.len() != mdp.states() {
        return Err(VamlError::ValueLength { expected: mdp.states(), got: v.len() });
    }
    let (p, q) = (mdp.transition().row(s, a), that.row(s, a));
    // Centring at v[0] leaves the value unchanged and makes it exactly 0 for constant v.
    let v0 = v.first().copied().unwrap_or(0.0);
    let gap: f64 = p.iter().zip(q.iter()).zip(v).map(|((p, q), v)| (p - q) * (v - v0)).sum();
    Ok(mdp.gamma() * gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderPinsker {
    /// `|l(s, a)|`
    pub error: f64,
    /// `γ ‖T − T̂‖₁ ‖v‖∞`
    pub l1_bound: f64,
    /// `γ sqrt(2 KL(T ‖ T̂)) ‖v‖∞`; `None` when the KL divergence is infinite.
    pub kl_bound: Option<f64>,
}

pub fn holder_pinsker_bounds(
    mdp: &FiniteMdp,
    that: &TransitionTensor,
    v: &[f64],
    s: usize,
    a: usize,
) -> Result<HolderPinsker, VamlError> {
    let error = pointwise_model_error(mdp, that, v, s, a)?.abs();
    let (p, q) = (mdp.transition().row(s, a), that.row(s, a));
    let sup = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let gamma = mdp.gamma();
    let l1_bound = gamma * p.l1_distance(q) * sup;
    let kl_bound = match kl_divergence(p, q) {
        Ok(kl) => Some(gamma * (2.0 * kl).sqrt() * sup),
        Err(TransportError::SupportViolation { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(HolderPinsker { error, l1_bound, kl_bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VamlLoss {
    pub value: f64,
    /// Maximizing `C`-Lipschitz value function, pinned to 0 at state 0.
    pub worst_v: ScalarField,
}

/// `sup_{K(f) ≤ C} |Σ (T − T̂)(s'|s,a) f(s')|²` through the dual transport LP.
pub fn vaml_loss(
    mdp: &FiniteMdp,
    that: &TransitionTensor,
    c: ValueClassBound,
    s: usize,
    a: usize,
) -> Result<VamlLoss, VamlError> {
    check_cell(mdp, that, s, a)?;
    let n = mdp.states();
    if c.value() == 0.0 {
        return Ok(VamlLoss { value: 0.0, worst_v: ScalarField::constant(n, 0.0) });
    }
    let dual = wasserstein_dual(mdp.transition().row(s, a), that.row(s, a), mdp.space(), c.value())?;
    Ok(VamlLoss { value: dual.value * dual.value, worst_v: dual.potential.f })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    pub c: ValueClassBound,
    pub reward_lipschitz: f64,
    pub kernel_lipschitz: f64,
    /// `γ K_W(T)`
    pub contraction: f64,
}

/// `K(R) / (1 − γ K_W)` from already measured constants.
pub fn theorem_bound_from(reward_lipschitz: f64, kernel_lipschitz: f64, gamma: f64) -> Result<ValueClassBound, VamlError> {
    let contraction = gamma * kernel_lipschitz;
    if contraction >= 1.0 {
        return Err(VamlError::NotContracting { contraction });
    }
    ValueClassBound::new(reward_lipschitz / (1.0 - contraction))
}

/// Measures `K(R)` and `K_W(T)` on `mdp` and returns the Lipschitz radius.
pub fn theorem_bound(mdp: &FiniteMdp) -> Result<TheoremBound, VamlError> {
    let kr = reward_lipschitz(mdp).constant;
    let kw = kernel_lipschitz(mdp)?.constant;
    let c = theorem_bound_from(kr, kw, mdp.gamma())?;
    Ok(TheoremBound { c, reward_lipschitz: kr, kernel_lipschitz: kw, contraction: mdp.gamma() * kw })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueLipschitzCheck {
    pub measured_kq: f64,
    pub measured_kv: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Relative slack used by [`verify_value_lipschitz`].
pub const VALUE_LIPSCHITZ_RTOL: f64 = 1e-8;

/// Runs value iteration and compares the Lipschitz constants of the fixed
/// point with the bound.
pub fn verify_value_lipschitz(mdp: &FiniteMdp, op: BackupOperator, delta: f64) -> Result<ValueLipschitzCheck, VamlError> {
    let bound = theorem_bound(mdp)?.c.value();
    let cfg = GviConfig { delta, ..GviConfig::default() };
    let result = gvi(mdp, op, &cfg)?;
    let measured_kq = uniform_lipschitz_constant(&result.q.columns(), mdp.space())?.constant;
    let measured_kv = lipschitz_constant(&result.v, mdp.space())?.constant;
    let slack = bound + VALUE_LIPSCHITZ_RTOL * (1.0 + bound);
    Ok(ValueLipschitzCheck { measured_kq, measured_kv, bound, pass: measured_kq <= slack && measured_kv <= slack })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRecord {
    pub s: usize,
    pub a: usize,
    /// Value-aware loss from the dual LP.
    pub vaml: f64,
    /// Wasserstein distance from the primal LP.
    pub wasserstein: f64,
    pub c: f64,
    /// `|vaml − (c · wasserstein)²|`
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub records: Vec<EquivalenceRecord>,
    pub max_gap: f64,
}

impl EquivalenceReport {
    /// Largest `gap / (1 + vaml)` over the records.
    pub fn max_relative_gap(&self) -> f64 {
        self.records.iter().map(|r| r.gap / (1.0 + r.vaml)).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,a,vaml,wasserstein,c,gap\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{:e},{:e},{:e},{:e}\n", r.s, r.a, r.vaml, r.wasserstein, r.c, r.gap));
        }
        out
    }
}

/// Solves, for every `(s, a)`, the dual LP for the value-aware loss and the
/// primal LP for W, records the gap, in `(s, a)` order.
pub fn verify_equivalence(
    mdp: &FiniteMdp,
    that: &TransitionTensor,
    c: ValueClassBound,
) -> Result<EquivalenceReport, VamlError> {
    let mut records = Vec::with_capacity(mdp.states() * mdp.actions());
    for s in 0..mdp.states() {
        for a in 0..mdp.actions() {
            let vaml = vaml_loss(mdp, that, c, s, a)?.value;
            let wasserstein = wasserstein_primal(mdp.transition().row(s, a), that.row(s, a), mdp.space())?.cost;
            let predicted = (c.value() * wasserstein).powi(2);
            records.push(EquivalenceRecord { s, a, vaml, wasserstein, c: c.value(), gap: (vaml - predicted).abs() });
        }
    }
    let max_gap = records.iter().map(|r| r.gap).fold(0.0, f64::max);
    Ok(EquivalenceReport { records, max_gap })
}
