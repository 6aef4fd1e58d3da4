//! Wasserstein-1 between distributions on a shared finite metric space.
//!
//! Two exact routes are provided and are used as each other's check:
//!
//! - [`wasserstein_primal`] solves the coupling LP `min Σ j(x, y) d(x, y)` over
//!   joint distributions with the prescribed marginals.
//! - [`wasserstein_dual`] solves the potential LP `max Σ (μ₁ − μ₂)(x) f(x)` over
//!   functions whose Lipschitz constant is at most `C`.
//!
//! [`sinkhorn`] gives the entropic approximation in the log domain and
//! [`kl_divergence`] the relative entropy used by maximum-likelihood fitting.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LpError, LpProblem, LpStatus, Relation};
use crate::metric::{MetricSpace, ScalarField};

/// Tolerance on `Σ p = 1` for [`Distribution::new`].
pub const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("probability {index} is negative or not finite ({value})")]
    BadProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("distribution has {got} entries but the space has {expected} points")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the Lipschitz bound must be positive and finite, got {0}")]
    BadBound(f64),
    #[error("KL divergence is infinite: q({index}) = 0 where p({index}) > 0")]
    SupportViolation { index: usize },
    #[error("epsilon, tolerance and max_iter must be positive")]
    BadSinkhornParams,
    #[error("Sinkhorn did not converge in {iterations} iterations (marginal violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },
    #[error("transport LP ended with status {0:?}")]
    Solver(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Probability vector over the points of a metric space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(p: Vec<f64>) -> Result<Self, TransportError> {
        Self::with_tolerance(p, SUM_TOL)
    }

    /// Accepts `|Σ p − 1| ≤ tol` and keeps the entries untouched.
    pub fn with_tolerance(p: Vec<f64>, tol: f64) -> Result<Self, TransportError> {
        if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(TransportError::BadProbability { index, value });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(TransportError::NotNormalized { sum });
        }
        Ok(Self(p))
    }

    /// Divides nonnegative weights by their total.
    pub fn normalized(weights: Vec<f64>) -> Result<Self, TransportError> {
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(TransportError::BadProbability { index, value });
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(TransportError::NotNormalized { sum: total });
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut p = vec![0.0; n];
        p[at] = 1.0;
        Self(p)
    }

    /// `(1 − w)·self + w·other`.
    pub fn mix(&self, other: &Distribution, w: f64) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| (1.0 - w) * a + w * b).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn entropy(&self) -> f64 {
        -self.0.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    fn check_on(&self, space: &MetricSpace) -> Result<(), TransportError> {
        if self.0.len() != space.len() {
            return Err(TransportError::DimensionMismatch { expected: space.len(), got: self.0.len() });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = TransportError;
    fn try_from(p: Vec<f64>) -> Result<Self, Self::Error> {
        Self::with_tolerance(p, 1e-9)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.0
    }
}

impl Deref for Distribution {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Joint distribution on `M × M`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    n: usize,
    plan: Vec<f64>,
}

impl Coupling {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.n + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn cost(&self, space: &MetricSpace) -> f64 {
        let n = self.n;
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j) * space.dist(i, j)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalTransport {
    pub cost: f64,
    pub plan: Coupling,
}

/// Maximizer of the dual transport LP with its Lipschitz radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotential {
    pub f: ScalarField,
    pub lipschitz_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualTransport {
    pub value: f64,
    pub potential: DualPotential,
}

/// Optimal coupling LP restricted to the supports of `mu1` and `mu2`.
pub fn wasserstein_primal(
    mu1: &Distribution,
    mu2: &Distribution,
    space: &MetricSpace,
) -> Result<PrimalTransport, TransportError> {
    mu1.check_on(space)?;
    mu2.check_on(space)?;
    let n = space.len();
    let src: Vec<usize> = (0..n).filter(|&i| mu1[i] > 0.0).collect();
    let dst: Vec<usize> = (0..n).filter(|&j| mu2[j] > 0.0).collect();
    let (a, b) = (src.len(), dst.len());

    let objective = src.iter().flat_map(|&i| dst.iter().map(move |&j| -space.dist(i, j))).collect();
    let mut lp = LpProblem::maximize(objective);
    for (r, &i) in src.iter().enumerate() {
        let mut row = vec![0.0; a * b];
        row[r * b..(r + 1) * b].iter_mut().for_each(|v| *v = 1.0);
        lp.add_constraint(row, Relation::Eq, mu1[i]);
    }
    for (c, &j) in dst.iter().enumerate() {
        let mut row = vec![0.0; a * b];
        for r in 0..a {
            row[r * b + c] = 1.0;
        }
        lp.add_constraint(row, Relation::Eq, mu2[j]);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(TransportError::Solver(sol.status));
    }
    let x = sol.x.expect("optimal solutions carry a point");
    let mut plan = vec![0.0; n * n];
    for (r, &i) in src.iter().enumerate() {
        for (c, &j) in dst.iter().enumerate() {
            plan[i * n + j] = x[r * b + c];
        }
    }
    let cost = (-sol.objective_value.expect("optimal")).max(0.0);
    Ok(PrimalTransport { cost, plan: Coupling { n, plan } })
}

/// `max Σ (mu1 − mu2)(x) f(x)` over `f` with `|f(x) − f(y)| ≤ c·d(x, y)`.
///
/// The additive gauge is fixed by `f(0) = 0`.
pub fn wasserstein_dual(
    mu1: &Distribution,
    mu2: &Distribution,
    space: &MetricSpace,
    c_bound: f64,
) -> Result<DualTransport, TransportError> {
    mu1.check_on(space)?;
    mu2.check_on(space)?;
    if !(c_bound > 0.0 && c_bound.is_finite()) {
        return Err(TransportError::BadBound(c_bound));
    }
    let n = space.len();
    if n == 1 {
        return Ok(DualTransport {
            value: 0.0,
            potential: DualPotential { f: ScalarField::constant(1, 0.0), lipschitz_bound: c_bound },
        });
    }
    // LP variable k is f(k + 1).
    let nv = n - 1;
    let objective = (1..n).map(|i| mu1[i] - mu2[i]).collect();
    let mut lp = LpProblem::maximize(objective);
    for k in 0..nv {
        lp.set_free(k);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let rhs = c_bound * space.dist(i, j);
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; nv];
                if i > 0 {
                    row[i - 1] = sign;
                }
                row[j - 1] = -sign;
                lp.add_constraint(row, Relation::Le, rhs);
            }
        }
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(TransportError::Solver(sol.status));
    }
    let x = sol.x.expect("optimal solutions carry a point");
    let mut f = Vec::with_capacity(n);
    f.push(0.0);
    f.extend(x);
    let value = sol.objective_value.expect("optimal").max(0.0);
    let f = ScalarField::new(f).expect("LP solutions are finite");
    Ok(DualTransport { value, potential: DualPotential { f, lipschitz_bound: c_bound } })
}

/// `Σ p log(p / q)` with `0 log 0 = 0`.
pub fn kl_divergence(mu1: &Distribution, mu2: &Distribution) -> Result<f64, TransportError> {
    if mu1.len() != mu2.len() {
        return Err(TransportError::DimensionMismatch { expected: mu1.len(), got: mu2.len() });
    }
    let mut kl = 0.0;
    for (index, (&p, &q)) in mu1.iter().zip(mu2.iter()).enumerate() {
        if p > 0.0 {
            if q <= 0.0 {
                return Err(TransportError::SupportViolation { index });
            }
            kl += p * (p / q).ln();
        }
    }
    Ok(kl.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOutput {
    /// Transport cost `Σ P(x, y) d(x, y)` of the entropic plan.
    pub cost: f64,
    pub iterations: usize,
    /// Final `Σ_x |Σ_y P(x, y) − μ₁(x)|`.
    pub marginal_violation: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Entropic optimal transport by log-domain Sinkhorn iterations.
///
/// The regularization is annealed geometrically from the largest ground
/// distance down to `epsilon`, warm-starting the potentials at each level.
/// Zero-mass points are dropped from the support. `max_iter` bounds the total
/// number of scaling sweeps across all levels.
pub fn sinkhorn(
    mu1: &Distribution,
    mu2: &Distribution,
    space: &MetricSpace,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornOutput, TransportError> {
    mu1.check_on(space)?;
    mu2.check_on(space)?;
    if !(epsilon > 0.0 && tol > 0.0 && max_iter > 0) {
        return Err(TransportError::BadSinkhornParams);
    }
    let src: Vec<usize> = (0..space.len()).filter(|&i| mu1[i] > 0.0).collect();
    let dst: Vec<usize> = (0..space.len()).filter(|&j| mu2[j] > 0.0).collect();
    let log_a: Vec<f64> = src.iter().map(|&i| mu1[i].ln()).collect();
    let log_b: Vec<f64> = dst.iter().map(|&j| mu2[j].ln()).collect();
    let cost: Vec<Vec<f64>> = src.iter().map(|&i| dst.iter().map(|&j| space.dist(i, j)).collect()).collect();

    let mut f = vec![0.0; src.len()];
    let mut g = vec![0.0; dst.len()];
    let violation = |f: &[f64], g: &[f64], eps: f64| -> f64 {
        (0..src.len())
            .map(|r| {
                let mass: f64 = (0..dst.len()).map(|c| ((f[r] + g[c] - cost[r][c]) / eps).exp()).sum();
                (mass - mu1[src[r]]).abs()
            })
            .sum()
    };

    let mut eps = space.max_distance().max(epsilon);
    let mut iterations = 0usize;
    let mut last_violation;
    loop {
        let final_level = eps <= epsilon;
        let level_tol = if final_level { tol } else { tol.max(1e-3) };
        loop {
            for r in 0..src.len() {
                let lse = log_sum_exp((0..dst.len()).map(|c| (g[c] - cost[r][c]) / eps));
                f[r] = eps * (log_a[r] - lse);
            }
            for c in 0..dst.len() {
                let lse = log_sum_exp((0..src.len()).map(|r| (f[r] - cost[r][c]) / eps));
                g[c] = eps * (log_b[c] - lse);
            }
            iterations += 1;
            last_violation = violation(&f, &g, eps);
            if last_violation < level_tol {
                break;
            }
            if iterations >= max_iter {
                return Err(TransportError::NotConverged { iterations, violation: last_violation });
            }
        }
        if final_level {
            break;
        }
        eps = (eps * 0.5).max(epsilon);
    }

    let mut total = 0.0;
    for r in 0..src.len() {
        for c in 0..dst.len() {
            total += ((f[r] + g[c] - cost[r][c]) / eps).exp() * cost[r][c];
        }
    }
    Ok(SinkhornOutput { cost: total, iterations, marginal_violation: last_violation })
}
