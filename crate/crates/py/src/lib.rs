//! Python bindings. Distributions are lists of floats, kernels are nested
//! `n × m × n` lists and every library error surfaces as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use wvaml::learner::{FitConfig, LossKind, ModelClass};
use wvaml::mdp::{mdp_from_json, mdp_to_json};
use wvaml::planner::greedy_policy;
use wvaml::transport::Distribution;
use wvaml::vaml::ValueClassBound;
use wvaml::{BackupOperator, FiniteMdp, GviConfig, MetricSpace, TransitionTensor};

/// Row-sum slack accepted from Python callers.
const INPUT_TOL: f64 = 1e-9;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn distribution(p: Vec<f64>) -> PyResult<Distribution> {
    Distribution::with_tolerance(p, INPUT_TOL).map_err(value_err)
}

fn tensor(rows: Vec<Vec<Vec<f64>>>) -> PyResult<TransitionTensor> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(n * m);
    for (s, per_state) in rows.into_iter().enumerate() {
        if per_state.len() != m {
            return Err(value_err(format!("state {s} has {} actions, expected {m}", per_state.len())));
        }
        for row in per_state {
            flat.push(distribution(row)?);
        }
    }
    TransitionTensor::new(n, m, flat).map_err(value_err)
}

fn nested(t: &TransitionTensor) -> Vec<Vec<Vec<f64>>> {
    (0..t.states()).map(|s| (0..t.actions()).map(|a| t.row(s, a).probs().to_vec()).collect()).collect()
}

fn operator(text: &str) -> PyResult<BackupOperator> {
    text.parse().map_err(value_err)
}

#[pyclass(name = "MetricSpace", module = "wvaml_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMetricSpace {
    inner: MetricSpace,
}

#[pymethods]
impl PyMetricSpace {
    /// Validated full distance matrix.
    #[new]
    fn new(dist: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: MetricSpace::from_matrix(dist).map_err(value_err)? })
    }

    #[staticmethod]
    fn line(coords: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: MetricSpace::line(coords).map_err(value_err)? })
    }

    #[staticmethod]
    fn unit_line(n: usize) -> Self {
        Self { inner: MetricSpace::unit_line(n) }
    }

    #[staticmethod]
    fn circle(angles: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: MetricSpace::circle(angles).map_err(value_err)? })
    }

    #[staticmethod]
    fn plane(points: Vec<(f64, f64)>) -> PyResult<Self> {
        let pts = points.into_iter().map(|(x, y)| [x, y]).collect();
        Ok(Self { inner: MetricSpace::plane(pts).map_err(value_err)? })
    }

    #[staticmethod]
    fn grid(rows: usize, cols: usize) -> Self {
        Self { inner: MetricSpace::grid(rows, cols) }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn dist(&self, i: usize, j: usize) -> PyResult<f64> {
        let n = self.inner.len();
        if i >= n || j >= n {
            return Err(value_err(format!("point index out of range for {n} points")));
        }
        Ok(self.inner.dist(i, j))
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.row(i).to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!("MetricSpace(n={})", self.inner.len())
    }
}

#[pyclass(name = "TrainReport", module = "wvaml_py", frozen, get_all)]
pub struct PyTrainReport {
    kind: String,
    loss_curve: Vec<f64>,
    planning_gap: f64,
    final_losses: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
}

#[pyclass(name = "Mdp", module = "wvaml_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMdp {
    inner: FiniteMdp,
}

#[pymethods]
impl PyMdp {
    #[new]
    fn new(space: &PyMetricSpace, reward: Vec<Vec<f64>>, transition: Vec<Vec<Vec<f64>>>, gamma: f64) -> PyResult<Self> {
        let t = tensor(transition)?;
        Ok(Self { inner: FiniteMdp::new(space.inner.clone(), reward, t, gamma).map_err(value_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, m, gamma=0.9, smoothing=0.3, seed=0))]
    fn generate(n: usize, m: usize, gamma: f64, smoothing: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: wvaml::generate_lipschitz_mdp(n, m, gamma, smoothing, seed).map_err(value_err)?.mdp })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: mdp_from_json(text).map_err(value_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: wvaml::load_mdp(path).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        mdp_to_json(&self.inner)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        wvaml::save_mdp(&self.inner, path).map_err(value_err)
    }

    #[getter]
    fn states(&self) -> usize {
        self.inner.states()
    }

    #[getter]
    fn actions(&self) -> usize {
        self.inner.actions()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn space(&self) -> PyMetricSpace {
        PyMetricSpace { inner: self.inner.space().clone() }
    }

    fn reward(&self) -> Vec<Vec<f64>> {
        self.inner.reward_rows()
    }

    fn transition(&self) -> Vec<Vec<Vec<f64>>> {
        nested(self.inner.transition())
    }

    fn reward_lipschitz(&self) -> f64 {
        wvaml::reward_lipschitz(&self.inner).constant
    }

    fn kernel_lipschitz(&self) -> PyResult<f64> {
        Ok(wvaml::kernel_lipschitz(&self.inner).map_err(value_err)?.constant)
    }

    /// Lipschitz radius `K(R) / (1 − γ K_W)`.
    fn theorem_bound(&self) -> PyResult<f64> {
        Ok(wvaml::theorem_bound(&self.inner).map_err(value_err)?.c.value())
    }

    /// Returns `(q_rows, v, greedy_policy, iterations, final_diff)`.
    #[pyo3(signature = (operator="max", delta=1e-10, max_iter=1_000_000))]
    #[allow(clippy::type_complexity)]
    fn gvi(&self, operator: &str, delta: f64, max_iter: usize) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<usize>, usize, f64)> {
        let cfg = GviConfig { delta, max_iter, ..GviConfig::default() };
        let r = wvaml::gvi(&self.inner, self::operator(operator)?, &cfg).map_err(value_err)?;
        let q = (0..r.q.states()).map(|s| r.q.row(s).to_vec()).collect();
        let pi = greedy_policy(&r.q);
        Ok((q, r.v.into_inner(), pi, r.iterations, r.final_diff))
    }

    fn evaluate_policy(&self, policy: Vec<usize>) -> PyResult<Vec<f64>> {
        Ok(wvaml::evaluate_policy(&self.inner, &policy).map_err(value_err)?.into_inner())
    }

    fn vaml_loss(&self, model: Vec<Vec<Vec<f64>>>, c: f64, s: usize, a: usize) -> PyResult<f64> {
        let c = ValueClassBound::new(c).map_err(value_err)?;
        Ok(wvaml::vaml_loss(&self.inner, &tensor(model)?, c, s, a).map_err(value_err)?.value)
    }

    /// Largest `|L − (c W)²|` over all state-action pairs.
    fn verify_equivalence(&self, model: Vec<Vec<Vec<f64>>>, c: f64) -> PyResult<f64> {
        let c = ValueClassBound::new(c).map_err(value_err)?;
        Ok(wvaml::verify_equivalence(&self.inner, &tensor(model)?, c).map_err(value_err)?.max_gap)
    }

    /// `kind` is `kl`, `wasserstein`, `vaml:<c>` or bare `vaml` for the theorem radius.
    #[pyo3(signature = (kind="kl", iters=2000, step_size=0.1, seed=0, fd_epsilon=1e-5, rank=None))]
    fn fit(&self, kind: &str, iters: usize, step_size: f64, seed: u64, fd_epsilon: f64, rank: Option<usize>) -> PyResult<PyTrainReport> {
        let kind = if kind.trim().eq_ignore_ascii_case("vaml") {
            LossKind::Vaml(self.theorem_bound()?)
        } else {
            kind.parse().map_err(value_err)?
        };
        let class = rank.map_or(ModelClass::Full, |rank| ModelClass::RankLimited { rank });
        let cfg = FitConfig { iters, step_size, seed, fd_epsilon, class, log_every: 0, ..FitConfig::default() };
        let r = wvaml::fit_model(&self.inner, kind, &cfg).map_err(value_err)?;
        Ok(PyTrainReport {
            kind: r.kind.to_string(),
            transition: nested(&r.final_model.transition()),
            loss_curve: r.loss_curve,
            planning_gap: r.planning_gap,
            final_losses: r.final_losses,
        })
    }

    fn __repr__(&self) -> String {
        format!("Mdp(states={}, actions={}, gamma={})", self.inner.states(), self.inner.actions(), self.inner.gamma())
    }
}

#[pyfunction]
fn wasserstein(p: Vec<f64>, q: Vec<f64>, space: &PyMetricSpace) -> PyResult<f64> {
    Ok(wvaml::wasserstein_primal(&distribution(p)?, &distribution(q)?, &space.inner).map_err(value_err)?.cost)
}

/// Returns `(value, potential)` with the potential pinned to 0 at point 0.
#[pyfunction]
#[pyo3(signature = (p, q, space, c=1.0))]
fn wasserstein_dual(p: Vec<f64>, q: Vec<f64>, space: &PyMetricSpace, c: f64) -> PyResult<(f64, Vec<f64>)> {
    let d = wvaml::wasserstein_dual(&distribution(p)?, &distribution(q)?, &space.inner, c).map_err(value_err)?;
    Ok((d.value, d.potential.f.into_inner()))
}

#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    wvaml::kl_divergence(&distribution(p)?, &distribution(q)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (p, q, space, epsilon, max_iter=1_000_000, tol=1e-9))]
fn sinkhorn(p: Vec<f64>, q: Vec<f64>, space: &PyMetricSpace, epsilon: f64, max_iter: usize, tol: f64) -> PyResult<f64> {
    Ok(wvaml::sinkhorn(&distribution(p)?, &distribution(q)?, &space.inner, epsilon, max_iter, tol).map_err(value_err)?.cost)
}

#[pyfunction]
fn lipschitz_constant(f: Vec<f64>, space: &PyMetricSpace) -> PyResult<f64> {
    Ok(wvaml::lipschitz_constant(&f, &space.inner).map_err(value_err)?.constant)
}

/// `operator` is `max`, `mean`, `eps-greedy:<e>` or `mellowmax:<beta>`.
#[pyfunction]
fn apply_operator(operator: &str, x: Vec<f64>) -> PyResult<f64> {
    self::operator(operator)?.apply(&x).map_err(value_err)
}

#[pymodule]
fn wvaml_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetricSpace>()?;
    m.add_class::<PyMdp>()?;
    m.add_class::<PyTrainReport>()?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_dual, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(sinkhorn, m)?)?;
    m.add_function(wrap_pyfunction!(lipschitz_constant, m)?)?;
    m.add_function(wrap_pyfunction!(apply_operator, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_kernel_round_trips() {
        let mdp = PyMdp::generate(4, 2, 0.9, 0.3, 1).unwrap();
        let t = mdp.transition();
        assert_eq!((t.len(), t[0].len(), t[0][0].len()), (4, 2, 4));
        assert_eq!(nested(&tensor(t.clone()).unwrap()), t);
    }

    #[test]
    fn ragged_kernel_is_rejected() {
        let rows = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.5, 0.5]]];
        assert!(tensor(rows).is_err());
    }

    #[test]
    fn wrappers_agree_with_the_library() {
        let space = PyMetricSpace::unit_line(3);
        let w = wasserstein(vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], &space).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        let (d, f) = wasserstein_dual(vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], &space, 2.0).unwrap();
        assert!((d - 2.0).abs() < 1e-9);
        assert_eq!(f[0], 0.0);
        assert_eq!(apply_operator("mean", vec![1.0, 3.0]).unwrap(), 2.0);
        assert!(apply_operator("softmax", vec![1.0]).is_err());
    }

    #[test]
    fn equivalence_and_fit_through_bindings() {
        let mdp = PyMdp::generate(4, 2, 0.8, 0.4, 2).unwrap();
        let c = mdp.theorem_bound().unwrap();
        let model = PyMdp::generate(4, 2, 0.8, 0.6, 3).unwrap().transition();
        assert!(mdp.verify_equivalence(model.clone(), c).unwrap() <= 1e-6);
        let r = mdp.fit("vaml", 3, 0.1, 0, 1e-5, None).unwrap();
        assert_eq!(r.loss_curve.len(), 4);
        assert!(r.kind.starts_with("vaml:"));
    }
}
