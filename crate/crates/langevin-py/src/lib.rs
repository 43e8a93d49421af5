//! Python bindings for the core sampling toolkit.
//!
//! The module mirrors the Rust surface at the granularity a notebook wants:
//! quadratic targets and their exact Gaussian chain laws, step plans, the
//! bound/tuning calculators (returned as plain dicts, same shape as the CLI's
//! JSON reports), and a single `sample` entry point that runs one chain.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

use langevin_core::model::SmoothPotential;
use langevin_core::{analytics, bounds, model, oracles, samplers, schedules};

fn err(e: langevin_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_vector(x: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(x)
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    match v {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else if let Some(u) = n.as_u64() {
                u.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        Value::String(s) => s.into_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn report_to_py(py: Python<'_>, report: &bounds::BoundReport) -> PyResult<Py<PyAny>> {
    let value = serde_json::to_value(report)
        .map_err(|e| PyValueError::new_err(format!("report serialization: {e}")))?;
    json_to_py(py, &value)
}

fn constants_from(map: HashMap<String, f64>) -> PyResult<bounds::ProblemConstants> {
    let mut c = bounds::ProblemConstants::new(0);
    let mut dim_seen = false;
    for (key, v) in &map {
        match key.as_str() {
            "dim" => {
                if *v < 0.0 || v.fract() != 0.0 {
                    return Err(PyValueError::new_err("`dim` must be a nonnegative integer"));
                }
                c.dim = *v as usize;
                dim_seen = true;
            }
            "m" => c.m = *v,
            "l" => c.l = Some(*v),
            "m_lip" => c.m_lip = Some(*v),
            "m2_lip" => c.m2_lip = Some(*v),
            "d_sq" => c.d_sq = Some(*v),
            "l_tilde" => c.l_tilde = Some(*v),
            "m_tilde1" => c.m_tilde1 = Some(*v),
            "l_tilde1" => c.l_tilde1 = Some(*v),
            "upsilon_star" => c.upsilon_star = Some(*v),
            "w0_sq" => c.w0_sq = Some(*v),
            "eta" => c.eta = Some(*v),
            "m_eta" => c.m_eta = Some(*v),
            "x0_moment" => c.x0_moment = Some(*v),
            "burnin_moment" => c.burnin_moment = Some(*v),
            other => return Err(PyValueError::new_err(format!("unknown constant `{other}`"))),
        }
    }
    if !dim_seen {
        return Err(PyValueError::new_err("constants must include `dim`"));
    }
    Ok(c)
}

/// Potential `U(x) = ½ xᵀHx` for symmetric positive semi-definite H.
#[pyclass(frozen, skip_from_py_object)]
struct Quadratic {
    inner: model::Quadratic,
}

#[pymethods]
impl Quadratic {
    #[new]
    fn new(hessian: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = model::Quadratic::new(to_matrix(hessian)?).map_err(err)?;
        Ok(Quadratic { inner })
    }

    #[staticmethod]
    fn diagonal(entries: Vec<f64>) -> PyResult<Self> {
        let d = entries.len();
        let h = DMatrix::from_fn(d, d, |i, j| if i == j { entries[i] } else { 0.0 });
        Ok(Quadratic { inner: model::Quadratic::new(h).map_err(err)? })
    }

    #[staticmethod]
    fn isotropic(dim: usize, scale: f64) -> PyResult<Self> {
        Ok(Quadratic { inner: model::Quadratic::isotropic(dim, scale).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Strong convexity constant m = λ_min(H).
    #[getter]
    fn m(&self) -> f64 {
        self.inner.strong_convexity()
    }

    /// Smoothness constant L = λ_max(H).
    #[getter]
    fn l(&self) -> f64 {
        self.inner.smoothness()
    }

    fn hessian(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.hessian())
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.inner.value(&to_vector(x)))
    }

    fn grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        Ok(self.inner.grad(&to_vector(x)).as_slice().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Quadratic(dim={}, m={}, l={})", self.inner.dim(), self.inner.strong_convexity(), self.inner.smoothness())
    }
}

impl Quadratic {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() == self.inner.dim() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!(
                "expected a vector of length {}, got {}",
                self.inner.dim(),
                x.len()
            )))
        }
    }
}

/// Gaussian measure N(mean, cov); the chain laws and divergences below are
/// exact for these.
#[pyclass(frozen, skip_from_py_object)]
struct GaussianLaw {
    inner: analytics::GaussianLaw,
}

#[pymethods]
impl GaussianLaw {
    #[new]
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = analytics::GaussianLaw::new(to_vector(mean), to_matrix(cov)?).map_err(err)?;
        Ok(GaussianLaw { inner })
    }

    #[staticmethod]
    fn point(x: Vec<f64>) -> Self {
        GaussianLaw { inner: analytics::GaussianLaw::point(to_vector(x)) }
    }

    #[staticmethod]
    fn isotropic(mean: Vec<f64>, variance: f64) -> PyResult<Self> {
        let inner = analytics::GaussianLaw::isotropic(to_vector(mean), variance).map_err(err)?;
        Ok(GaussianLaw { inner })
    }

    #[staticmethod]
    fn standard(dim: usize) -> Self {
        GaussianLaw { inner: analytics::GaussianLaw::standard(dim) }
    }

    /// The normalized target π ∝ exp(−U) of a quadratic potential.
    #[staticmethod]
    fn target_of(h: &Quadratic) -> PyResult<Self> {
        let inner = analytics::GaussianLaw::target_of(&h.inner).map_err(err)?;
        Ok(GaussianLaw { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean().as_slice().to_vec()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.cov())
    }

    /// E‖X − x‖².
    fn second_moment_about(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected a vector of length {}, got {}",
                self.inner.dim(),
                x.len()
            )));
        }
        Ok(self.inner.second_moment_about(&to_vector(x)))
    }

    fn __repr__(&self) -> String {
        format!("GaussianLaw(dim={})", self.inner.dim())
    }
}

/// Step-size and averaging-weight schedule for a chain.
#[pyclass(frozen, skip_from_py_object, name = "StepPlan")]
struct PyStepPlan {
    inner: schedules::StepPlan,
}

#[pymethods]
impl PyStepPlan {
    #[staticmethod]
    fn constant(gamma: f64) -> PyResult<Self> {
        Ok(PyStepPlan { inner: schedules::StepPlan::constant(gamma).map_err(err)? })
    }

    /// γ_k = γ₁ / k^α.
    #[staticmethod]
    fn polynomial(gamma1: f64, alpha: f64) -> PyResult<Self> {
        Ok(PyStepPlan { inner: schedules::StepPlan::polynomial(gamma1, alpha).map_err(err)? })
    }

    #[staticmethod]
    fn piecewise(gamma1: f64, switch_step: usize, gamma2: f64) -> PyResult<Self> {
        Ok(PyStepPlan { inner: schedules::StepPlan::piecewise(gamma1, switch_step, gamma2).map_err(err)? })
    }

    fn with_burn_in(&self, burn_in: usize) -> Self {
        PyStepPlan { inner: self.inner.clone().with_burn_in(burn_in) }
    }

    #[getter]
    fn burn_in(&self) -> usize {
        self.inner.burn_in()
    }

    /// Step size at iteration k (1-indexed).
    fn gamma(&self, k: usize) -> f64 {
        self.inner.gamma(k)
    }

    fn max_gamma(&self) -> f64 {
        self.inner.max_gamma()
    }
}

#[pyfunction]
fn w2_squared(a: &GaussianLaw, b: &GaussianLaw) -> f64 {
    analytics::w2_squared(&a.inner, &b.inner)
}

#[pyfunction]
fn w2_distance(a: &GaussianLaw, b: &GaussianLaw) -> f64 {
    analytics::w2_distance(&a.inner, &b.inner)
}

#[pyfunction]
fn kl_divergence(a: &GaussianLaw, b: &GaussianLaw) -> PyResult<f64> {
    analytics::kl_divergence(&a.inner, &b.inner).map_err(err)
}

/// ℱ(μ) − ℱ(π) for the normalized target of `h`; equals KL(μ‖π).
#[pyfunction]
fn free_energy_gap(h: &Quadratic, mu: &GaussianLaw) -> PyResult<f64> {
    analytics::free_energy_gap(&h.inner, &mu.inner).map_err(err)
}

/// Law after one unadjusted step of size γ started from `mu`.
#[pyfunction]
fn ula_transition(h: &Quadratic, gamma: f64, mu: &GaussianLaw) -> PyResult<GaussianLaw> {
    let inner = analytics::ula_transition(&h.inner, gamma, &mu.inner).map_err(err)?;
    Ok(GaussianLaw { inner })
}

/// Law after k unadjusted steps of size γ started from `mu0`.
#[pyfunction]
fn ula_law(h: &Quadratic, gamma: f64, k: usize, mu0: &GaussianLaw) -> PyResult<GaussianLaw> {
    let inner = analytics::ula_law(&h.inner, gamma, k, &mu0.inner).map_err(err)?;
    Ok(GaussianLaw { inner })
}

/// Stationary law π_γ of the size-γ unadjusted chain.
#[pyfunction]
fn ula_stationary(h: &Quadratic, gamma: f64) -> PyResult<GaussianLaw> {
    let inner = analytics::ula_stationary(&h.inner, gamma).map_err(err)?;
    Ok(GaussianLaw { inner })
}

/// Exact one-step audit of the free-energy descent inequality at (h, γ, mu).
///
/// Keys: descent_lhs, descent_rhs, descent_margin, heat_energy_gain,
/// heat_energy_trace, heat_energy_cap, entropy_flow_margin. The inequality
/// holds iff descent_margin ≥ 0.
#[pyfunction]
fn one_step_report(py: Python<'_>, h: &Quadratic, gamma: f64, mu: &GaussianLaw) -> PyResult<Py<PyAny>> {
    let r = analytics::one_step_report(&h.inner, gamma, &mu.inner).map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("descent_lhs", r.descent_lhs)?;
    dict.set_item("descent_rhs", r.descent_rhs)?;
    dict.set_item("descent_margin", r.descent_margin)?;
    dict.set_item("heat_energy_gain", r.heat_energy_gain)?;
    dict.set_item("heat_energy_trace", r.heat_energy_trace)?;
    dict.set_item("heat_energy_cap", r.heat_energy_cap)?;
    dict.set_item("entropy_flow_margin", r.entropy_flow_margin)?;
    dict.into_py_any(py)
}

#[pyfunction]
fn pinsker_tv_bound(kl: f64) -> f64 {
    analytics::pinsker_tv_bound(kl)
}

/// Exact squared W₂ between the empirical measures of two 1-D samples.
#[pyfunction]
fn empirical_w2_squared(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    let a = analytics::Empirical1d::uniform(xs).map_err(err)?;
    let b = analytics::Empirical1d::uniform(ys).map_err(err)?;
    Ok(a.w2_squared_to(&b))
}

/// Step size and iteration count that reach accuracy ε under `rule`.
///
/// Rules are named as in the CLI (`ula-strong-w2`, `ula-convex-kl`, ...);
/// `constants` is a dict of the problem constants the rule needs, always
/// including `dim`.
#[pyfunction]
fn tune(py: Python<'_>, rule: &str, constants: HashMap<String, f64>, epsilon: f64) -> PyResult<Py<PyAny>> {
    let rule: bounds::TuneRule = rule.parse().map_err(err)?;
    let c = constants_from(constants)?;
    let report = bounds::tune(rule, &c, epsilon).map_err(err)?;
    report_to_py(py, &report)
}

/// Right-hand side of a convergence theorem after `horizon` iterations.
///
/// Stochastic-gradient theorems need the oracle variance: pass either a
/// uniform `variance_cap` or a per-iteration `variance_series`.
#[pyfunction]
#[pyo3(signature = (theorem, constants, plan, horizon, variance_cap = None, variance_series = None))]
fn bound_rhs(
    py: Python<'_>,
    theorem: &str,
    constants: HashMap<String, f64>,
    plan: &PyStepPlan,
    horizon: usize,
    variance_cap: Option<f64>,
    variance_series: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    if variance_cap.is_some() && variance_series.is_some() {
        return Err(PyValueError::new_err("pass variance_cap or variance_series, not both"));
    }
    let theorem: bounds::TheoremRhs = theorem.parse().map_err(err)?;
    let c = constants_from(constants)?;
    let series = variance_series;
    let variance = variance_cap
        .map(bounds::VarianceInput::UniformCap)
        .or_else(|| series.as_deref().map(bounds::VarianceInput::Series));
    let report = bounds::bound_rhs(theorem, &c, &plan.inner, horizon, variance).map_err(err)?;
    report_to_py(py, &report)
}

/// Uniform second-moment bound sup_k E‖X_k − x⋆‖² for admissible plans.
#[pyfunction]
fn moment_bound(constants: HashMap<String, f64>) -> PyResult<f64> {
    let c = constants_from(constants)?;
    bounds::moment_bound(&c).map_err(err)
}

/// Run one chain on the target ½ xᵀHx + a₁‖x‖₁ and return its weighted
/// ergodic averages.
///
/// `kind` is one of `ula`, `ssgld`, `spgld`, `prox-mala`. The stochastic
/// samplers use the full (sub)gradient here; minibatch oracles live in the
/// benchmark harness. Estimates cover the first coordinate and ‖x‖²; `thin`
/// stores every thin-th iterate in `trace`.
#[pyfunction]
#[pyo3(signature = (kind, quadratic, plan, iterations, seed, *, a1 = 0.0, stream = 0, x0 = None, thin = None))]
#[allow(clippy::too_many_arguments)]
fn sample(
    py: Python<'_>,
    kind: &str,
    quadratic: &Quadratic,
    plan: &PyStepPlan,
    iterations: usize,
    seed: u64,
    a1: f64,
    stream: u64,
    x0: Option<Vec<f64>>,
    thin: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let kind: samplers::SamplerKind = kind.parse().map_err(err)?;
    let dim = quadratic.inner.dim();
    let smooth: Arc<dyn SmoothPotential> = Arc::new(quadratic.inner.clone());
    let potential = if a1 > 0.0 {
        let l1 = model::L1Term::new(dim, a1).map_err(err)?;
        model::CompositePotential::composite(Arc::clone(&smooth), Arc::new(l1)).map_err(err)?
    } else {
        model::CompositePotential::smooth(Arc::clone(&smooth))
    };
    let potential = Arc::new(potential);

    let x0 = match x0 {
        Some(x) => {
            quadratic.check(&x)?;
            to_vector(x)
        }
        None => DVector::zeros(dim),
    };
    let mut config = samplers::RunConfig::new(kind, plan.inner.clone(), iterations, seed, x0);
    config.stream = stream;
    config.thin = thin;
    config.functionals = vec![
        samplers::Functional::first_coordinate(),
        samplers::Functional::mean_square(),
    ];

    let oracle: Option<Arc<dyn oracles::GradientEstimator>> = match kind {
        samplers::SamplerKind::Ssgld => Some(Arc::new(oracles::FullSubgradient(Arc::clone(&potential)))),
        samplers::SamplerKind::Spgld => Some(Arc::new(oracles::FullGradient(smooth))),
        _ => None,
    };
    let out = samplers::run_chain(&config, potential, oracle).map_err(err)?;

    let estimates = PyDict::new(py);
    for e in &out.estimates {
        estimates.set_item(e.name.as_str(), e.estimate)?;
    }
    let trace = PyList::empty(py);
    for (k, x) in &out.trace {
        trace.append((*k, x.as_slice().to_vec()))?;
    }
    let dict = PyDict::new(py);
    dict.set_item("estimates", estimates)?;
    dict.set_item("effective_passes", out.effective_passes)?;
    dict.set_item("accept_rate", out.accept_rate)?;
    dict.set_item("trace", trace)?;
    dict.set_item("warnings", out.warnings)?;
    dict.into_py_any(py)
}

#[pymodule]
fn pylangevin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Quadratic>()?;
    m.add_class::<GaussianLaw>()?;
    m.add_class::<PyStepPlan>()?;
    m.add_function(wrap_pyfunction!(w2_squared, m)?)?;
    m.add_function(wrap_pyfunction!(w2_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(free_energy_gap, m)?)?;
    m.add_function(wrap_pyfunction!(ula_transition, m)?)?;
    m.add_function(wrap_pyfunction!(ula_law, m)?)?;
    m.add_function(wrap_pyfunction!(ula_stationary, m)?)?;
    m.add_function(wrap_pyfunction!(one_step_report, m)?)?;
    m.add_function(wrap_pyfunction!(pinsker_tv_bound, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_w2_squared, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    m.add_function(wrap_pyfunction!(bound_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(moment_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    Ok(())
}
