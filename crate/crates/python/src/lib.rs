//! Python bindings: offspring laws, progeny models, rate functions and the
//! Monte Carlo decay-rate estimator.

use ldp::montecarlo::{self, LdpScenario, Threshold, ThresholdKind, DEFAULT_POPULATION_CAP};
use ldp::offspring::{DistSpec, Pmf};
use ldp::progeny::{self, ProgenyModel};
use ldp::ratefn::{self, RateFunction, RateKind, Route};
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: ldp::Error) -> PyErr {
    match e {
        ldp::Error::Convergence(_) => PyArithmeticError::new_err(e.to_string()),
        ldp::Error::CapExceeded { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A probability law on the nonnegative integers.
#[pyclass(name = "Pmf", module = "progeny_ldp_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPmf {
    spec: DistSpec,
    inner: Pmf,
}

impl PyPmf {
    fn from_spec(spec: DistSpec) -> PyResult<Self> {
        let inner = spec.build().map_err(to_py)?;
        Ok(Self { spec, inner })
    }
}

#[pymethods]
impl PyPmf {
    #[staticmethod]
    fn bernoulli(p: f64) -> PyResult<Self> {
        Self::from_spec(DistSpec::bernoulli(p))
    }

    #[staticmethod]
    #[pyo3(signature = (a, truncation_k = 200))]
    fn geometric(a: f64, truncation_k: usize) -> PyResult<Self> {
        Self::from_spec(DistSpec::geometric(a, truncation_k))
    }

    #[staticmethod]
    #[pyo3(signature = (lam, truncation_k = 100))]
    fn poisson(lam: f64, truncation_k: usize) -> PyResult<Self> {
        Self::from_spec(DistSpec::poisson(lam, truncation_k))
    }

    /// Law given by `{support: probability}`.
    #[staticmethod]
    fn explicit(probs: std::collections::BTreeMap<u64, f64>) -> PyResult<Self> {
        let pairs: Vec<(u64, f64)> = probs.into_iter().collect();
        Self::from_spec(DistSpec::explicit(&pairs))
    }

    fn pgf(&self, s: f64) -> PyResult<f64> {
        self.inner.pgf(s).map_err(to_py)
    }

    fn cgf(&self, theta: f64) -> f64 {
        self.inner.cgf(theta)
    }

    fn mean(&self) -> f64 {
        self.inner.exact_mean()
    }

    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    fn deficit(&self) -> f64 {
        self.inner.deficit()
    }

    fn __repr__(&self) -> String {
        format!("Pmf({:?}, mean={})", self.inner.family().tag(), self.inner.exact_mean())
    }
}

/// Offspring law `f` with initial-population law `g`.
#[pyclass(name = "ProgenyModel", module = "progeny_ldp_py", frozen)]
struct PyModel {
    f: DistSpec,
    g: DistSpec,
    inner: ProgenyModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (f, g = None))]
    fn new(f: &PyPmf, g: Option<&PyPmf>) -> PyResult<Self> {
        let g = match g {
            Some(g) => g.clone(),
            None => PyPmf::from_spec(DistSpec::explicit(&[(1, 1.0)]))?,
        };
        let inner = ProgenyModel::new(f.inner.clone(), g.inner.clone()).map_err(to_py)?;
        Ok(Self { f: f.spec.clone(), g: g.spec, inner })
    }

    #[getter]
    fn mu_f(&self) -> f64 {
        self.inner.mu_f()
    }

    #[getter]
    fn mu_g(&self) -> f64 {
        self.inner.mu_g()
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.inner.nu()
    }

    #[getter]
    fn extinction_probability(&self) -> f64 {
        self.inner.p_ext()
    }

    /// Rate function value. `kind` is one of offspring, initial, progeny,
    /// progeny-compound, estimator-ratio, estimator-deterministic,
    /// estimator-meaninit; `route` one of closed, direct, oracle.
    #[pyo3(signature = (kind, x, route = None))]
    fn rate(&self, kind: &str, x: f64, route: Option<&str>) -> PyResult<f64> {
        let kind = parse_kind(kind)?;
        let route = match route {
            Some(r) => parse_route(r)?,
            None => RateFunction::default_route(kind),
        };
        let rf = RateFunction::new(&self.inner, kind, route).map_err(to_py)?;
        Ok(rf.eval(x).map_err(to_py)?.value)
    }

    /// Joint rate of (mean total progeny, mean initial population).
    #[pyo3(signature = (y, z, oracle = false))]
    fn rate_bivariate(&self, y: f64, z: f64, oracle: bool) -> PyResult<f64> {
        let v = if oracle {
            ratefn::rate_bivariate_oracle(&self.inner, y, z)
        } else {
            ratefn::rate_bivariate(&self.inner, y, z)
        };
        Ok(v.map_err(to_py)?.value)
    }

    /// Rows of the random- versus deterministic-start comparison as dicts.
    fn compare_rates<'py>(&self, py: Python<'py>, xs: Vec<f64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let table = ratefn::compare_rates(&self.inner, &xs).map_err(to_py)?;
        table
            .rows
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("x", r.x)?;
                d.set_item("J_random", r.j_random)?;
                d.set_item("J_diamond", r.j_diamond)?;
                d.set_item("I_f", r.i_f)?;
                d.set_item("leq_ok", r.leq_ok)?;
                d.set_item("strict", r.strict)?;
                Ok(d)
            })
            .collect()
    }

    /// Law of the total progeny up to `k_max`.
    fn progeny_pmf(&self, k_max: usize) -> PyResult<Vec<f64>> {
        let pmf = progeny::compound_progeny_pmf(&self.inner, k_max).map_err(to_py)?;
        Ok((0..=k_max).map(|k| pmf.prob(k)).collect())
    }

    fn total_progeny_pgf(&self, s: f64) -> PyResult<f64> {
        progeny::total_progeny_pgf(self.inner.f(), s).map_err(to_py)
    }

    /// Empirical decay rate of `{mean_ge, mean_le, estimator_dev}` events.
    #[pyo3(signature = (kind, level, n_schedule, trials, seed = 0))]
    fn empirical_rate<'py>(
        &self,
        py: Python<'py>,
        kind: &str,
        level: f64,
        n_schedule: Vec<u64>,
        trials: u64,
        seed: u64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let kind = match kind {
            "mean_ge" => ThresholdKind::MeanGe,
            "mean_le" => ThresholdKind::MeanLe,
            "estimator_dev" => ThresholdKind::EstimatorDev,
            other => return Err(PyValueError::new_err(format!("unknown event kind {other:?}"))),
        };
        let threshold = Threshold { kind, level };
        let scenario = LdpScenario {
            f: self.f.clone(),
            g: self.g.clone(),
            n_schedule,
            trials,
            thresholds: vec![threshold],
            master_seed: seed,
            population_cap: DEFAULT_POPULATION_CAP,
        };
        let rates = py.detach(|| montecarlo::empirical_rate(&scenario, &threshold)).map_err(to_py)?;
        let reference = montecarlo::reference_rate(&self.inner, &threshold).map_err(to_py)?;
        rates
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("n", r.n)?;
                d.set_item("hits", r.hits)?;
                d.set_item("trials", r.trials)?;
                d.set_item("rate_estimate", r.rate_estimate)?;
                d.set_item("ci_halfwidth", r.ci_halfwidth)?;
                d.set_item("reference_rate", reference)?;
                d.set_item("censored", r.censored)?;
                Ok(d)
            })
            .collect()
    }
}

fn parse_kind(s: &str) -> PyResult<RateKind> {
    Ok(match s {
        "offspring" => RateKind::Offspring,
        "initial" => RateKind::Initial,
        "progeny" => RateKind::Progeny,
        "progeny-compound" => RateKind::ProgenyCompound,
        "estimator-ratio" => RateKind::EstimatorRatio,
        "estimator-deterministic" => RateKind::EstimatorDeterministic,
        "estimator-meaninit" => RateKind::EstimatorMeaninit,
        other => return Err(PyValueError::new_err(format!("unknown rate kind {other:?}"))),
    })
}

fn parse_route(s: &str) -> PyResult<Route> {
    Ok(match s {
        "closed" => Route::Closed,
        "direct" => Route::Direct,
        "oracle" => Route::Oracle,
        other => return Err(PyValueError::new_err(format!("unknown route {other:?}"))),
    })
}

/// Extinction probability of a single-ancestor lineage with offspring law `f`.
#[pyfunction]
fn extinction_probability(f: &PyPmf) -> PyResult<f64> {
    progeny::extinction_probability(&f.inner).map_err(to_py)
}

/// Total-progeny law `pi_k = (1/k) P(S_k = k - 1)` for `k <= k_max`.
#[pyfunction]
fn total_progeny_pmf(f: &PyPmf, k_max: usize) -> PyResult<Vec<f64>> {
    let pmf = progeny::total_progeny_pmf_dwass(&f.inner, k_max).map_err(to_py)?;
    Ok((0..=k_max).map(|k| pmf.prob(k)).collect())
}

/// Offspring rate function `I_f(x)`.
#[pyfunction]
fn rate_offspring(f: &PyPmf, x: f64) -> PyResult<f64> {
    Ok(ratefn::rate_offspring(&f.inner, x).map_err(to_py)?.value)
}

#[pymodule]
fn progeny_ldp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPmf>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(extinction_probability, m)?)?;
    m.add_function(wrap_pyfunction!(total_progeny_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(rate_offspring, m)?)?;
    Ok(())
}
