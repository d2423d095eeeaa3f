//! Python bindings. Reports come back as plain dicts and lists.

use noisecrn::limits::{self, ScalingConfig};
use noisecrn::lyapunov::{self, ScanRegion};
use noisecrn::ode::{self, FlowState, OdeOptions};
use noisecrn::simulate::{self, RngStream};
use noisecrn::{Aperture, ChainKind, LatticeState, StoppingCondition};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyList;
use serde::Serialize;

fn err(e: noisecrn::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes through JSON into native Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn chain(name: &str) -> PyResult<ChainKind> {
    match name {
        "X" | "x" => Ok(ChainKind::X),
        "Y" | "y" => Ok(ChainKind::Y),
        "Z" | "z" => Ok(ChainKind::Z),
        _ => Err(PyValueError::new_err(format!("unknown chain '{name}', expected X, Y or Z"))),
    }
}

fn state(x: (u64, u64)) -> LatticeState {
    LatticeState::new(x.0, x.1)
}

#[pyclass(name = "PartitionParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyPartitionParams {
    inner: noisecrn::PartitionParams,
}

#[pymethods]
impl PyPartitionParams {
    /// `p` is a fraction string such as "1/30" or a float.
    #[new]
    #[pyo3(signature = (p = None, eta0 = 4.0, eta1 = 60.0, beta = 1.0))]
    fn new(p: Option<&Bound<'_, PyAny>>, eta0: f64, eta1: f64, beta: f64) -> PyResult<Self> {
        let aperture = match p {
            None => Aperture::from_ratio(1, 30),
            Some(v) => match v.extract::<String>() {
                Ok(s) => Aperture::parse(&s),
                Err(_) => Aperture::from_f64(v.extract::<f64>()?),
            },
        }
        .map_err(err)?;
        let inner = noisecrn::PartitionParams::new(aperture, eta0, eta1, beta).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn p_exact(&self) -> String {
        self.inner.p.to_string()
    }

    #[getter]
    fn eta0(&self) -> f64 {
        self.inner.eta0
    }

    #[getter]
    fn eta1(&self) -> f64 {
        self.inner.eta1
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    /// Violated structural constraints; empty when all hold.
    fn violations(&self) -> Vec<String> {
        self.inner.violations()
    }

    fn classify(&self, x: (u64, u64)) -> String {
        noisecrn::classify(state(x), &self.inner).to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "PartitionParams(p={}, eta0={}, eta1={}, beta={})",
            self.inner.p, self.inner.eta0, self.inner.eta1, self.inner.beta
        )
    }
}

fn params(p: Option<&PyPartitionParams>) -> noisecrn::PartitionParams {
    p.map(|p| p.inner).unwrap_or_default()
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: noisecrn::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn chain(&self) -> String {
        format!("{:?}", self.inner.chain)
    }

    #[getter]
    fn initial(&self) -> (u64, u64) {
        (self.inner.initial.x1, self.inner.initial.x2)
    }

    /// Event times, not including the start at 0.
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.events.iter().map(|e| e.t).collect()
    }

    /// States after each event.
    #[getter]
    fn states(&self) -> Vec<(u64, u64)> {
        self.inner.events.iter().map(|e| (e.state.x1, e.state.x2)).collect()
    }

    #[getter]
    fn reactions(&self) -> Vec<usize> {
        self.inner.events.iter().map(|e| e.reaction).collect()
    }

    #[getter]
    fn final_time(&self) -> f64 {
        self.inner.final_time
    }

    #[getter]
    fn final_state(&self) -> (u64, u64) {
        let x = self.inner.final_state();
        (x.x1, x.x2)
    }

    #[getter]
    fn stop<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.stop)
    }

    fn state_at(&self, t: f64) -> (u64, u64) {
        let x = self.inner.state_at(t);
        (x.x1, x.x2)
    }

    /// Excursions above `hi` that close below `lo`.
    fn excursions<'py>(&self, py: Python<'py>, lo: f64, hi: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &simulate::excursion_scan(&self.inner, lo, hi).map_err(err)?)
    }

    /// Writes the `t,x1,x2,reaction` CSV to `path`.
    fn to_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path)?;
        self.inner.write_csv(std::io::BufWriter::new(file), &[])?;
        Ok(())
    }

    fn __len__(&self) -> usize {
        self.inner.events.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(chain={:?}, events={}, final_time={}, stop={:?})",
            self.inner.chain,
            self.inner.events.len(),
            self.inner.final_time,
            self.inner.stop
        )
    }
}

#[pyfunction]
fn falling_factorial(y: u64, p: u32) -> PyResult<u128> {
    noisecrn::falling_factorial(y, p).map_err(err)
}

#[pyfunction]
fn propensities(chain_name: &str, x: (u64, u64)) -> PyResult<Vec<f64>> {
    Ok(noisecrn::propensities(chain(chain_name)?, state(x)).map_err(err)?.to_vec())
}

#[pyfunction]
fn jump_targets(chain_name: &str, x: (u64, u64)) -> PyResult<Vec<((u64, u64), f64)>> {
    let targets = noisecrn::jump_targets(chain(chain_name)?, state(x)).map_err(err)?;
    Ok(targets.into_iter().map(|(y, r)| ((y.x1, y.x2), r)).collect())
}

/// `sum_y q(x, y) (f(y) - f(x))` with `f` a Python callable of `(x1, x2)`.
#[pyfunction]
fn apply_generator(chain_name: &str, f: &Bound<'_, PyAny>, x: (u64, u64)) -> PyResult<f64> {
    let system = noisecrn::ReactionSystem::new(chain(chain_name)?);
    let eval = |y: LatticeState| -> PyResult<f64> { f.call1((y.x1, y.x2))?.extract() };
    let fx = eval(state(x))?;
    let mut total = 0.0;
    for (y, rate) in system.jump_targets(state(x)).map_err(err)? {
        total += rate * (eval(y)? - fx);
    }
    Ok(total)
}

#[pyfunction]
#[pyo3(signature = (x, params = None))]
fn energy(x: (f64, f64), params: Option<&PyPartitionParams>) -> f64 {
    noisecrn::energy(x, &self::params(params))
}

#[pyfunction]
#[pyo3(signature = (x, params = None))]
fn drift(x: (u64, u64), params: Option<&PyPartitionParams>) -> f64 {
    noisecrn::drift(state(x), &self::params(params))
}

#[pyfunction]
#[pyo3(signature = (r_lo, r_hi, gamma = 1.0, region = "outside_interior_cone", params = None, max_listed = 1000))]
fn verify_drift<'py>(
    py: Python<'py>,
    r_lo: u64,
    r_hi: u64,
    gamma: f64,
    region: &str,
    params: Option<&PyPartitionParams>,
    max_listed: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let region: ScanRegion = from_py(py, &region.into_pyobject(py)?.into_any())?;
    let p = self::params(params);
    let mut report = py.detach(|| lyapunov::verify_drift_region(region, r_lo, r_hi, gamma, &p));
    report.truncate_violations(max_listed);
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (r_lo, r_hi, params = None, max_listed = 1000))]
fn verify_interface_ordering<'py>(
    py: Python<'py>,
    r_lo: u64,
    r_hi: u64,
    params: Option<&PyPartitionParams>,
    max_listed: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let p = self::params(params);
    let mut report = py.detach(|| lyapunov::verify_interface_ordering(r_lo, r_hi, &p));
    report.violations.truncate(max_listed);
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (eps0, horizon, params = None))]
fn check_cond_const<'py>(
    py: Python<'py>,
    eps0: f64,
    horizon: f64,
    params: Option<&PyPartitionParams>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &lyapunov::check_cond_const(eps0, horizon, &self::params(params)))
}

/// Exact simulation. `stops` is a list of dicts such as
/// `{"kind": "time", "t": 10}` or `{"kind": "norm_above", "m": 200}`.
#[pyfunction]
#[pyo3(signature = (chain_name, x0, stops, seed, stream = 0, params = None))]
fn ssa_run(
    py: Python<'_>,
    chain_name: &str,
    x0: (u64, u64),
    stops: &Bound<'_, PyList>,
    seed: u64,
    stream: u64,
    params: Option<&PyPartitionParams>,
) -> PyResult<PyTrajectory> {
    let conditions: Vec<StoppingCondition> = from_py(py, stops.as_any())?;
    let kind = chain(chain_name)?;
    let stops = simulate::Stops::new(&conditions, self::params(params)).map_err(err)?;
    if stops.time_budget().is_none() && stops.event_budget().is_none() {
        return Err(PyValueError::new_err("stops need a time or events budget"));
    }
    let rng = RngStream::new(seed, stream).rng();
    let inner = py
        .detach(|| simulate::run(noisecrn::ReactionSystem::new(kind), state(x0), &stops, rng))
        .map_err(err)?;
    Ok(PyTrajectory { inner })
}

#[pyfunction]
#[pyo3(signature = (x0, horizon, rtol = 1e-8, output_dt = None))]
fn integrate_ode<'py>(
    py: Python<'py>,
    x0: (f64, f64),
    horizon: f64,
    rtol: f64,
    output_dt: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = OdeOptions { output_dt, ..OdeOptions::default().with_rtol(rtol) };
    let sol = ode::integrate(FlowState::new(x0.0, x0.1), horizon, &opts).map_err(err)?;
    to_py(py, &sol)
}

#[pyfunction]
fn blow_up_time(f0: f64) -> PyResult<(f64, f64)> {
    ode::blow_up_time(f0).map_err(err)
}

#[pyfunction]
fn equilibria<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &ode::equilibria())
}

#[pyfunction]
#[pyo3(signature = (n, horizon, replicas, seed, params = None))]
fn coupling_experiment<'py>(
    py: Python<'py>,
    n: u64,
    horizon: f64,
    replicas: u64,
    seed: u64,
    params: Option<&PyPartitionParams>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = self::params(params);
    let report = py.detach(|| simulate::coupling_experiment(n, horizon, replicas, seed, &p)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (n, horizon, replicas, seed, d_n = 0, eta1 = 60.0))]
fn scaling_experiment<'py>(
    py: Python<'py>,
    n: u64,
    horizon: f64,
    replicas: u64,
    seed: u64,
    d_n: i64,
    eta1: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ScalingConfig::new(n, d_n, horizon, replicas, eta1);
    let report = py.detach(|| limits::scaling_experiment(&cfg, seed)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (d0, eta1, replicas, seed, dt = 1e-3, max_time = 20.0))]
fn ou_hitting_mc<'py>(
    py: Python<'py>,
    d0: f64,
    eta1: f64,
    replicas: u64,
    seed: u64,
    dt: f64,
    max_time: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| limits::ou_hitting_mc(d0, eta1, replicas, dt, max_time, seed)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn hitting_tail_bound(s: f64, eta1: f64) -> f64 {
    limits::hitting_tail_bound(s, eta1)
}

#[pyfunction]
fn c_tau() -> f64 {
    limits::c_tau()
}

#[pyfunction]
fn k0() -> f64 {
    limits::k0()
}

#[pymodule]
fn noisecrn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPartitionParams>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(falling_factorial, m)?)?;
    m.add_function(wrap_pyfunction!(propensities, m)?)?;
    m.add_function(wrap_pyfunction!(jump_targets, m)?)?;
    m.add_function(wrap_pyfunction!(apply_generator, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(drift, m)?)?;
    m.add_function(wrap_pyfunction!(verify_drift, m)?)?;
    m.add_function(wrap_pyfunction!(verify_interface_ordering, m)?)?;
    m.add_function(wrap_pyfunction!(check_cond_const, m)?)?;
    m.add_function(wrap_pyfunction!(ssa_run, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_ode, m)?)?;
    m.add_function(wrap_pyfunction!(blow_up_time, m)?)?;
    m.add_function(wrap_pyfunction!(equilibria, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(ou_hitting_mc, m)?)?;
    m.add_function(wrap_pyfunction!(hitting_tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(c_tau, m)?)?;
    m.add_function(wrap_pyfunction!(k0, m)?)?;
    Ok(())
}
