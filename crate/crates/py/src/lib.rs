//! Python bindings: parameters, run configs, the discrete model and the
//! analysis helpers.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use thermobeam::analysis::fit_decay_exponent as fit_decay;
use thermobeam::io::{self, Command, RunConfig, RunOptions};
use thermobeam::spectral::{self, EnergyResolvent};
use thermobeam::{DofMap, EnergyTrace, Error, Generator, Mesh, StateVector};

fn py_err(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Material and geometry coefficients.
#[pyclass(name = "PhysicalParams", from_py_object, get_all, set_all)]
#[derive(Debug, Clone, Copy)]
pub struct PyParams {
    rho1: f64,
    rho2: f64,
    alpha1: f64,
    alpha2: f64,
    beta1: f64,
    beta2: f64,
    rho0: f64,
    kappa: f64,
    gamma: f64,
    l0: f64,
    l: f64,
}

impl From<PyParams> for thermobeam::PhysicalParams {
    fn from(p: PyParams) -> Self {
        Self {
            rho1: p.rho1,
            rho2: p.rho2,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            beta1: p.beta1,
            beta2: p.beta2,
            rho0: p.rho0,
            kappa: p.kappa,
            gamma: p.gamma,
            l0: p.l0,
            l: p.l,
        }
    }
}

impl From<thermobeam::PhysicalParams> for PyParams {
    fn from(p: thermobeam::PhysicalParams) -> Self {
        Self {
            rho1: p.rho1,
            rho2: p.rho2,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            beta1: p.beta1,
            beta2: p.beta2,
            rho0: p.rho0,
            kappa: p.kappa,
            gamma: p.gamma,
            l0: p.l0,
            l: p.l,
        }
    }
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (rho1=1.0, rho2=1.0, alpha1=1.0, alpha2=1.0, beta1=1.0, beta2=1.0, rho0=1.0, kappa=1.0, gamma=1.0, l0=0.5, l=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        rho1: f64,
        rho2: f64,
        alpha1: f64,
        alpha2: f64,
        beta1: f64,
        beta2: f64,
        rho0: f64,
        kappa: f64,
        gamma: f64,
        l0: f64,
        l: f64,
    ) -> Self {
        Self { rho1, rho2, alpha1, alpha2, beta1, beta2, rho0, kappa, gamma, l0, l }
    }

    /// Violation messages; warnings are prefixed with "warning: ".
    fn validate(&self) -> Vec<String> {
        thermobeam::PhysicalParams::from(*self)
            .validate()
            .into_iter()
            .map(|v| match v.severity {
                thermobeam::model::Severity::Warning => format!("warning: {}", v.message),
                thermobeam::model::Severity::Error => v.message,
            })
            .collect()
    }

    /// `(tag, ell)` with tag "FAST" or "SLOW".
    fn regime(&self) -> (String, u32) {
        regime_tuple(&(*self).into())
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&thermobeam::PhysicalParams::from(*self)).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "PhysicalParams(rho1={}, rho2={}, alpha1={}, alpha2={}, beta1={}, beta2={}, rho0={}, kappa={}, gamma={}, l0={}, l={})",
            self.rho1, self.rho2, self.alpha1, self.alpha2, self.beta1, self.beta2, self.rho0, self.kappa, self.gamma, self.l0, self.l
        )
    }
}

fn regime_tuple(p: &thermobeam::PhysicalParams) -> (String, u32) {
    let r = thermobeam::classify_regime(p);
    let tag = match r.tag {
        thermobeam::RegimeTag::Fast => "FAST",
        thermobeam::RegimeTag::Slow => "SLOW",
    };
    (tag.to_string(), r.ell)
}

/// A full run configuration (JSON-backed).
#[pyclass(name = "Config", from_py_object)]
#[derive(Debug, Clone)]
pub struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (json=None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(text) => RunConfig::from_json(text).map_err(py_err)?,
            None => RunConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: RunConfig::load(&path).map_err(py_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.canonical_json()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    /// Warnings for an acceptable config; raises on an invalid one.
    fn validate(&self) -> PyResult<Vec<String>> {
        self.inner.validate().map_err(py_err)
    }

    #[getter]
    fn params(&self) -> PyParams {
        self.inner.params.into()
    }

    #[setter]
    fn set_params(&mut self, p: PyParams) {
        self.inner.params = p.into();
    }

    #[getter]
    fn mesh(&self) -> (usize, usize) {
        (self.inner.mesh.n1, self.inner.mesh.n2)
    }

    #[setter]
    fn set_mesh(&mut self, mesh: (usize, usize)) {
        self.inner.mesh.n1 = mesh.0;
        self.inner.mesh.n2 = mesh.1;
    }

    /// `"clamped"` or `"pinned"`.
    #[getter]
    fn bc_mode(&self) -> &'static str {
        match self.inner.bc_mode {
            thermobeam::BcMode::Clamped => "clamped",
            thermobeam::BcMode::Pinned => "pinned",
        }
    }

    #[setter]
    fn set_bc_mode(&mut self, mode: &str) -> PyResult<()> {
        self.inner.bc_mode = match mode {
            "clamped" => thermobeam::BcMode::Clamped,
            "pinned" => thermobeam::BcMode::Pinned,
            other => return Err(PyValueError::new_err(format!("unknown bc mode {other:?}"))),
        };
        Ok(())
    }

    /// `(dt, horizon, sample_every)`.
    #[getter]
    fn time(&self) -> (f64, f64, usize) {
        let t = &self.inner.time;
        (t.dt, t.horizon, t.sample_every)
    }

    #[setter]
    fn set_time(&mut self, t: (f64, f64, usize)) {
        self.inner.time.dt = t.0;
        self.inner.time.horizon = t.1;
        self.inner.time.sample_every = t.2;
    }

    #[getter]
    fn outputs(&self) -> PathBuf {
        self.inner.outputs.clone()
    }

    #[setter]
    fn set_outputs(&mut self, dir: PathBuf) {
        self.inner.outputs = dir;
    }

    /// Runs a CLI command; returns `(files, summary)`.
    #[pyo3(signature = (command, threads=None))]
    fn run(&self, py: Python<'_>, command: &str, threads: Option<usize>) -> PyResult<(Vec<PathBuf>, String)> {
        let cmd: Command = command.parse().map_err(py_err)?;
        let cfg = self.inner.clone();
        let out = py
            .detach(move || io::run(cmd, &cfg, &RunOptions { threads }))
            .map_err(py_err)?;
        Ok((out.files, out.summary))
    }

    fn __repr__(&self) -> String {
        format!("Config(hash={})", self.inner.hash())
    }
}

/// The discretized system for one config: mesh, DOF map and generator.
/// States are flat lists `[q, p, th]`.
#[pyclass(name = "Model")]
pub struct PyModel {
    config: RunConfig,
    mesh: Mesh,
    dofmap: DofMap,
    gen: Generator,
}

impl PyModel {
    fn state(&self, flat: Vec<f64>) -> PyResult<StateVector> {
        StateVector::from_flat(&flat, self.gen.n_beam(), self.gen.n_heat()).map_err(py_err)
    }
}

fn flat(s: &StateVector) -> Vec<f64> {
    s.to_flat().iter().copied().collect()
}

fn trace_dict<'py>(py: Python<'py>, trace: &EnergyTrace) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("times", &trace.times)?;
    d.set_item("energies", &trace.energies)?;
    d.set_item("dissipations", &trace.dissipations)?;
    d.set_item("residuals", &trace.residuals)?;
    d.set_item("steps", trace.meta.steps)?;
    d.set_item("max_abs_balance_residual", trace.meta.max_abs_balance_residual)?;
    d.set_item("max_energy_increase", trace.meta.max_energy_increase)?;
    Ok(d)
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (config=None))]
    fn new(config: Option<PyConfig>) -> PyResult<Self> {
        let config = config.map(|c| c.inner).unwrap_or_default();
        config.validate().map_err(py_err)?;
        let (mesh, dofmap, gen) = config.generator().map_err(py_err)?;
        Ok(Self { config, mesh, dofmap, gen })
    }

    /// `(n_beam, n_heat)`; the state length is `2 n_beam + n_heat`.
    #[getter]
    fn dims(&self) -> (usize, usize) {
        (self.gen.n_beam(), self.gen.n_heat())
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.mesh.nodes().to_vec()
    }

    /// Projection of the config's initial data.
    fn initial_state(&self) -> PyResult<Vec<f64>> {
        let s = thermobeam::project_initial(&self.config.initial, &self.mesh, &self.dofmap).map_err(py_err)?;
        Ok(flat(&s))
    }

    fn apply(&self, state: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(flat(&self.gen.apply(&self.state(state)?).map_err(py_err)?))
    }

    /// Solves `A x = f`.
    fn solve(&self, rhs: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(flat(&self.gen.solve(&self.state(rhs)?).map_err(py_err)?))
    }

    fn energy(&self, state: Vec<f64>) -> PyResult<f64> {
        self.gen.energy(&self.state(state)?).map_err(py_err)
    }

    fn dissipation(&self, state: Vec<f64>) -> PyResult<f64> {
        self.gen.dissipation(&self.state(state)?).map_err(py_err)
    }

    /// Energy-metric inner product.
    fn inner(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
        self.gen.inner(&self.state(a)?, &self.state(b)?).map_err(py_err)
    }

    /// One Crank-Nicolson step.
    fn step(&self, state: Vec<f64>, dt: f64) -> PyResult<Vec<f64>> {
        Ok(flat(&thermobeam::step_cn(&self.gen, &self.state(state)?, dt).map_err(py_err)?))
    }

    /// Energy trace from the config's initial data (or `state`), with time
    /// settings from the config unless given.
    #[pyo3(signature = (state=None, dt=None, horizon=None, sample_every=None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        state: Option<Vec<f64>>,
        dt: Option<f64>,
        horizon: Option<f64>,
        sample_every: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let s0 = match state {
            Some(v) => self.state(v)?,
            None => thermobeam::project_initial(&self.config.initial, &self.mesh, &self.dofmap).map_err(py_err)?,
        };
        let t = &self.config.time;
        let (dt, horizon, every) = (dt.unwrap_or(t.dt), horizon.unwrap_or(t.horizon), sample_every.unwrap_or(t.sample_every));
        let gen = &self.gen;
        let trace = py
            .detach(|| thermobeam::simulate(gen, &s0, dt, horizon, every))
            .map_err(py_err)?;
        trace_dict(py, &trace)
    }

    /// Eigenvalues as `(re, im)` pairs, sorted by `|im|`.
    fn eigenvalues(&self, py: Python<'_>) -> PyResult<Vec<(f64, f64)>> {
        let gen = &self.gen;
        Ok(py.detach(|| spectral::eigenvalues(gen)).map_err(py_err)?.eigenvalues)
    }

    fn spectral_abscissa(&self, py: Python<'_>) -> PyResult<f64> {
        let gen = &self.gen;
        Ok(py.detach(|| spectral::eigenvalues(gen)).map_err(py_err)?.spectral_abscissa)
    }

    /// Undamped beam frequencies (the beam spectrum when gamma is zero).
    fn beam_frequencies(&self) -> PyResult<Vec<f64>> {
        spectral::beam_frequencies(&self.gen).map_err(py_err)
    }

    /// `||(i lambda - A)^-1||` in the energy norm.
    fn resolvent_norm(&self, lam: f64) -> PyResult<f64> {
        spectral::resolvent_norm(&self.gen, lam).map_err(py_err)
    }

    /// Resolvent scan; `ell` defaults to the regime classification.
    #[pyo3(signature = (grid, ell=None, threads=None))]
    fn resolvent_scan<'py>(
        &self,
        py: Python<'py>,
        grid: Vec<f64>,
        ell: Option<u32>,
        threads: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let ell = ell.unwrap_or_else(|| thermobeam::classify_regime(&self.config.params).ell);
        let gen = &self.gen;
        let scan = py
            .detach(|| spectral::resolvent_scan_with_threads(gen, &grid, ell, threads))
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("lambdas", &scan.lambdas)?;
        d.set_item("norms", &scan.norms)?;
        d.set_item("scaled", &scan.scaled)?;
        d.set_item("ell", scan.ell)?;
        d.set_item("skipped", &scan.skipped)?;
        Ok(d)
    }

    /// Smallest and largest singular values of `i lambda - A` in energy
    /// coordinates.
    fn singular_range(&self, lam: f64) -> PyResult<(f64, f64)> {
        EnergyResolvent::new(&self.gen)
            .and_then(|r| r.singular_range(lam))
            .map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (rho, alpha, beta, span, n=1))]
fn rayleigh_dispersion(rho: f64, alpha: f64, beta: f64, span: f64, n: u32) -> PyResult<f64> {
    thermobeam::rayleigh_dispersion(rho, alpha, beta, span, n).map_err(py_err)
}

#[pyfunction]
fn classify_regime(params: PyParams) -> (String, u32) {
    regime_tuple(&params.into())
}

/// Log-log decay fit; returns `(alpha, intercept, residual, samples)`.
#[pyfunction]
fn fit_decay_exponent(times: Vec<f64>, energies: Vec<f64>, window: (f64, f64)) -> PyResult<(f64, f64, f64, usize)> {
    let trace = EnergyTrace::from_samples(times, energies).map_err(py_err)?;
    let fit = fit_decay(&trace, window).map_err(py_err)?;
    Ok((fit.alpha, fit.intercept, fit.residual, fit.samples))
}

/// Slope of `log(-re)` against `log(im)`; returns `(slope, intercept, residual, points)`.
#[pyfunction]
fn branch_fit(eigenvalues: Vec<(f64, f64)>, band: (f64, f64)) -> PyResult<(f64, f64, f64, usize)> {
    let fit = spectral::branch_fit(&spectral::eigen_result_from(eigenvalues), band).map_err(py_err)?;
    Ok((fit.slope, fit.intercept, fit.residual, fit.points))
}

#[pyfunction]
#[pyo3(signature = (lo, hi, points=200))]
fn log_grid(lo: f64, hi: f64, points: usize) -> PyResult<Vec<f64>> {
    spectral::log_grid(lo, hi, points).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "thermobeam")]
pub fn thermobeam_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(rayleigh_dispersion, m)?)?;
    m.add_function(wrap_pyfunction!(classify_regime, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(branch_fit, m)?)?;
    m.add_function(wrap_pyfunction!(log_grid, m)?)?;
    Ok(())
}
