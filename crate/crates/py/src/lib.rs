//! Python bindings for the closures, relative energy, solvers and sweeps.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nsflab::config::RunConfig;
use nsflab::diagnostics;
use nsflab::relative_energy::{self, Rect, StatePoint};
use nsflab::sweep::{self, Family};
use nsflab::thermo;

fn err(e: nsflab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "GasModel", module = "nsflab_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGas(thermo::GasModel);

#[pymethods]
impl PyGas {
    /// `name` is "ideal" or a label for the pressure profile `expression` in `Z`.
    #[new]
    #[pyo3(signature = (name = "ideal", expression = None))]
    fn new(name: &str, expression: Option<&str>) -> PyResult<Self> {
        thermo::GasModel::by_name(name, expression).map(PyGas).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    fn pressure(&self, a: f64, rho: f64, theta: f64) -> PyResult<f64> {
        self.0.pressure(a, rho, theta).map_err(err)
    }

    fn internal_energy(&self, a: f64, rho: f64, theta: f64) -> PyResult<f64> {
        self.0.internal_energy(a, rho, theta).map_err(err)
    }

    fn entropy(&self, a: f64, rho: f64, theta: f64) -> PyResult<f64> {
        self.0.entropy(a, rho, theta).map_err(err)
    }

    fn sound_speed(&self, a: f64, rho: f64, theta: f64) -> PyResult<f64> {
        self.0.sound_speed(a, rho, theta).map_err(err)
    }

    /// Largest relative Gibbs residual at one state.
    fn gibbs_residual(&self, a: f64, rho: f64, theta: f64) -> PyResult<f64> {
        thermo::gibbs_residual(&self.0, a, rho, theta).map(|g| g.max_relative()).map_err(err)
    }

    /// `[(id, passed, detail)]` for the hypothesis checks on log grids.
    #[pyo3(signature = (transport = "canonical"))]
    fn hypothesis_report(&self, transport: &str) -> PyResult<Vec<(String, bool, String)>> {
        let t = thermo::TransportModel::by_name(transport, None).map_err(err)?;
        let r = thermo::hypothesis_report(&self.0, &t, &thermo::log_grid(1e-6, 1e6, 61), &thermo::log_grid(1e-3, 1e3, 31));
        Ok(r.entries.iter().map(|e| (e.id.to_string(), e.passed, e.detail.clone())).collect())
    }

    /// Relative energy density of `(rho, theta, u)` against `(r, big_theta, big_u)`.
    fn relative_energy(&self, a: f64, state: (f64, f64, f64), reference: (f64, f64, f64)) -> PyResult<f64> {
        let s = StatePoint::new(state.0, state.1, [state.2, 0.0, 0.0]);
        let r = StatePoint::new(reference.0, reference.1, [reference.2, 0.0, 0.0]);
        relative_energy::relative_energy_density(&self.0, a, &s, &r).map_err(err)
    }

    /// Coercivity constant on `rho × theta` from `samples` low-discrepancy points.
    #[pyo3(signature = (a, rho = (0.5, 2.0), theta = (0.5, 2.0), samples = 10_000, seed = 0))]
    fn coercivity(&self, a: f64, rho: (f64, f64), theta: (f64, f64), samples: usize, seed: u64) -> PyResult<f64> {
        let k = Rect::new(rho, theta).map_err(err)?;
        relative_energy::coercivity_constant(&self.0, a, &k, samples, seed).map(|c| c.c).map_err(err)
    }
}

#[pyclass(name = "ScalingParams", module = "nsflab_py", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyScaling(thermo::ScalingParams);

#[pymethods]
impl PyScaling {
    #[new]
    fn new(a: f64, nu: f64, omega: f64, lambda_: f64) -> PyResult<Self> {
        let s = thermo::ScalingParams::new(a, nu, omega, lambda_);
        s.validate().map_err(err)?;
        Ok(PyScaling(s))
    }

    /// Point `a` on the path `ν = a^α`, `ω = a^β`, `λ = a^γ`.
    #[staticmethod]
    #[pyo3(signature = (a, alpha = 0.55, beta = 1.2, gamma = 0.1))]
    fn on_path(a: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        PyScaling(sweep::ScalingPath::new(vec![a], alpha, beta, gamma).point(a))
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a
    }
    #[getter]
    fn nu(&self) -> f64 {
        self.0.nu
    }
    #[getter]
    fn omega(&self) -> f64 {
        self.0.omega
    }
    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda
    }

    fn envelope(&self) -> PyResult<f64> {
        diagnostics::rate_envelope(&self.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        let s = self.0;
        format!("ScalingParams(a={:e}, nu={:e}, omega={:e}, lambda_={:e})", s.a, s.nu, s.omega, s.lambda)
    }
}

#[pyclass(name = "RunConfig", module = "nsflab_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig(RunConfig);

#[pymethods]
impl PyConfig {
    /// Parses TOML text; unknown keys raise `ValueError`.
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        RunConfig::parse(toml).map(PyConfig).map_err(err)
    }

    fn to_toml(&self) -> String {
        self.0.to_toml()
    }

    /// Runs the NSF solver on the configured initial data. Returns the
    /// diagnostics CSV and whether the run completed healthily.
    fn simulate(&self, py: Python<'_>) -> PyResult<(String, bool)> {
        let cfg = self.0.clone();
        py.detach(move || {
            let nsf = cfg.nsf()?;
            let traj = nsflab::nsf::simulate(&nsf, &cfg.initial.sample(&nsf.grid), None)?;
            Ok::<_, nsflab::Error>((traj.csv(), traj.completed() && traj.healthy))
        })
        .map_err(err)
    }

    /// Runs one sweep family ("well" or "ill") and returns the manifest TOML.
    /// Outputs are written under `out` when given.
    #[pyo3(signature = (family = "well", out = None))]
    fn sweep(&self, py: Python<'_>, family: &str, out: Option<PathBuf>) -> PyResult<String> {
        let family = match family {
            "well" => Family::WellPrepared,
            "ill" => Family::IllPrepared,
            other => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
        };
        let cfg = self.0.clone();
        py.detach(move || sweep::run_sweep(&cfg, family, out.as_deref()).map(|m| m.to_toml())).map_err(err)
    }
}

/// Violations of the path exponent constraints; empty when valid.
#[pyfunction]
fn validate_path(alpha: f64, beta: f64, gamma: f64) -> Vec<String> {
    sweep::validate_path(alpha, beta, gamma)
}

/// `(constant, ratios, spread, flagged)` for a manifest TOML text.
#[pyfunction]
fn fit_rate(manifest: &str) -> PyResult<(f64, Vec<f64>, f64, bool)> {
    let m = sweep::SweepManifest::parse(manifest).map_err(err)?;
    let f = sweep::fit_rate(&m.points).map_err(err)?;
    Ok((f.constant, f.ratios, f.spread, f.flagged))
}

#[pymodule]
fn nsflab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGas>()?;
    m.add_class::<PyScaling>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(validate_path, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    Ok(())
}
