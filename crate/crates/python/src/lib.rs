//! Python bindings: configs, the coupled system, eigenstates, spectra and dynamics.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use polariton::config::{RunConfig, SolverKind};
use polariton::dynamics::{self, InitialState, Propagator, RabiEstimate};
use polariton::eigensolve::{eigensolve_dense, eigensolve_structured, PolaritonModes};
use polariton::hamiltonian::{self, CoupledSystem};
use polariton::model::Vec3;
use polariton::observables::{self, Spectrum};
use polariton::runner::{self, SweepParameter};
use polariton::{presets, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        e if e.exit_code() == 2 => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A validated run config.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_preset(id: &str) -> PyResult<Self> {
        let inner = presets::get(id).map_err(to_py)?.config;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = RunConfig::from_json_str(text, "<string>").map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_value().to_string()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.run.gamma
    }

    /// Returns a copy with ħΓ replaced.
    fn with_gamma(&self, gamma: f64) -> PyResult<Self> {
        let inner = SweepParameter::Gamma.apply(&self.inner, gamma).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.levels.labels()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(levels={:?}, kappa={}, gamma={})",
            self.inner.levels.labels(),
            self.inner.cavity.kappa,
            self.inner.run.gamma
        )
    }
}

/// Electronic levels coupled to the discretized photon continuum.
#[pyclass(name = "System")]
struct PySystem {
    inner: CoupledSystem,
}

#[pymethods]
impl PySystem {
    #[staticmethod]
    fn from_config(config: &PyConfig) -> PyResult<Self> {
        let inner = runner::build_system(&config.inner).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_levels(&self) -> usize {
        self.inner.n_levels()
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.inner.n_modes()
    }

    #[getter]
    fn el_energies(&self) -> Vec<f64> {
        self.inner.el_energies().to_vec()
    }

    #[getter]
    fn ph_energies(&self) -> Vec<f64> {
        self.inner.ph_energies().to_vec()
    }

    /// Coupling row ħg_{i,k} of level `i`.
    fn coupling_row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n_levels() {
            return Err(PyValueError::new_err(format!("level index {i} out of range")));
        }
        Ok(self.inner.coupling().row(i).iter().copied().collect())
    }

    #[pyo3(signature = (solver = "structured"))]
    fn eigensolve(&self, solver: &str) -> PyResult<PyModes> {
        let inner = match solver.parse::<SolverKind>().map_err(to_py)? {
            SolverKind::Structured => eigensolve_structured(&self.inner),
            SolverKind::Dense => eigensolve_dense(&self.inner),
            SolverKind::Resolvent => Err(Error::InvalidArgument(
                "the resolvent solver does not produce eigenstates".into(),
            )),
        }
        .map_err(to_py)?;
        Ok(PyModes { inner })
    }

    fn write_binary(&self, path: PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(path).map_err(|e| to_py(e.into()))?;
        self.inner
            .write_binary(std::io::BufWriter::new(f))
            .map_err(to_py)
    }
}

/// Polariton eigenstates with their electronic and photonic weights.
#[pyclass(name = "Modes")]
struct PyModes {
    inner: PolaritonModes,
}

#[pymethods]
impl PyModes {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    #[getter]
    fn el_weight(&self) -> Vec<f64> {
        self.inner.el_weight().to_vec()
    }

    #[getter]
    fn ph_weight(&self) -> Vec<f64> {
        self.inner.ph_weight().to_vec()
    }

    /// W_il = |C_il|² for every eigenstate l, as rows.
    fn weight_table(&self) -> Vec<Vec<f64>> {
        let t = self.inner.weights();
        (0..self.inner.len())
            .map(|l| (0..self.inner.n_levels()).map(|i| t.weight(l, i)).collect())
            .collect()
    }
}

type SpectrumTuple = (Vec<f64>, Vec<f64>, f64);

fn unpack(s: Spectrum) -> SpectrumTuple {
    (s.omega, s.intensity, s.scale_factor)
}

fn probe(config: &RunConfig) -> Vec<f64> {
    let [lo, hi] = config.run.omega_range.unwrap_or(config.cavity.window);
    observables::uniform_grid(lo, hi, config.run.points)
}

/// Normalized absorption spectrum from eigenstates: (omega, intensity, scale_factor).
#[pyfunction]
fn absorption_spectrum(modes: &PyModes, config: &PyConfig) -> PyResult<SpectrumTuple> {
    let c = &config.inner;
    observables::absorption_spectrum(&modes.inner, &c.levels, c.run.gamma, &probe(c), c.run.polarization)
        .map(unpack)
        .map_err(to_py)
}

/// Normalized absorption spectrum from the electronic resolvent.
#[pyfunction]
fn resolvent_spectrum(system: &PySystem, config: &PyConfig) -> PyResult<SpectrumTuple> {
    let c = &config.inner;
    observables::resolvent_spectrum(&system.inner, &c.levels, c.run.gamma, &probe(c), c.run.polarization)
        .map(unpack)
        .map_err(to_py)
}

/// Weight spectrum of one electronic state.
#[pyfunction]
fn weight_spectrum(modes: &PyModes, config: &PyConfig, state: usize) -> PyResult<SpectrumTuple> {
    let c = &config.inner;
    observables::weight_spectrum(&modes.inner, state, c.run.gamma, &probe(c))
        .map(unpack)
        .map_err(to_py)
}

/// Populations after starting in `state`, with decay and Rabi estimates for it.
#[pyfunction]
fn propagate(
    py: Python<'_>,
    system: &PySystem,
    modes: &PyModes,
    state: String,
    times: Vec<f64>,
) -> PyResult<HashMap<String, Py<PyAny>>> {
    let traj = Propagator::new(&system.inner, &modes.inner)
        .trajectory(&InitialState::Level(state.clone()), &times)
        .map_err(to_py)?;
    let idx = traj.state_index(&state).map_err(to_py)?;
    let span = (times[0], times[times.len() - 1]);
    let decay = dynamics::fit_decay_rate(&traj, idx, span).ok();
    let rabi = match dynamics::extract_rabi_frequency(&traj, idx) {
        Ok(RabiEstimate::Oscillating { hbar_omega }) => Some(hbar_omega),
        _ => None,
    };
    let populations: HashMap<String, Vec<f64>> = traj
        .labels
        .iter()
        .cloned()
        .zip(traj.el_populations.iter().cloned())
        .collect();
    let mut out: HashMap<String, Py<PyAny>> = HashMap::new();
    out.insert("times".into(), traj.times.clone().into_pyobject(py)?.into_any().unbind());
    out.insert("populations".into(), populations.into_pyobject(py)?.into_any().unbind());
    out.insert("photon_total".into(), traj.ph_population_total.clone().into_pyobject(py)?.into_any().unbind());
    out.insert("norm".into(), traj.norm.clone().into_pyobject(py)?.into_any().unbind());
    out.insert("decay_rate".into(), decay.into_pyobject(py)?.into_any().unbind());
    out.insert("rabi".into(), rabi.into_pyobject(py)?.into_any().unbind());
    Ok(out)
}

/// ħg for a mode of energy `omega` with strength vector `lambda_k` and dipole `dipole` (e·Å).
#[pyfunction]
fn coupling_rate(omega: f64, lambda_k: [f64; 3], dipole: [f64; 3]) -> f64 {
    hamiltonian::coupling_rate(omega, Vec3(lambda_k), Vec3(dipole))
}

#[pyfunction]
fn preset_ids() -> Vec<&'static str> {
    presets::ids()
}

/// Runs a config into `out_dir`; returns the written file paths.
#[pyfunction]
fn run(config: &PyConfig, out_dir: PathBuf) -> PyResult<Vec<String>> {
    let o = runner::execute(&config.inner, &out_dir).map_err(to_py)?;
    Ok(o.files.iter().map(|p| p.display().to_string()).collect())
}

/// Sweeps `parameter` (lambda_c, kappa or gamma); returns the summary CSV path.
#[pyfunction]
fn sweep(config: &PyConfig, parameter: &str, values: Vec<f64>, out_dir: PathBuf) -> PyResult<String> {
    let p: SweepParameter = parameter.parse().map_err(to_py)?;
    let s = runner::sweep(&config.inner, p, &values, &out_dir).map_err(to_py)?;
    Ok(s.summary_path.display().to_string())
}

#[pymodule]
fn polariton_py(_py: Python, m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyModes>()?;
    m.add_function(wrap_pyfunction!(absorption_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(weight_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_rate, m)?)?;
    m.add_function(wrap_pyfunction!(preset_ids, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add("HBAR_EV_FS", polariton::model::HBAR_EV_FS)?;
    Ok(())
}
