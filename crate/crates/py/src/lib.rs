//! Python bindings: mode solving, packet projection, correlation functions,
//! the two experiment sweeps and the fringe/edge metrics.

use std::path::Path;

use noon_core::config::{parse_config_str, LoadedConfig};
use noon_core::correlation::{self, BranchAmplitudes, CfComponents, DetectorSpec, Regularization};
use noon_core::experiments::{self, SweepResult};
use noon_core::grid::{Grid, PermittivityMap};
use noon_core::wavepackets::{self, NoonStateSpec, SpectralAmplitudes, WavepacketSpec};
use noon_core::{modes, operators, output, ErrorClass};
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: noon_core::Error) -> PyErr {
    match err.class() {
        ErrorClass::Config => PyValueError::new_err(err.to_string()),
        ErrorClass::Io => PyIOError::new_err(err.to_string()),
        ErrorClass::Numerical => PyRuntimeError::new_err(err.to_string()),
    }
}

fn load(toml: Option<&str>) -> PyResult<LoadedConfig> {
    parse_config_str(toml.unwrap_or(""), Path::new(".")).map_err(to_py)
}

fn sweep_dict<'py>(py: Python<'py>, r: &SweepResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item(&r.variable, r.values.clone())?;
    for (name, col) in &r.columns {
        d.set_item(name, col.clone())?;
    }
    Ok(d)
}

fn components_dict<'py>(py: Python<'py>, c: &CfComponents) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("numerator", c.numerator)?;
    d.set_item("denom_alpha", c.denom_alpha)?;
    d.set_item("denom_beta", c.denom_beta)?;
    d.set_item("state_norm", c.state_norm)?;
    d.set_item("value", c.value)?;
    d.set_item("regularized", c.regularized)?;
    Ok(d)
}

/// Retained normal modes of a permittivity map.
#[pyclass(name = "ModeBasis")]
struct PyModeBasis {
    inner: modes::ModeBasis,
}

#[pymethods]
impl PyModeBasis {
    /// Periodic 1D line of `len(eps)` cells of width `cell_size`, centred on 0.
    #[staticmethod]
    fn solve_1d(eps: Vec<f64>, cell_size: f64) -> PyResult<Self> {
        let n = eps.len();
        let grid = Grid::new_1d(n, cell_size, -0.5 * n as f64 * cell_size).map_err(to_py)?;
        Self::solve(PermittivityMap::new(grid, eps).map_err(to_py)?)
    }

    /// Periodic 2D grid; `eps` is row-major with x fastest.
    #[staticmethod]
    fn solve_2d(eps: Vec<f64>, counts: [usize; 2], cell_size: [f64; 2]) -> PyResult<Self> {
        let origin = [
            -0.5 * counts[0] as f64 * cell_size[0],
            -0.5 * counts[1] as f64 * cell_size[1],
        ];
        let grid = Grid::new_2d(counts, cell_size, origin).map_err(to_py)?;
        Self::solve(PermittivityMap::new(grid, eps).map_err(to_py)?)
    }

    #[getter]
    fn omegas(&self) -> Vec<f64> {
        self.inner.omegas().to_vec()
    }

    #[getter]
    fn kept_count(&self) -> usize {
        self.inner.kept_count()
    }

    #[getter]
    fn eigen_residual(&self) -> f64 {
        self.inner.eigen_residual()
    }

    fn orthonormality_error(&self) -> f64 {
        self.inner.orthonormality_error()
    }

    fn cell_at(&self, x: f64, y: f64) -> Option<usize> {
        self.inner.grid().cell_at([x, y])
    }

    /// Field coefficients `c_i(cell, t)` of every retained mode.
    fn field_row(&self, cell: usize, time: f64) -> PyResult<Vec<Complex64>> {
        self.inner.field_row(cell, time).map_err(to_py)
    }

    /// Projects a Gaussian packet travelling along x; returns `(g, capture)`.
    fn project_packet(
        &self,
        center: f64,
        rightward: bool,
        center_frequency: f64,
        spectral_std: f64,
    ) -> PyResult<(Vec<Complex64>, f64)> {
        let spec = WavepacketSpec::along_x(center, rightward, center_frequency, spectral_std);
        let profile = wavepackets::packet_profile(&spec, self.inner.grid()).map_err(to_py)?;
        let p = wavepackets::project_packet(&self.inner, &profile).map_err(to_py)?;
        Ok((p.amplitudes.as_slice().to_vec(), p.capture))
    }

    /// Correlation components for a N00N state of the packets `left`/`right`
    /// with detectors at the given cells and times. `oracle` selects the
    /// Wick-contraction evaluation.
    #[pyo3(signature = (photons, left, right, theta, alpha, beta, eps_reg = correlation::DEFAULT_EPS_REG, oracle = false))]
    #[allow(clippy::too_many_arguments)]
    fn noon_cf<'py>(
        &self,
        py: Python<'py>,
        photons: u32,
        left: Vec<Complex64>,
        right: Vec<Complex64>,
        theta: f64,
        alpha: (usize, f64),
        beta: (usize, f64),
        eps_reg: f64,
        oracle: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let state = NoonStateSpec::new(
            photons,
            SpectralAmplitudes::new(left).map_err(to_py)?,
            SpectralAmplitudes::new(right).map_err(to_py)?,
            theta,
        )
        .map_err(to_py)?;
        let da = DetectorSpec::new(alpha.0, alpha.1, photons / 2);
        let db = DetectorSpec::new(beta.0, beta.1, photons / 2);
        let reg = Regularization::absolute(eps_reg);
        let c = if oracle {
            correlation::noon_cf_oracle(&self.inner, &state, &da, &db, &reg)
        } else {
            correlation::noon_cf(&self.inner, &state, &da, &db, &reg)
        }
        .map_err(to_py)?;
        components_dict(py, &c)
    }
}

impl PyModeBasis {
    fn solve(map: PermittivityMap) -> PyResult<Self> {
        let ops = operators::build_operators(&map).map_err(to_py)?;
        let inner = modes::solve_modes(&ops, modes::default_omega_floor(&map)).map_err(to_py)?;
        Ok(Self { inner })
    }
}

/// Closed-form terms from packet amplitudes `(left, right)` at both detectors.
#[pyfunction]
#[pyo3(signature = (photons, theta, gamma, alpha, beta, eps_reg = correlation::DEFAULT_EPS_REG))]
fn noon_terms<'py>(
    py: Python<'py>,
    photons: u32,
    theta: f64,
    gamma: Complex64,
    alpha: (Complex64, Complex64),
    beta: (Complex64, Complex64),
    eps_reg: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let branch = |(left, right)| BranchAmplitudes { left, right };
    let t = correlation::noon_terms(photons, theta, gamma, branch(alpha), branch(beta)).map_err(to_py)?;
    let c = correlation::finish(t, &Regularization::absolute(eps_reg)).map_err(to_py)?;
    components_dict(py, &c)
}

/// Phase sweep columns for a TOML config (`[phase_sweep]` section) or defaults.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn phase_sweep<'py>(py: Python<'py>, config: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load(config)?.config.phase_sweep;
    let r = py.detach(|| experiments::run_phase_sweep(&cfg)).map_err(to_py)?;
    sweep_dict(py, &r)
}

/// Ghost scan columns of one slit perturbation (`[ghost_scan]` section).
#[pyfunction]
#[pyo3(signature = (config = None, perturbation = 0.0))]
fn ghost_scan<'py>(py: Python<'py>, config: Option<&str>, perturbation: f64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load(config)?.config.ghost_scan;
    let r = py
        .detach(|| experiments::ghost::run_ghost_geometry(&cfg, perturbation))
        .map_err(to_py)?;
    sweep_dict(py, &r)
}

/// Closed form versus oracle on random inputs; returns the largest relative deviation.
#[pyfunction]
#[pyo3(signature = (draws = 50, seed = 20_231_101))]
fn oracle_check(py: Python<'_>, draws: usize, seed: u64) -> PyResult<f64> {
    let cfg = noon_core::config::OracleConfig {
        draws,
        seed,
        ..Default::default()
    };
    let rep = py.detach(|| output::run_oracle_check(&cfg)).map_err(to_py)?;
    Ok(rep.max_relative_deviation)
}

/// Runs a full TOML config and writes its outputs to `out_dir`; returns the
/// written file names.
#[pyfunction]
fn run(py: Python<'_>, config: &str, out_dir: &str) -> PyResult<Vec<String>> {
    let loaded = load(Some(config))?;
    let outcome = py
        .detach(|| output::run(&loaded, Path::new(out_dir), 0.0))
        .map_err(to_py)?;
    Ok(outcome.manifest.outputs)
}

#[pyfunction]
fn slab_transmission(eps: f64, thickness: f64, omega: f64) -> f64 {
    experiments::slab_transmission(eps, thickness, omega)
}

#[pyfunction]
fn calibrate_beamsplitter(omega: f64, eps: f64) -> PyResult<f64> {
    experiments::calibrate_beamsplitter(omega, eps).map_err(to_py)
}

#[pyfunction]
fn estimate_fringe_period(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    experiments::estimate_fringe_period(&x, &y).map_err(to_py)
}

#[pyfunction]
fn edge_sharpness(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    experiments::edge_sharpness(&x, &y).map_err(to_py)
}

#[pyfunction]
fn visibility(y: Vec<f64>) -> f64 {
    experiments::visibility(&y)
}

#[pymodule]
fn noonsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", output::TOOL_VERSION)?;
    m.add_class::<PyModeBasis>()?;
    m.add_function(wrap_pyfunction!(noon_terms, m)?)?;
    m.add_function(wrap_pyfunction!(phase_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(ghost_scan, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(slab_transmission, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_beamsplitter, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_fringe_period, m)?)?;
    m.add_function(wrap_pyfunction!(edge_sharpness, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    Ok(())
}
