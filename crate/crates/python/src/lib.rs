//! Python bindings for the `nce_lbm` crate.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nce_lbm::constrained_runs::{newton_full_state, SmoothnessOrder};
use nce_lbm::expansion::ExpansionBasis;
use nce_lbm::harness::{self, config, DiffusionCheck, ExperimentConfig, Preset};
use nce_lbm::lattice::{moments_from_distributions, DistributionField, LatticeSpec, MacroFields, VelocitySet};
use nce_lbm::lbm::{EquilibriumKind, EquilibriumModel};
use nce_lbm::newton::{NewtonOptions, NewtonReport};
use nce_lbm::solver::{coefficient_newton_options, solve_coefficients as solve, HContext};
use nce_lbm::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Convergence { .. } | Error::Singular { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn report_dict<'py>(py: Python<'py>, r: &NewtonReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iterations", r.iterations)?;
    d.set_item("residual", r.residual)?;
    d.set_item("converged", r.converged)?;
    d.set_item("cond", r.cond)?;
    d.set_item("unknowns", r.unknowns)?;
    Ok(d)
}

#[pyclass(name = "Lattice", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLattice {
    inner: LatticeSpec,
}

#[pymethods]
impl PyLattice {
    /// `velocities` is "D1Q3" or "D2Q5".
    #[new]
    fn new(velocities: &str, n: usize, length: f64, dt: f64, omega: f64) -> PyResult<Self> {
        let set = match velocities {
            "D1Q3" => VelocitySet::D1Q3,
            "D2Q5" => VelocitySet::D2Q5,
            other => return Err(PyValueError::new_err(format!("unknown velocity set {other}"))),
        };
        Ok(Self { inner: LatticeSpec::new(set, n, length, dt, omega).map_err(py_err)? })
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }
    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    #[getter]
    fn sites(&self) -> usize {
        self.inner.sites()
    }
    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx()
    }
    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }
    #[getter]
    fn c(&self) -> f64 {
        self.inner.c()
    }
    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega()
    }

    /// Physical coordinates of every site, row-major.
    fn positions(&self) -> Vec<(f64, f64)> {
        (0..self.inner.sites()).map(|s| self.inner.position(s)).collect()
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!("Lattice({:?}, n={}, length={}, dt={}, omega={})", s.velocities(), s.n(), s.length(), s.dt(), s.omega())
    }
}

#[pyclass(name = "Field", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: DistributionField,
}

#[pymethods]
impl PyField {
    /// `values` is population-major: all sites of `f_0`, then `f_1`, ...
    #[new]
    fn new(lattice: &PyLattice, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: DistributionField::from_vec(lattice.inner, values).map_err(py_err)? })
    }

    #[getter]
    fn lattice(&self) -> PyLattice {
        PyLattice { inner: *self.inner.spec() }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.as_slice().to_vec()
    }

    fn population(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.spec().q() {
            return Err(PyValueError::new_err("velocity index out of range"));
        }
        Ok(self.inner.population(i).to_vec())
    }

    fn get(&self, site: usize, i: usize) -> PyResult<f64> {
        if site >= self.inner.spec().sites() || i >= self.inner.spec().q() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(site, i))
    }

    /// Density, momentum components and, for D1Q3, the energy moment.
    fn moments<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = moments_from_distributions(&self.inner);
        let d = PyDict::new(py);
        d.set_item("rho", m.rho)?;
        d.set_item("momentum", m.momentum)?;
        d.set_item("energy", m.energy)?;
        Ok(d)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(py_err)?;
        Ok(String::from_utf8(buf).expect("ascii output"))
    }

    fn __len__(&self) -> usize {
        self.inner.as_slice().len()
    }
}

#[pyclass(name = "Model", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: EquilibriumModel,
}

impl PyModel {
    fn macro_fields(&self, rho: Vec<f64>, momentum: Option<Vec<Vec<f64>>>) -> PyResult<MacroFields> {
        MacroFields::new(*self.inner.spec(), rho, momentum.unwrap_or_default(), None).map_err(py_err)
    }
}

#[pymethods]
impl PyModel {
    /// `kind` is "density-only-1d", "density-momentum-1d" or "density-momentum-2d".
    #[new]
    fn new(kind: &str, lattice: &PyLattice) -> PyResult<Self> {
        let kind = match kind {
            "density-only-1d" => EquilibriumKind::DensityOnly1D,
            "density-momentum-1d" => EquilibriumKind::DensityMomentum1D,
            "density-momentum-2d" => EquilibriumKind::DensityMomentum2D,
            other => return Err(PyValueError::new_err(format!("unknown equilibrium {other}"))),
        };
        Ok(Self { inner: EquilibriumModel::new(kind, lattice.inner).map_err(py_err)? })
    }

    #[getter]
    fn lattice(&self) -> PyLattice {
        PyLattice { inner: *self.inner.spec() }
    }

    #[pyo3(signature = (rho, momentum=None))]
    fn equilibrium(&self, rho: Vec<f64>, momentum: Option<Vec<Vec<f64>>>) -> PyResult<PyField> {
        let m = self.macro_fields(rho, momentum)?;
        Ok(PyField { inner: self.inner.equilibrium(&m).map_err(py_err)? })
    }

    fn bgk_step(&self, f: &PyField) -> PyResult<PyField> {
        Ok(PyField { inner: self.inner.bgk_step(&f.inner).map_err(py_err)? })
    }

    fn advance(&self, py: Python<'_>, f: &PyField, steps: usize) -> PyResult<PyField> {
        let out = py.detach(|| self.inner.advance(&f.inner, steps)).map_err(py_err)?;
        Ok(PyField { inner: out })
    }

    /// Restriction: the conserved moments as `(rho, momentum)`.
    fn restrict(&self, f: &PyField) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = harness::restrict(&f.inner, &self.inner);
        (m.rho, m.momentum)
    }

    /// Train expansion coefficients on `(rho, momentum)` and lift.
    #[pyo3(signature = (rho, momentum, basis_order, m, stencil_order=4))]
    fn solve_coefficients<'py>(
        &self,
        py: Python<'py>,
        rho: Vec<f64>,
        momentum: Option<Vec<Vec<f64>>>,
        basis_order: usize,
        m: usize,
        stencil_order: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let targets = self.macro_fields(rho, momentum)?;
        let model = self.inner;
        let (basis, theta, report, lifted) = py
            .detach(|| -> nce_lbm::Result<_> {
                let basis = ExpansionBasis::for_model(&model, basis_order, false)?.with_accuracy(stencil_order)?;
                let ctx = HContext::new(model, basis.clone(), targets, SmoothnessOrder::new(m)?, &Default::default())?;
                let (theta, report) = solve(&ctx, &coefficient_newton_options())?;
                let lifted = ctx.lift(&theta)?;
                Ok((basis, theta, report, lifted))
            })
            .map_err(py_err)?;
        let d = report_dict(py, &report)?;
        d.set_item("terms", basis.term_names())?;
        let rows: Vec<Vec<f64>> = (0..theta.q()).map(|i| theta.velocity(i).to_vec()).collect();
        d.set_item("coefficients", rows)?;
        d.set_item("lifted", PyField { inner: lifted })?;
        Ok(d)
    }

    /// Full-state Constrained Runs with Newton; returns `(field, report)`.
    #[pyo3(signature = (rho, momentum, m))]
    fn constrained_runs<'py>(
        &self,
        py: Python<'py>,
        rho: Vec<f64>,
        momentum: Option<Vec<Vec<f64>>>,
        m: usize,
    ) -> PyResult<(PyField, Bound<'py, PyDict>)> {
        let targets = self.macro_fields(rho, momentum)?;
        let model = self.inner;
        let sol = py
            .detach(|| newton_full_state(&model, &targets, SmoothnessOrder::new(m)?, &NewtonOptions::default()))
            .map_err(py_err)?;
        let report = report_dict(py, &sol.report)?;
        Ok((PyField { inner: sol.field }, report))
    }
}

#[pyfunction]
fn norm2(f: &PyField, g: &PyField) -> PyResult<f64> {
    harness::norm2(&f.inner, &g.inner).map_err(py_err)
}

#[pyfunction]
fn norm2_per_velocity(f: &PyField, g: &PyField) -> PyResult<Vec<f64>> {
    harness::norm2_per_velocity(&f.inner, &g.inner).map_err(py_err)
}

/// Reference state of a preset: `(model, f_c)`.
#[pyfunction]
fn reference(py: Python<'_>, preset: &str) -> PyResult<(PyModel, PyField)> {
    let cfg = ExperimentConfig::preset(preset.parse::<Preset>().map_err(py_err)?);
    let (model, fc) = py.detach(|| harness::make_reference(&cfg)).map_err(py_err)?;
    Ok((PyModel { inner: model }, PyField { inner: fc }))
}

/// Run an error table; `config` is the text of a `key = value` file and
/// takes precedence over `preset`.
#[pyfunction]
#[pyo3(signature = (preset="exp1", config=None, stencil_order=None, sampling=None, norm=None))]
fn run_table<'py>(
    py: Python<'py>,
    preset: &str,
    config: Option<&str>,
    stencil_order: Option<usize>,
    sampling: Option<&str>,
    norm: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = match config {
        Some(text) => ExperimentConfig::parse(text),
        None => preset.parse::<Preset>().map(ExperimentConfig::preset),
    }
    .map_err(py_err)?;
    if let Some(order) = stencil_order {
        cfg.stencil_order = order;
    }
    if let Some(s) = sampling {
        cfg.sampling = config::parse_sampling(s).map_err(py_err)?;
    }
    if let Some(n) = norm {
        cfg.norm = config::parse_norm(n).map_err(py_err)?;
    }
    let report = py.detach(|| harness::run_table(&cfg)).map_err(py_err)?;
    report
        .rows
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("experiment", &report.experiment)?;
            d.set_item("basis", &row.basis)?;
            d.set_item("order_m", row.m)?;
            d.set_item("errors", row.errors.to_vec())?;
            d.set_item("converged", row.converged())?;
            d.set_item("failure", row.failure.as_deref())?;
            d.set_item("newton", row.newton.as_ref().map(|r| report_dict(py, r)).transpose()?)?;
            Ok(d)
        })
        .collect()
}

/// Fitted against predicted diffusion coefficient of the density-only model.
#[pyfunction]
#[pyo3(signature = (steps=100))]
fn diffusion_check(steps: usize) -> PyResult<(f64, f64, f64)> {
    let r = DiffusionCheck { steps, ..DiffusionCheck::default() }.run().map_err(py_err)?;
    Ok((r.predicted_d, r.fitted_d, r.relative_error))
}

#[pymodule]
fn nce_lbm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLattice>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(norm2, m)?)?;
    m.add_function(wrap_pyfunction!(norm2_per_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(reference, m)?)?;
    m.add_function(wrap_pyfunction!(run_table, m)?)?;
    m.add_function(wrap_pyfunction!(diffusion_check, m)?)?;
    Ok(())
}
