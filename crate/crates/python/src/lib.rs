//! Python bindings: `import spectral_transfer_py`.
//!
//! Coefficients are given as numbers or expression strings in `x`. A Weyl
//! parameter of `None` means `γ = ∞`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex64 as C;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spectral_transfer::asymptotics::{self, RaySampling};
use spectral_transfer::canonical;
use spectral_transfer::coefficient::Coefficient;
use spectral_transfer::error::Error;
use spectral_transfer::measure;
use spectral_transfer::string;
use spectral_transfer::sturm_liouville::{self as sl, SlWeyl};
use spectral_transfer::transfer::{self, PSD_TOL, TRUNCATION_TOL};
use spectral_transfer::weyl::Gamma;

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_)
        | Error::RealSpectralParameter(_)
        | Error::Domain { .. }
        | Error::Expression { .. }
        | Error::Json(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn gamma(g: Option<f64>) -> Gamma {
    g.map_or(Gamma::Infinity, Gamma::Real)
}

#[derive(FromPyObject)]
enum CoefficientArg {
    Number(f64),
    Expression(String),
}

impl CoefficientArg {
    fn build(self) -> PyResult<Coefficient> {
        match self {
            Self::Number(v) => Ok(Coefficient::Constant(v)),
            Self::Expression(s) => Coefficient::expression(&s).map_err(err),
        }
    }
}

/// `-y'' + q y = z y` on `[0, ℓ]` with `y(0)cos α + y'(0)sin α = 0`.
#[pyclass(name = "SlProblem", skip_from_py_object)]
#[derive(Clone)]
struct PySlProblem(sl::SlProblem);

#[pymethods]
impl PySlProblem {
    #[new]
    #[pyo3(signature = (ell, q = CoefficientArg::Number(0.0), alpha = FRAC_PI_2))]
    fn new(ell: f64, q: CoefficientArg, alpha: f64) -> PyResult<Self> {
        sl::SlProblem::new(ell, q.build()?, alpha).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn ell(&self) -> f64 {
        self.0.ell()
    }

    #[pyo3(signature = (z, gamma = None, a = None))]
    fn weyl(&self, z: C, gamma: Option<f64>, a: Option<f64>) -> PyResult<C> {
        sl::weyl_m(&self.0, a.unwrap_or(self.0.ell()), &self::gamma(gamma), z).map_err(err)
    }

    #[pyo3(signature = (count, gamma = None, a = None))]
    fn eigenvalues(&self, count: usize, gamma: Option<f64>, a: Option<f64>) -> PyResult<Vec<f64>> {
        sl::eigenvalues(&self.0, a.unwrap_or(self.0.ell()), &self::gamma(gamma), count).map_err(err)
    }

    /// Spectral measure of the restriction to `[0, a]` with a fitted tail.
    #[pyo3(signature = (count, gamma = None, a = None))]
    fn measure(&self, count: usize, gamma: Option<f64>, a: Option<f64>) -> PyResult<PySpectralMeasure> {
        sl::orthogonal_measure(&self.0, a.unwrap_or(self.0.ell()), &self::gamma(gamma), count)
            .map(|m| PySpectralMeasure(Arc::new(m)))
            .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("SlProblem(ell={}, alpha={})", self.0.ell(), self.0.alpha())
    }
}

#[pyclass(name = "SpectralMeasure", skip_from_py_object)]
#[derive(Clone)]
struct PySpectralMeasure(Arc<measure::SpectralMeasure>);

#[pymethods]
impl PySpectralMeasure {
    #[new]
    fn new(atoms: Vec<(f64, f64)>) -> PyResult<Self> {
        measure::SpectralMeasure::from_atoms(atoms).map(|m| Self(Arc::new(m))).map_err(err)
    }

    #[getter]
    fn atoms(&self) -> Vec<(f64, f64)> {
        self.0.atoms().to_vec()
    }

    /// `(p, c)` of the attached `c λ^p` tail density, if any.
    #[getter]
    fn tail(&self) -> Option<(f64, f64)> {
        self.0.tail().map(|t| (t.p, t.c))
    }

    fn stieltjes(&self, z: C) -> PyResult<C> {
        measure::stieltjes_transform(&self.0, z).map_err(err)
    }

    /// Sturm-Liouville transfer function on `grid`, certified on `[0, bound]`.
    fn phi(&self, grid: Vec<f64>, bound: f64) -> PyResult<PyTransferFunction> {
        transfer::phi_from_measure(self.0.clone(), grid, bound).map(PyTransferFunction).map_err(err)
    }

    #[pyo3(signature = (grid, bound, beta = 0.0))]
    fn screw(&self, grid: Vec<f64>, bound: f64, beta: f64) -> PyResult<PyTransferFunction> {
        canonical::screw_from_measure(self.0.clone(), beta, grid, bound).map(PyTransferFunction).map_err(err)
    }

    fn f(&self, grid: Vec<f64>, bound: f64) -> PyResult<PyTransferFunction> {
        canonical::f_from_measure(self.0.clone(), grid, bound).map(PyTransferFunction).map_err(err)
    }

    fn string_transfer(&self, grid: Vec<f64>, bound: f64) -> PyResult<PyTransferFunction> {
        string::string_transfer(self.0.clone(), grid, bound).map(PyTransferFunction).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.atoms().len()
    }
}

#[pyclass(name = "TransferFunction", skip_from_py_object)]
#[derive(Clone)]
struct PyTransferFunction(transfer::TransferFunction);

#[pymethods]
impl PyTransferFunction {
    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<C> {
        self.0.values().to_vec()
    }

    #[getter]
    fn real_values(&self) -> Vec<f64> {
        self.0.real_values()
    }

    #[getter]
    fn truncation_error(&self) -> f64 {
        self.0.truncation_error()
    }

    #[getter]
    fn domain_bound(&self) -> f64 {
        self.0.domain_bound()
    }

    fn __call__(&self, t: f64) -> PyResult<C> {
        self.0.eval(t).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.grid().len()
    }
}

/// Canonical system `-J y' = z H y` on `[0, ℓ]`.
#[pyclass(name = "Hamiltonian", skip_from_py_object)]
#[derive(Clone)]
struct PyHamiltonian(canonical::Hamiltonian);

#[pymethods]
impl PyHamiltonian {
    #[new]
    fn new(h11: CoefficientArg, h12: CoefficientArg, h22: CoefficientArg, ell: f64) -> PyResult<Self> {
        canonical::Hamiltonian::new(h11.build()?, h12.build()?, h22.build()?, ell)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn ell(&self) -> f64 {
        self.0.ell()
    }

    fn transfer_matrix(&self, x: f64, z: C) -> PyResult<[[C; 2]; 2]> {
        canonical::transfer_matrix_w(&self.0, x, z).map_err(err)
    }

    #[pyo3(signature = (z, gamma = None))]
    fn weyl(&self, z: C, gamma: Option<f64>) -> PyResult<C> {
        canonical::weyl_function_canonical(&self.0, self.0.ell(), &self::gamma(gamma), z).map_err(err)
    }

    #[pyo3(signature = (per_side, gamma = None))]
    fn measure(&self, per_side: usize, gamma: Option<f64>) -> PyResult<PySpectralMeasure> {
        canonical::canonical_measure(&self.0, self.0.ell(), &self::gamma(gamma), per_side)
            .map(|m| PySpectralMeasure(Arc::new(m)))
            .map_err(err)
    }

    fn a_of_l(&self, l: f64) -> PyResult<f64> {
        canonical::a_of_l(&self.0, l).map_err(err)
    }
}

/// Krein string with density and point masses on `[0, ℓ]`.
#[pyclass(name = "MassDistribution", skip_from_py_object)]
#[derive(Clone)]
struct PyMassDistribution(string::MassDistribution);

#[pymethods]
impl PyMassDistribution {
    #[new]
    #[pyo3(signature = (ell, density = CoefficientArg::Number(1.0), atoms = Vec::new()))]
    fn new(ell: f64, density: CoefficientArg, atoms: Vec<(f64, f64)>) -> PyResult<Self> {
        string::MassDistribution::new(ell, density.build()?, atoms).map(Self).map_err(err)
    }

    #[getter]
    fn transfer_domain(&self) -> f64 {
        self.0.transfer_domain()
    }

    #[pyo3(signature = (z, gamma = None))]
    fn weyl(&self, z: C, gamma: Option<f64>) -> PyResult<C> {
        string::string_weyl(&self.0, &self::gamma(gamma), z).map_err(err)
    }

    #[pyo3(signature = (count, gamma = None))]
    fn measure(&self, count: usize, gamma: Option<f64>) -> PyResult<PySpectralMeasure> {
        string::string_spectral_measure(&self.0, &self::gamma(gamma), count)
            .map(|m| PySpectralMeasure(Arc::new(m)))
            .map_err(err)
    }
}

fn comparison_dict<'py>(py: Python<'py>, c: transfer::Comparison) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("max_abs_deviation", c.max_abs_deviation)?;
    d.set_item("at", c.at)?;
    d.set_item("locally_identical", c.locally_identical)?;
    Ok(d)
}

/// Sup-deviation of two transfer functions on `[0, 2a]`.
#[pyfunction]
#[pyo3(signature = (f1, f2, a, tol = 2.0 * TRUNCATION_TOL))]
fn compare<'py>(
    py: Python<'py>,
    f1: &PyTransferFunction,
    f2: &PyTransferFunction,
    a: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = transfer::compare_transfer(&f1.0, &f2.0, a, tol).map_err(err)?;
    comparison_dict(py, c)
}

/// Smallest eigenvalue of the Krein kernel matrix on `s_grid` and the verdict.
#[pyfunction]
#[pyo3(signature = (phi, s_grid, tol = PSD_TOL))]
fn krein_psd(phi: &PyTransferFunction, s_grid: Vec<f64>, tol: f64) -> PyResult<(f64, bool)> {
    let m = transfer::krein_kernel_matrix(&phi.0, &s_grid).map_err(err)?;
    let v = transfer::psd_verdict(&m, tol);
    Ok((v.min_eigenvalue, v.is_psd))
}

/// Exponential decay rate of `m₁ - m₂` along a ray; returns `(â, ĉ, r²)`.
#[pyfunction]
#[pyo3(signature = (p1, p2, gamma = None, angle = FRAC_PI_2, r0 = 1e2, r1 = 1e6, points = 33))]
fn decay_fit(
    p1: &PySlProblem,
    p2: &PySlProblem,
    gamma: Option<f64>,
    angle: f64,
    r0: f64,
    r1: f64,
    points: usize,
) -> PyResult<(f64, f64, f64)> {
    let m1 = SlWeyl::new(p1.0.clone(), p1.0.ell(), self::gamma(gamma)).map_err(err)?;
    let m2 = SlWeyl::new(p2.0.clone(), p2.0.ell(), self::gamma(gamma)).map_err(err)?;
    let ray = RaySampling::log_spaced(angle, r0, r1, points).map_err(err)?;
    let fit = asymptotics::decay_fit(&m1, &m2, &ray).map_err(err)?;
    Ok((fit.a_hat, fit.c_hat, fit.r2))
}

#[pymodule]
fn spectral_transfer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySlProblem>()?;
    m.add_class::<PySpectralMeasure>()?;
    m.add_class::<PyTransferFunction>()?;
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyMassDistribution>()?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(krein_psd, m)?)?;
    m.add_function(wrap_pyfunction!(decay_fit, m)?)?;
    m.add("TRUNCATION_TOL", TRUNCATION_TOL)?;
    Ok(())
}
