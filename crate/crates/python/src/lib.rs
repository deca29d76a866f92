//! Python bindings: gamma-mixture claims, the accelerated ruin pipeline, the
//! error bound and the single-point inversion formulas.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use renewinv_core::bounds;
use renewinv_core::compound;
use renewinv_core::inversion;
use renewinv_core::ruin;
use renewinv_core::specfun;
use renewinv_core::transforms::{Constant, ExpDecay, LinearCombination, TransformOracle};
use renewinv_core::{Error, GammaComponent, I2Mode, RealShape};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Admissibility(_) | Error::OutOfRange { .. } => PyValueError::new_err(e.to_string()),
        _ => PyArithmeticError::new_err(e.to_string()),
    }
}

fn i2_mode(name: &str) -> PyResult<I2Mode> {
    match name {
        "exact" => Ok(I2Mode::Exact),
        "termwise" => Ok(I2Mode::Termwise),
        _ => Err(PyValueError::new_err(format!("integral mode must be 'exact' or 'termwise', got {name:?}"))),
    }
}

/// Finite mixture of Gamma(alpha, beta) laws (shape, rate).
#[pyclass(frozen, name = "GammaMixture", module = "renewinv")]
struct PyGammaMixture {
    inner: renewinv_core::GammaMixture,
}

#[pymethods]
impl PyGammaMixture {
    /// `components` is a list of `(p, alpha, beta)` triples.
    #[new]
    fn new(components: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let comps = components.into_iter().map(|(p, alpha, beta)| GammaComponent { p, alpha, beta }).collect();
        Ok(Self { inner: renewinv_core::GammaMixture::new(comps).map_err(py_err)? })
    }

    #[staticmethod]
    fn exponential(beta: f64) -> PyResult<Self> {
        Ok(Self { inner: renewinv_core::GammaMixture::exponential(beta).map_err(py_err)? })
    }

    #[staticmethod]
    fn gamma(alpha: f64, beta: f64) -> PyResult<Self> {
        Ok(Self { inner: renewinv_core::GammaMixture::gamma(alpha, beta).map_err(py_err)? })
    }

    fn components(&self) -> Vec<(f64, f64, f64)> {
        self.inner.components().iter().map(|c| (c.p, c.alpha, c.beta)).collect()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn cdf(&self, u: f64) -> f64 {
        self.inner.cdf(u)
    }

    fn survival(&self, u: f64) -> f64 {
        self.inner.survival(u)
    }

    fn __repr__(&self) -> String {
        format!("GammaMixture({:?})", self.components())
    }
}

/// Classical risk model with gamma-mixture claims and load `phi = lambda mu / c`.
#[pyclass(frozen, name = "RiskModel", module = "renewinv")]
struct PyRiskModel {
    inner: ruin::RiskModel,
}

#[pymethods]
impl PyRiskModel {
    #[new]
    fn new(claims: PyRef<'_, PyGammaMixture>, phi: f64) -> PyResult<Self> {
        Ok(Self { inner: ruin::RiskModel::from_phi(claims.inner.clone(), phi).map_err(py_err)? })
    }

    /// Model from Poisson intensity `lam` and premium rate `c`.
    #[staticmethod]
    fn from_rates(claims: PyRef<'_, PyGammaMixture>, lam: f64, c: f64) -> PyResult<Self> {
        Ok(Self { inner: ruin::RiskModel::from_rates(claims.inner.clone(), lam, c).map_err(py_err)? })
    }

    #[getter]
    fn phi(&self) -> f64 {
        self.inner.phi()
    }

    fn claims(&self) -> PyGammaMixture {
        PyGammaMixture { inner: self.inner.claims().clone() }
    }

    /// Accelerated non-ruin probability on the lattice `{k / t : k / t <= u_max}`.
    fn approximate_nonruin(&self, t: f64, u_max: f64) -> PyResult<PyRuinApproximation> {
        Ok(PyRuinApproximation { inner: ruin::approximate_nonruin(&self.inner, t, u_max).map_err(py_err)? })
    }

    /// Norm ledger, chained derivative bounds and `total_bound` at rate `t`.
    #[pyo3(signature = (t, integrals = "exact"))]
    fn error_bound<'py>(&self, py: Python<'py>, t: f64, integrals: &str) -> PyResult<Bound<'py, PyDict>> {
        let (ledger, report) = bounds::bound_report(&self.inner, i2_mode(integrals)?).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("w1_norms", ledger.w1_norms.to_vec())?;
        d.set_item("w2_norms", ledger.w2_norms.to_vec())?;
        d.set_item("w1pp_w2pp", ledger.w1pp_w2pp.to_vec())?;
        d.set_item("ez", ledger.ez)?;
        d.set_item("ez2", ledger.ez2)?;
        d.set_item("i_f2", ledger.i_f2.to_vec())?;
        d.set_item("f0", ledger.f0)?;
        d.set_item("f1_0", ledger.f1_0)?;
        for (key, v) in [
            ("m1_norm_bound", report.m1_norm),
            ("um1_norm_bound", report.um1_norm),
            ("u2m1_norm_bound", report.u2m1_norm),
            ("m2_norm_bound", report.m2_norm),
            ("um2_norm_bound", report.um2_norm),
            ("u2m2_norm_bound", report.u2m2_norm),
            ("u2m3_norm_bound", report.u2m3_norm),
            ("u2m4_norm_bound", report.u2m4_norm),
            ("um3_norm_bound", report.um3_norm),
        ] {
            d.set_item(key, v)?;
        }
        d.set_item("t", t)?;
        d.set_item("total_bound", report.total_bound(t))?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("RiskModel(claims={:?}, phi={})", self.inner.claims().components(), self.inner.phi())
    }
}

/// Output of the accelerated ruin pipeline.
#[pyclass(frozen, name = "RuinApproximation", module = "renewinv")]
struct PyRuinApproximation {
    inner: ruin::RuinApproximation,
}

#[pymethods]
impl PyRuinApproximation {
    #[getter]
    fn t(&self) -> f64 {
        self.inner.t()
    }

    #[getter]
    fn u_max(&self) -> f64 {
        self.inner.u_max()
    }

    fn nonruin(&self, u: f64) -> PyResult<f64> {
        self.inner.nonruin(u).map_err(py_err)
    }

    fn ruin(&self, u: f64) -> PyResult<f64> {
        self.inner.ruin(u).map_err(py_err)
    }

    /// Plain (unaccelerated) operator applied to the non-ruin probability.
    fn nonruin_lstar(&self, u: f64) -> PyResult<f64> {
        self.inner.nonruin_lstar(u).map_err(py_err)
    }

    /// `[(k / t, value)]` for the accelerated non-ruin probability.
    fn lattice(&self) -> Vec<(f64, f64)> {
        self.inner.lattice().points().collect()
    }
}

/// `1 - phi exp(-beta (1 - phi) u)`.
#[pyfunction]
fn exact_nonruin_exponential(phi: f64, beta: f64, u: f64) -> f64 {
    ruin::exact_nonruin_exponential(phi, beta, u)
}

#[pyfunction]
fn log_gamma(x: f64) -> PyResult<f64> {
    specfun::log_gamma(x).map_err(py_err)
}

/// `P(N <= k)` for the negative binomial law with real shape `alpha` and success probability `rho`.
#[pyfunction]
fn negbin_cdf(k: usize, alpha: f64, rho: f64) -> PyResult<f64> {
    Ok(specfun::negbin_cdf(k, RealShape::new(alpha, rho).map_err(py_err)?))
}

/// Lattice weights of the discretized equilibrium law, `k = 0..=k_max`.
#[pyfunction]
fn discretize_equilibrium(claims: PyRef<'_, PyGammaMixture>, t: f64, k_max: usize) -> PyResult<Vec<f64>> {
    Ok(compound::discretize_equilibrium(&claims.inner, t, k_max).map_err(py_err)?.weights().to_vec())
}

/// Compound geometric lattice weights from severity weights on `{k / t}`.
#[pyfunction]
fn panjer_geometric(severity: Vec<f64>, t: f64, phi: f64, k_max: usize) -> PyResult<Vec<f64>> {
    let sev = compound::LatticePmf::new(t, severity).map_err(py_err)?;
    Ok(compound::panjer_geometric(&sev, phi, k_max).map_err(py_err)?.weights().to_vec())
}

fn builtin(transform: &str, param: f64) -> PyResult<(Box<dyn TransformOracle>, f64)> {
    match transform {
        "exp_decay" if param >= 0.0 && param.is_finite() => Ok((Box::new(ExpDecay { a: param }), 1.0)),
        "test_function" if param > 0.0 && param < 1.0 => {
            let o = LinearCombination::new()
                .with(1.0, std::sync::Arc::new(Constant(1.0)))
                .with(-(1.0 - param), std::sync::Arc::new(ExpDecay { a: param }));
            Ok((Box::new(o), param))
        }
        _ => Err(PyValueError::new_err(format!(
            "need exp_decay with a >= 0 or test_function with 0 < p < 1, got {transform:?} with {param}"
        ))),
    }
}

/// Invert `exp(-a u)` (`exp_decay`, param `a`) or `1 - (1 - p) exp(-p u)`
/// (`test_function`, param `p`) at the points `u`. `t` is the lattice rate
/// for `lstar` / `m2` and the order for `postwidder` / `stehfest2`.
#[pyfunction]
fn invert(transform: &str, param: f64, method: &str, t: f64, u: Vec<f64>) -> PyResult<Vec<f64>> {
    let (oracle, g0) = builtin(transform, param)?;
    let u_max = u.iter().copied().fold(0.0, f64::max);
    let k_max = (t * u_max).ceil().max(1.0) as usize;
    let order = || {
        if t >= 1.0 && t.fract() == 0.0 {
            Ok(t as usize)
        } else {
            Err(PyValueError::new_err(format!("order must be a positive integer, got {t}")))
        }
    };
    let out: Result<Vec<f64>, Error> = match method {
        "lstar" => {
            let lf = inversion::l_star_lattice(oracle.as_ref(), t, k_max).map_err(py_err)?;
            u.iter().map(|&x| lf.at(x)).collect()
        }
        "m2" => {
            let lf = inversion::m2_lattice(oracle.as_ref(), t, k_max, g0).map_err(py_err)?;
            u.iter().map(|&x| lf.at(x)).collect()
        }
        "postwidder" => {
            let n = order()?;
            u.iter().map(|&x| inversion::post_widder(oracle.as_ref(), n, x)).collect()
        }
        "stehfest2" => {
            let n = order()?;
            u.iter().map(|&x| inversion::stehfest2(oracle.as_ref(), n, x)).collect()
        }
        _ => return Err(PyValueError::new_err(format!("unknown method {method:?}"))),
    };
    out.map_err(py_err)
}

#[pymodule]
fn renewinv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGammaMixture>()?;
    m.add_class::<PyRiskModel>()?;
    m.add_class::<PyRuinApproximation>()?;
    m.add_function(wrap_pyfunction!(exact_nonruin_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(log_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(negbin_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(discretize_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(panjer_geometric, m)?)?;
    m.add_function(wrap_pyfunction!(invert, m)?)?;
    Ok(())
}
