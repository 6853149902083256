//! Python module `btcycles`. Rationals come back as `fractions.Fraction`,
//! structured results as plain dicts.

use btcycles_core::cycles::{cycle_decomposition, max_vertex};
use btcycles_core::density::{
    alpha_closed_inv, density_count_checked, reconcile_relation, CountBudget, TernaryFormChoice,
    TernaryTag,
};
use btcycles_core::dot::tube_dot;
use btcycles_core::forms::{diagonalize, realize_anticommuting_pair, BinaryForm, Convention, FormInvariants};
use btcycles_core::harness::{run_suite, SuiteConfig, SuiteName};
use btcycles_core::intersection::{e_p_bruteforce, e_p_closed, gross_keating as gk};
use btcycles_core::lattice::{m_of, LatticeVertex, SpecialEndomorphism};
use btcycles_core::padic::Sign;
use btcycles_core::rational::ExactRational;
use btcycles_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

fn err(e: Error) -> PyErr {
    match e {
        Error::Resource { .. } | Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn fraction<'py>(py: Python<'py>, x: &ExactRational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((x.to_string(),))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(x).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.getattr("loads")?.call1((s,))
}

fn convention(s: &str) -> PyResult<Convention> {
    match s {
        "q" => Ok(Convention::SmallQ),
        "Q" => Ok(Convention::BigQ),
        _ => Err(PyValueError::new_err(format!("convention must be 'q' or 'Q', got {s:?}"))),
    }
}

fn sign(x: i64) -> PyResult<Sign> {
    match x {
        1 => Ok(Sign::Plus),
        -1 => Ok(Sign::Minus),
        _ => Err(PyValueError::new_err(format!("character value must be +1 or -1, got {x}"))),
    }
}

/// Invariants `(alpha, beta, chi1, chi2)` of a binary form at `p`.
#[pyclass(name = "Invariants", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyInvariants(FormInvariants);

#[pymethods]
impl PyInvariants {
    #[new]
    #[pyo3(signature = (p, alpha, beta, chi1=1, chi2=1, convention="q"))]
    fn new(p: u64, alpha: u32, beta: u32, chi1: i64, chi2: i64, convention: &str) -> PyResult<Self> {
        let c = self::convention(convention)?;
        FormInvariants::new(p, alpha, beta, sign(chi1)?, sign(chi2)?, c).map(Self).map_err(err)
    }

    /// Invariants of `[[t11, t12], [t12, t22]]`.
    #[staticmethod]
    #[pyo3(signature = (p, t11, t12, t22, convention="q"))]
    fn of_form(p: u64, t11: i64, t12: i64, t22: i64, convention: &str) -> PyResult<Self> {
        let t = BinaryForm::from_ints(t11, t12, t22, self::convention(convention)?);
        diagonalize(p, &t).map(Self).map_err(err)
    }

    #[getter]
    fn p(&self) -> u64 {
        self.0.p
    }
    #[getter]
    fn alpha(&self) -> u32 {
        self.0.alpha
    }
    #[getter]
    fn beta(&self) -> u32 {
        self.0.beta
    }
    #[getter]
    fn chi1(&self) -> i64 {
        self.0.chi1.to_i64()
    }
    #[getter]
    fn chi2(&self) -> i64 {
        self.0.chi2.to_i64()
    }
    #[getter]
    fn convention(&self) -> &'static str {
        self.0.convention.name()
    }

    fn mu(&self) -> i64 {
        self.0.mu().to_i64()
    }

    fn is_realizable(&self) -> PyResult<bool> {
        self.0.is_realizable().map_err(err)
    }

    fn in_convention(&self, convention: &str) -> PyResult<Self> {
        Ok(Self(self.0.in_convention(self::convention(convention)?)))
    }

    fn diagonal_form(&self) -> (String, String, String) {
        let t = self.0.diagonal_form();
        let m = t.matrix();
        (m.get(0, 0).to_string(), m.get(0, 1).to_string(), m.get(1, 1).to_string())
    }

    fn __repr__(&self) -> String {
        format!("Invariants(p={}, {}, convention={:?})", self.0.p, self.0.label(), self.0.convention.name())
    }
}

/// Traceless `[[a, b], [c, -a]]` with `p`-integral `q(j) = -det`.
#[pyclass(name = "SpecialEndomorphism", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEndomorphism(SpecialEndomorphism);

#[pymethods]
impl PyEndomorphism {
    #[new]
    fn new(p: u64, a: i64, b: i64, c: i64) -> PyResult<Self> {
        SpecialEndomorphism::from_ints(p, a, b, c).map(Self).map_err(err)
    }

    #[getter]
    fn alpha(&self) -> u32 {
        self.0.alpha()
    }

    fn q<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, self.0.q())
    }

    /// `m_[L](j)` at the vertex `[p^m, x]`; `x` is a string like `"7/3"`.
    #[pyo3(signature = (m=0, x="0"))]
    fn m_at(&self, m: i64, x: &str) -> PyResult<i64> {
        let x: ExactRational = x.parse().map_err(err)?;
        let v = LatticeVertex::new(self.0.p(), m, &x).map_err(err)?;
        Ok(m_of(&self.0, &v))
    }

    /// Vertical multiplicities on the ball of `radius` around the top vertex.
    fn decomposition<'py>(&self, py: Python<'py>, radius: u32) -> PyResult<Bound<'py, PyAny>> {
        let ball = max_vertex(&self.0).ball(radius, btcycles_core::lattice::DEFAULT_BALL_CAP).map_err(err)?;
        to_py(py, &cycle_decomposition(&self.0, &ball))
    }

    fn tube_dot(&self, radius: u32) -> PyResult<String> {
        let ball = max_vertex(&self.0).ball(radius, btcycles_core::lattice::DEFAULT_BALL_CAP).map_err(err)?;
        Ok(tube_dot(&self.0, &ball))
    }
}

/// Anticommuting pair realizing `inv` (in the `q` convention).
#[pyfunction]
fn realize(inv: &PyInvariants) -> PyResult<(PyEndomorphism, PyEndomorphism)> {
    let (j, jp) = realize_anticommuting_pair(&inv.0).map_err(err)?;
    Ok((PyEndomorphism(j), PyEndomorphism(jp)))
}

/// Closed-form local intersection number.
#[pyfunction]
fn e_p(inv: &PyInvariants) -> PyResult<i64> {
    e_p_closed(&inv.0).map_err(err)
}

/// Tree summation; returns the `hh, hv, vh, vv, total` breakdown.
#[pyfunction]
fn e_p_breakdown<'py>(py: Python<'py>, inv: &PyInvariants) -> PyResult<Bound<'py, PyAny>> {
    let (j, jp) = realize_anticommuting_pair(&inv.0).map_err(err)?;
    to_py(py, &e_p_bruteforce(&j, &jp).map_err(err)?)
}

#[pyfunction]
fn gross_keating<'py>(py: Python<'py>, inv: &PyInvariants) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &gk(&inv.0))
}

/// Local density of the binary form `inv` (`Q` convention) by ternary form
/// `s` in `{"S", "Sprime", "Sdoubleprime"}`, closed form or by counting.
#[pyfunction]
#[pyo3(signature = (s, inv, method="closed", level=None))]
fn density<'py>(
    py: Python<'py>,
    s: &str,
    inv: &PyInvariants,
    method: &str,
    level: Option<u32>,
) -> PyResult<Bound<'py, PyAny>> {
    let tag: TernaryTag = s.parse().map_err(err)?;
    let inv = inv.0.in_convention(Convention::BigQ);
    let value = match method {
        "closed" => alpha_closed_inv(tag, &inv)
            .map_err(err)?
            .ok_or_else(|| PyValueError::new_err("no closed form for this case; use method='count'"))?,
        "count" => {
            let choice = TernaryFormChoice::new(tag, inv.p).map_err(err)?;
            let st = py
                .detach(|| density_count_checked(&choice, &inv.diagonal_form(), level, &CountBudget::default()))
                .map_err(err)?;
            if !st.stable {
                return Err(PyRuntimeError::new_err(format!(
                    "count not stable: {} at level {}, {} at level {}",
                    st.value, st.level, st.check_value, st.check_level
                )));
            }
            st.value
        }
        _ => return Err(PyValueError::new_err("method must be 'closed' or 'count'")),
    };
    fraction(py, &value)
}

/// Exact fit of the three-term relation on the `mu = +1` grid.
#[pyfunction]
#[pyo3(signature = (p, bound=6))]
fn reconcile<'py>(py: Python<'py>, p: u64, bound: u32) -> PyResult<Bound<'py, PyAny>> {
    let rec = py.detach(|| reconcile_relation(p, bound)).map_err(err)?;
    to_py(py, &rec)
}

/// Runs a verification suite; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (suite="all", primes=None, bound=None, seed=None))]
fn verify<'py>(
    py: Python<'py>,
    suite: &str,
    primes: Option<Vec<u64>>,
    bound: Option<u32>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let name: SuiteName = suite.parse().map_err(err)?;
    let mut config = SuiteConfig::default();
    if let Some(p) = primes {
        config.primes = p;
    }
    if let Some(b) = bound {
        config.bound = b;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let report = py.detach(|| run_suite(name, &config)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn btcycles(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInvariants>()?;
    m.add_class::<PyEndomorphism>()?;
    m.add_function(wrap_pyfunction!(realize, m)?)?;
    m.add_function(wrap_pyfunction!(e_p, m)?)?;
    m.add_function(wrap_pyfunction!(e_p_breakdown, m)?)?;
    m.add_function(wrap_pyfunction!(gross_keating, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(reconcile, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
