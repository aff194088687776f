//! Python bindings for `ldplab`.
//!
//! ```python
//! import pyldplab as ld
//! sys = ld.System.load("systems/fs2.json")
//! fam = ld.TiltFamily(sys.subshift, sys.potential("zero"), sys.potential("ind1"))
//! fam.rate(0.75)  # {'alpha': 0.75, 'rate': 0.1308..., 'tilt': 1.0986..., 'boundary': False}
//! ```
//!
//! Words are passed as strings of symbol names. Library errors raise
//! `LdplabError` with the error kind as prefix.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use ldplab::ldp::{self, ExactMode, ExactOptions, Interval, McOptions};
use ldplab::thermo;

create_exception!(pyldplab, LdplabError, PyException);

fn err(e: ldplab::Error) -> PyErr {
    LdplabError::new_err(format!("{}: {e}", e.root().kind()))
}

trait OrRaise<T> {
    fn or_raise(self) -> PyResult<T>;
}

impl<T> OrRaise<T> for ldplab::Result<T> {
    fn or_raise(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_bound_py_any(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(to_py(py, x)?)?;
            }
            Ok(list.into_any())
        }
        Value::Object(m) => {
            let dict = PyDict::new(py);
            for (k, x) in m {
                dict.set_item(k, to_py(py, x)?)?;
            }
            Ok(dict.into_any())
        }
    }
}

fn report<'py>(py: Python<'py>, value: impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// A mixing subshift of finite type.
#[pyclass(name = "Subshift", module = "pyldplab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySubshift {
    inner: ldplab::SubshiftSpec,
}

impl PySubshift {
    fn word(&self, text: &str) -> PyResult<Vec<ldplab::Symbol>> {
        self.inner.parse_word(text).or_raise()
    }
}

#[pymethods]
impl PySubshift {
    /// Builds the subshift of a 0/1 transition matrix; rejects non-primitive matrices.
    #[new]
    #[pyo3(signature = (matrix, alphabet=None))]
    fn new(matrix: Vec<Vec<u8>>, alphabet: Option<Vec<String>>) -> PyResult<Self> {
        let inner = match alphabet {
            Some(a) => ldplab::SubshiftSpec::with_alphabet(a, &matrix),
            None => ldplab::SubshiftSpec::new(&matrix),
        }
        .or_raise()?;
        Ok(PySubshift { inner })
    }

    #[staticmethod]
    fn full_shift(m: usize) -> Self {
        PySubshift { inner: ldplab::SubshiftSpec::full_shift(m) }
    }

    #[staticmethod]
    fn golden_mean() -> Self {
        PySubshift { inner: ldplab::SubshiftSpec::golden_mean() }
    }

    #[getter]
    fn alphabet(&self) -> Vec<String> {
        self.inner.alphabet().to_vec()
    }

    #[getter]
    fn primitivity_power(&self) -> usize {
        self.inner.primitivity_power()
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<u8>> {
        self.inner.matrix()
    }

    fn is_admissible(&self, word: &str) -> PyResult<bool> {
        Ok(self.inner.is_admissible(&self.word(word)?))
    }

    /// Admissible words of length `k`.
    fn admissible_words(&self, k: usize) -> Vec<String> {
        self.inner.admissible_words(k).iter().map(|w| self.inner.format_word(w)).collect()
    }

    /// Admissible words of length `n` starting with `start`.
    fn leaf_words(&self, start: &str, n: usize) -> PyResult<Vec<String>> {
        let s = self.inner.symbol(start).or_raise()?;
        Ok(ldplab::unstable_leaf_words(&self.inner, s, n).iter().map(|w| self.inner.format_word(w)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Subshift(alphabet={:?}, matrix={:?})", self.inner.alphabet(), self.inner.matrix())
    }
}

/// A locally constant potential with finite memory.
#[pyclass(name = "Potential", module = "pyldplab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPotential {
    inner: ldplab::Potential,
}

#[pymethods]
impl PyPotential {
    /// Table keyed by admissible words of length `memory`.
    #[new]
    fn new(subshift: &PySubshift, memory: usize, table: std::collections::BTreeMap<String, f64>) -> PyResult<Self> {
        let mut parsed = std::collections::BTreeMap::new();
        for (k, v) in table {
            parsed.insert(subshift.word(&k)?, v);
        }
        Ok(PyPotential { inner: ldplab::Potential::from_table(&subshift.inner, memory, &parsed).or_raise()? })
    }

    #[staticmethod]
    fn zero(subshift: &PySubshift) -> Self {
        PyPotential { inner: ldplab::Potential::zero(&subshift.inner) }
    }

    #[staticmethod]
    fn indicator(subshift: &PySubshift, symbol: &str) -> PyResult<Self> {
        let s = subshift.inner.symbol(symbol).or_raise()?;
        Ok(PyPotential { inner: ldplab::Potential::indicator(&subshift.inner, s) })
    }

    /// `log p_a` on symbol `a`.
    #[staticmethod]
    fn bernoulli(subshift: &PySubshift, probs: Vec<f64>) -> PyResult<Self> {
        Ok(PyPotential { inner: ldplab::Potential::bernoulli(&subshift.inner, &probs).or_raise()? })
    }

    #[getter]
    fn memory(&self) -> usize {
        self.inner.memory()
    }

    /// Value on the last `memory` symbols of `word`.
    fn value(&self, subshift: &PySubshift, word: &str) -> PyResult<f64> {
        let w = subshift.word(word)?;
        if w.len() < self.inner.memory() {
            return Err(err(ldplab::Error::WordTooShort { got: w.len(), need: self.inner.memory() }));
        }
        Ok(self.inner.value_at_end(&w))
    }

    /// `self + t * other`.
    fn add_scaled(&self, subshift: &PySubshift, other: &PyPotential, t: f64) -> PyResult<Self> {
        Ok(PyPotential { inner: self.inner.add_scaled(&subshift.inner, &other.inner, t).or_raise()? })
    }

    fn __repr__(&self) -> String {
        format!("Potential(memory={})", self.inner.memory())
    }
}

/// A system file: subshift plus named potentials.
#[pyclass(name = "System", module = "pyldplab", frozen)]
struct PySystem {
    inner: ldplab::System,
}

#[pymethods]
impl PySystem {
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PySystem { inner: ldplab::System::load(path).or_raise()? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySystem { inner: ldplab::System::from_json(text).or_raise()? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn subshift(&self) -> PySubshift {
        PySubshift { inner: self.inner.spec.clone() }
    }

    #[getter]
    fn potential_names(&self) -> Vec<String> {
        self.inner.potentials.keys().cloned().collect()
    }

    fn potential(&self, name: &str) -> PyResult<PyPotential> {
        Ok(PyPotential { inner: self.inner.potential(name).or_raise()?.clone() })
    }
}

/// The family `G + tφ` with `q(t) = P(G + tφ) - P(G)` and the scalar rate function.
#[pyclass(name = "TiltFamily", module = "pyldplab", frozen)]
struct PyTiltFamily {
    inner: ldp::TiltFamily,
}

#[pymethods]
impl PyTiltFamily {
    #[new]
    fn new(subshift: &PySubshift, g: &PyPotential, phi: &PyPotential) -> PyResult<Self> {
        Ok(PyTiltFamily { inner: ldp::TiltFamily::new(&subshift.inner, &g.inner, &phi.inner).or_raise()? })
    }

    #[getter]
    fn pressure(&self) -> f64 {
        self.inner.pressure()
    }

    /// Ergodic range `(min, max)` of `∫φ`.
    #[getter]
    fn range(&self) -> (f64, f64) {
        self.inner.range()
    }

    fn mean(&self) -> PyResult<f64> {
        self.inner.mean().or_raise()
    }

    fn q(&self, t: f64) -> PyResult<f64> {
        self.inner.q(t).or_raise()
    }

    fn q_derivative(&self, t: f64) -> PyResult<f64> {
        self.inner.q_derivative(t).or_raise()
    }

    /// Tilt `t` with `q'(t) = alpha`, or `None` outside the open range.
    fn solve_tilt(&self, alpha: f64) -> PyResult<Option<f64>> {
        self.inner.solve_tilt(alpha).or_raise()
    }

    /// `{'alpha', 'rate', 'tilt', 'boundary'}`; `rate` is `inf` outside the range.
    fn rate<'py>(&self, py: Python<'py>, alpha: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.rate(alpha).or_raise()?;
        let d = PyDict::new(py);
        d.set_item("alpha", r.alpha)?;
        d.set_item("rate", r.rate)?;
        d.set_item("tilt", r.tilt)?;
        d.set_item("boundary", r.boundary)?;
        Ok(d)
    }

    /// `(alphas, rates)` on `points` equally spaced values across the range.
    fn rate_curve(&self, points: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let c = ldp::RateCurve::uniform(&self.inner, points).or_raise()?;
        Ok((c.alphas, c.values))
    }
}

/// Conditional Gibbs measure on the unstable leaf fixed by a past word.
#[pyclass(name = "LeafMeasure", module = "pyldplab", frozen)]
struct PyLeafMeasure {
    inner: ldplab::LeafMeasure,
    spec: ldplab::SubshiftSpec,
}

#[pymethods]
impl PyLeafMeasure {
    /// `block` defaults to the memory of `g`; raise it for observables with longer memory.
    #[new]
    #[pyo3(signature = (subshift, g, past, block=None))]
    fn new(subshift: &PySubshift, g: &PyPotential, past: &str, block: Option<usize>) -> PyResult<Self> {
        let past = subshift.word(past)?;
        let block = block.unwrap_or(g.inner.memory());
        let inner = ldplab::leaf_measure_with_block(&subshift.inner, &g.inner, &past, block).or_raise()?;
        Ok(PyLeafMeasure { inner, spec: subshift.inner.clone() })
    }

    #[getter]
    fn start_symbol(&self) -> String {
        self.spec.format_word(&[self.inner.start_symbol()])
    }

    #[getter]
    fn pressure(&self) -> f64 {
        self.inner.pressure()
    }

    /// Mass of the cylinder of a leaf word (which includes the start symbol).
    fn cylinder_mass(&self, word: &str) -> PyResult<f64> {
        let w = self.spec.parse_word(word).or_raise()?;
        self.inner.cylinder_mass(&w).or_raise()
    }

    fn bowen_ball_mass(&self, word: &str, n: usize, r: usize) -> PyResult<f64> {
        let w = self.spec.parse_word(word).or_raise()?;
        self.inner.bowen_ball_mass(&w, n, r).or_raise()
    }

    /// Leaf word of length `n` drawn with stream `index` of `seed`.
    #[pyo3(signature = (n, seed, index=0))]
    fn sample(&self, n: usize, seed: u64, index: u64) -> String {
        self.spec.format_word(&self.inner.sample_path_indexed(n, seed, index))
    }

    fn gibbs_ratio_audit<'py>(&self, py: Python<'py>, n_max: usize, r: usize) -> PyResult<Bound<'py, PyAny>> {
        report(py, self.inner.gibbs_ratio_audit(n_max, r).or_raise()?)
    }
}

fn interval(text: &str) -> PyResult<Interval> {
    text.parse::<Interval>().or_raise()
}

fn point_dict<'py>(py: Python<'py>, p: &ldp::DeviationPoint, method: &str) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n", p.n)?;
    d.set_item("mass", p.mass)?;
    d.set_item("log_mass", p.log_mass)?;
    d.set_item("lower", p.lower)?;
    d.set_item("upper", p.upper)?;
    d.set_item("stderr", p.stderr)?;
    d.set_item("method", method)?;
    Ok(d)
}

#[pyfunction]
fn pressure(subshift: &PySubshift, g: &PyPotential) -> PyResult<f64> {
    thermo::pressure(&subshift.inner, &g.inner).or_raise()
}

/// Equilibrium state of `g`: `{'pressure', 'entropy', 'states', 'stationary', 'transition'}`.
#[pyfunction]
fn equilibrium_state<'py>(py: Python<'py>, subshift: &PySubshift, g: &PyPotential) -> PyResult<Bound<'py, PyDict>> {
    let (mu, p) = thermo::equilibrium_state(&subshift.inner, &g.inner, g.inner.memory()).or_raise()?;
    let chain = mu.chain();
    let n = chain.len();
    let d = PyDict::new(py);
    d.set_item("pressure", p)?;
    d.set_item("entropy", mu.entropy())?;
    let states: Vec<String> = (0..n).map(|i| subshift.inner.format_word(chain.state_word(i))).collect();
    d.set_item("states", states)?;
    d.set_item("stationary", mu.stationary().to_vec())?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| mu.row(i).to_vec()).collect();
    d.set_item("transition", rows)?;
    Ok(d)
}

#[pyfunction]
fn ergodic_range(subshift: &PySubshift, phi: &PyPotential) -> PyResult<(f64, f64)> {
    ldp::ergodic_range(&subshift.inner, &phi.inner).or_raise()
}

#[pyfunction]
fn rate_scalar<'py>(py: Python<'py>, subshift: &PySubshift, g: &PyPotential, phi: &PyPotential, alpha: f64) -> PyResult<Bound<'py, PyDict>> {
    PyTiltFamily::new(subshift, g, phi)?.rate(py, alpha)
}

/// Mass of `{S_nφ/n ∈ interval}`; `interval` as `"0.7:1"` or `"[0.4,0.5)"`.
#[pyfunction]
#[pyo3(signature = (leaf, phi, interval_text, n, mode="auto", bin_width=None))]
fn deviation_mass_exact<'py>(
    py: Python<'py>,
    leaf: &PyLeafMeasure,
    phi: &PyPotential,
    interval_text: &str,
    n: usize,
    mode: &str,
    bin_width: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = match mode {
        "auto" => ExactMode::Auto,
        "enumerate" => ExactMode::Enumerate,
        "lattice" => ExactMode::Lattice,
        "binned" => ExactMode::Binned {
            bin_width: bin_width.ok_or_else(|| PyValueError::new_err("binned mode needs bin_width"))?,
        },
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let opts = ExactOptions { mode, bin_width, ..Default::default() };
    let (p, method) = ldp::deviation_mass_exact(&leaf.inner, &phi.inner, &interval(interval_text)?, n, &opts).or_raise()?;
    point_dict(py, &p, method.as_str())
}

/// Monte Carlo estimate; `tilt` is `None`, `"auto"` or a number.
#[pyfunction]
#[pyo3(signature = (leaf, phi, interval_text, n, samples, seed, tilt=None))]
fn deviation_mass_mc<'py>(
    py: Python<'py>,
    leaf: &PyLeafMeasure,
    phi: &PyPotential,
    interval_text: &str,
    n: usize,
    samples: u64,
    seed: u64,
    tilt: Option<Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyDict>> {
    let iv = interval(interval_text)?;
    let tilt = match tilt {
        None => None,
        Some(t) if t.extract::<String>().is_ok_and(|s| s == "auto") => {
            let fam = ldp::TiltFamily::on_chain(leaf.inner.chain(), leaf.inner.potential(), &phi.inner).or_raise()?;
            Some(ldp::recommended_tilt(&fam, &iv).or_raise()?)
        }
        Some(t) => Some(t.extract::<f64>()?),
    };
    let p = ldp::deviation_mass_mc(&leaf.inner, &phi.inner, &iv, n, &McOptions { samples, tilt, seed }).or_raise()?;
    point_dict(py, &p, "monte-carlo")
}

/// Fit of `-(1/n) log m_n ≈ a + b log(n)/n + c/n`.
#[pyfunction]
fn rate_fit<'py>(py: Python<'py>, lengths: Vec<f64>, masses: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    if lengths.len() != masses.len() {
        return Err(PyValueError::new_err("lengths and masses differ in length"));
    }
    let pts: Vec<(f64, f64)> = lengths.into_iter().zip(masses).collect();
    report(py, ldp::fit_points(&pts).or_raise()?)
}

#[pyfunction]
fn growth_estimate(leaf: &PyLeafMeasure, phi: &PyPotential, n: usize) -> PyResult<f64> {
    ldp::growth_estimate(&leaf.inner, &phi.inner, n).or_raise()
}

#[pyfunction]
#[pyo3(signature = (subshift, samples=1000, seed=0))]
fn axioms_check<'py>(py: Python<'py>, subshift: &PySubshift, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    report(py, ldplab::axioms_check(&subshift.inner, samples, seed))
}

#[pymodule]
fn pyldplab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", ldplab::VERSION)?;
    m.add("LdplabError", m.py().get_type::<LdplabError>())?;
    m.add_class::<PySubshift>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyTiltFamily>()?;
    m.add_class::<PyLeafMeasure>()?;
    m.add_function(wrap_pyfunction!(pressure, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium_state, m)?)?;
    m.add_function(wrap_pyfunction!(ergodic_range, m)?)?;
    m.add_function(wrap_pyfunction!(rate_scalar, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_mass_exact, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_mass_mc, m)?)?;
    m.add_function(wrap_pyfunction!(rate_fit, m)?)?;
    m.add_function(wrap_pyfunction!(growth_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(axioms_check, m)?)?;
    Ok(())
}
