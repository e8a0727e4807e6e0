//! Python bindings: build histogram targets, compile them into ReLU
//! generator networks, sample and measure the result.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use relugen_core::histogram::{quantize_density, tv_distance};
use relugen_core::metrics::{empirical_wasserstein, solve_discrete_ot, wasserstein_1d, AtomicMeasure};
use relugen_core::pwl::build_inverse_cdf_pwl;
use relugen_core::sampler::{sample_histogram, sample_pushforward};
use relugen_core::transport::{
    build_map, claimed_connectivity_bound, claimed_depth, lower_to_network, map_cell_mass, wasserstein_upper_bound,
};
use relugen_core::{
    Cell, DensitySpec, GeneralHistogram1D, HistogramD, Law, Method, NetworkFile, NoiseSource, PwlFunction, ReluNetwork,
    Samples, TransportMap1to2,
};
use serde_json::{Map, Value};

fn err(e: relugen_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn method(name: &str) -> PyResult<Method> {
    name.parse().map_err(err)
}

fn rows(s: &Samples) -> Vec<Vec<f64>> {
    s.iter().map(<[f64]>::to_vec).collect()
}

fn flatten(points: Vec<Vec<f64>>) -> PyResult<Samples> {
    let dim = points.first().map_or(1, Vec::len);
    if points.iter().any(|p| p.len() != dim) {
        return Err(PyValueError::new_err("points must all have the same length"));
    }
    Samples::from_flat(dim, points.into_iter().flatten().collect()).map_err(err)
}

fn json_params(params: Option<&Bound<'_, PyDict>>) -> PyResult<Map<String, Value>> {
    let mut out = Map::new();
    let Some(params) = params else { return Ok(out) };
    for (k, v) in params.iter() {
        let key: String = k.extract()?;
        let value = if let Ok(i) = v.extract::<i64>() {
            Value::from(i)
        } else if let Ok(x) = v.extract::<f64>() {
            Value::from(x)
        } else if let Ok(s) = v.extract::<String>() {
            Value::from(s)
        } else {
            return Err(PyValueError::new_err(format!("parameter {key:?} must be a number or a string")));
        };
        out.insert(key, value);
    }
    Ok(out)
}

/// A Lipschitz density on the unit cube.
#[pyclass(name = "Density", module = "relugen", frozen)]
struct PyDensity(DensitySpec);

#[pymethods]
impl PyDensity {
    /// A built-in density (`uniform`, `ramp`, `cosine_bump`) with keyword parameters.
    #[staticmethod]
    #[pyo3(signature = (name, **params))]
    fn builtin(name: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        DensitySpec::builtin(name, &json_params(params)?).map(Self).map_err(err)
    }

    /// Values on an `m^dim` midpoint grid, flattened with the last axis fastest.
    #[staticmethod]
    fn from_grid(dim: usize, m: usize, values: Vec<f64>, lipschitz: f64) -> PyResult<Self> {
        DensitySpec::from_grid(dim, m, values, lipschitz).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        DensitySpec::from_json_str(text).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn lipschitz(&self) -> f64 {
        self.0.lipschitz()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!("expected a point of length {}", self.0.dim())));
        }
        Ok(self.0.eval(&x))
    }

    /// Cell averages on the uniform `n`-grid.
    fn quantize(&self, n: usize) -> PyResult<PyHistogram> {
        quantize_density(&self.0, n).map(PyHistogram).map_err(err)
    }

    /// Total variation distance to a histogram.
    fn tv_distance(&self, h: &PyHistogram) -> PyResult<f64> {
        tv_distance(Law::Density(&self.0), Law::Histogram(&h.0)).map_err(err)
    }
}

/// A histogram on the uniform `n^dim` grid of the unit cube.
#[pyclass(name = "Histogram", module = "relugen", frozen)]
struct PyHistogram(HistogramD);

#[pymethods]
impl PyHistogram {
    /// Weights are densities per cell, flattened with the last axis fastest;
    /// they must average to one.
    #[new]
    #[pyo3(signature = (dim, n, weights, normalize = false))]
    fn new(dim: usize, n: usize, weights: Vec<f64>, normalize: bool) -> PyResult<Self> {
        let h = if normalize { HistogramD::from_unnormalized(dim, n, weights) } else { HistogramD::new(dim, n, weights) };
        h.map(Self).map_err(err)
    }

    #[staticmethod]
    fn uniform(dim: usize, n: usize) -> Self {
        Self(HistogramD::uniform(dim, n))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn density(&self, x: Vec<f64>) -> f64 {
        self.0.density(&x)
    }

    fn marginal_x(&self) -> PyResult<Self> {
        self.0.marginal_x().map(Self).map_err(err)
    }

    fn marginal_y(&self) -> PyResult<Self> {
        self.0.marginal_y().map(Self).map_err(err)
    }

    fn conditional_y(&self, i: usize) -> PyResult<Self> {
        self.0.conditional_y(i).map(Self).map_err(err)
    }

    /// Mass of the box `[lo, hi]`.
    fn cell_mass(&self, lo: Vec<f64>, hi: Vec<f64>) -> PyResult<f64> {
        self.0.cell_mass(&Cell::new(lo, hi).map_err(err)?).map_err(err)
    }

    /// `count` independent draws as a list of points.
    #[pyo3(signature = (count, seed = 0))]
    fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        rows(&sample_histogram(&NoiseSource::new(seed), &self.0, count))
    }

    fn __repr__(&self) -> String {
        format!("Histogram(dim={}, n={})", self.0.dim(), self.0.n())
    }
}

/// A continuous piecewise-linear function on `[0, 1]`.
#[pyclass(name = "Pwl", module = "relugen", frozen)]
struct PyPwl(PwlFunction);

#[pymethods]
impl PyPwl {
    #[staticmethod]
    fn from_breakpoints(knots: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        PwlFunction::from_breakpoints(knots, values).map(Self).map_err(err)
    }

    /// The monotone map pushing `U[0,1]` onto a histogram with the given
    /// breakpoints and per-piece densities.
    #[staticmethod]
    fn inverse_cdf(breakpoints: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        let h = GeneralHistogram1D::new(breakpoints, weights).map_err(err)?;
        build_inverse_cdf_pwl(&h).map(Self).map_err(err)
    }

    #[getter]
    fn knots(&self) -> Vec<f64> {
        self.0.knots().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn __call__(&self, x: f64) -> f64 {
        self.0.eval(x)
    }

    /// `self(inner(x))`.
    fn compose(&self, inner: &PyPwl) -> Self {
        Self(PwlFunction::compose(&self.0, &inner.0))
    }

    fn to_network(&self) -> PyNetwork {
        PyNetwork(relugen_core::relunet::make_pwl_network(&self.0))
    }
}

/// A dense feed-forward ReLU network.
#[pyclass(name = "Network", module = "relugen", frozen)]
struct PyNetwork(ReluNetwork);

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        NetworkFile::from_json(text).and_then(|f| f.network()).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        NetworkFile::read(path).and_then(|f| f.network()).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        NetworkFile::new(&self.0, None).to_json().map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        NetworkFile::new(&self.0, None).write(path).map_err(err)
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    #[getter]
    fn connectivity(&self) -> usize {
        self.0.connectivity()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.0.output_dim()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.eval(&x).map_err(err)
    }

    /// Push `count` uniform draws through a one-input network.
    #[pyo3(signature = (count, seed = 0))]
    fn sample(&self, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        sample_pushforward(&NoiseSource::new(seed), &self.0, count).map(|s| rows(&s)).map_err(err)
    }
}

/// A transport map `[0,1] -> [0,1]^2` whose pushforward of `U[0,1]` matches
/// a two-dimensional histogram.
#[pyclass(name = "TransportMap", module = "relugen", frozen)]
struct PyTransportMap(TransportMap1to2);

#[pymethods]
impl PyTransportMap {
    /// `method` is `standard`, `linewise` or `alt`.
    #[new]
    #[pyo3(signature = (histogram, s, method = "standard"))]
    fn new(histogram: &PyHistogram, s: u32, method: &str) -> PyResult<Self> {
        build_map(&histogram.0, s, self::method(method)?).map(Self).map_err(err)
    }

    #[getter]
    fn method(&self) -> String {
        self.0.method().to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn s(&self) -> u32 {
        self.0.s()
    }

    fn __call__(&self, x: f64) -> (f64, f64) {
        self.0.eval(x)
    }

    /// Exact pushforward mass of the rectangle `[x0,x1] x [y0,y1]`.
    fn cell_mass(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> PyResult<f64> {
        map_cell_mass(&self.0, &Cell::rect(x0, x1, y0, y1).map_err(err)?).map_err(err)
    }

    fn to_network(&self) -> PyResult<PyNetwork> {
        lower_to_network(&self.0).map(PyNetwork).map_err(err)
    }

    #[pyo3(signature = (count, seed = 0))]
    fn sample(&self, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        sample_pushforward(&NoiseSource::new(seed), &self.0, count).map(|s| rows(&s)).map_err(err)
    }

    /// Upper bound on the Wasserstein distance to the histogram.
    fn wasserstein_bound(&self) -> f64 {
        wasserstein_upper_bound(self.0.n(), self.0.s(), self.0.method())
    }
}

/// Claimed `(depth, connectivity bound)` of the lowered network.
#[pyfunction]
#[pyo3(signature = (n, s, method = "standard"))]
fn network_size(n: usize, s: u32, method: &str) -> PyResult<(usize, f64)> {
    let m = self::method(method)?;
    Ok((claimed_depth(m, n, s), claimed_connectivity_bound(m, n, s)))
}

/// Wasserstein-1 distance between two one-dimensional histograms.
#[pyfunction(name = "wasserstein_1d")]
fn py_wasserstein_1d(breaks_a: Vec<f64>, weights_a: Vec<f64>, breaks_b: Vec<f64>, weights_b: Vec<f64>) -> PyResult<f64> {
    let a = GeneralHistogram1D::new(breaks_a, weights_a).map_err(err)?;
    let b = GeneralHistogram1D::new(breaks_b, weights_b).map_err(err)?;
    Ok(wasserstein_1d(&a, &b))
}

/// Exact transport cost between uniform subsamples of two point clouds.
#[pyfunction(name = "empirical_wasserstein")]
#[pyo3(signature = (a, b, atoms = 2000, seed = 0))]
fn py_empirical_wasserstein(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, atoms: usize, seed: u64) -> PyResult<f64> {
    empirical_wasserstein(&flatten(a)?, &flatten(b)?, atoms, seed).map_err(err)
}

/// Optimal transport between weighted point sets under Euclidean cost.
/// Returns the cost and the plan as `(i, j, mass)` triples.
#[pyfunction]
fn solve_ot(
    xs: Vec<Vec<f64>>,
    a: Vec<f64>,
    ys: Vec<Vec<f64>>,
    b: Vec<f64>,
) -> PyResult<(f64, Vec<(usize, usize, f64)>)> {
    let (xs, ys) = (flatten(xs)?, flatten(ys)?);
    let mu = AtomicMeasure::new(xs.dim(), xs.data().to_vec(), a).map_err(err)?;
    let nu = AtomicMeasure::new(ys.dim(), ys.data().to_vec(), b).map_err(err)?;
    let r = solve_discrete_ot(&mu, &nu).map_err(err)?;
    Ok((r.cost, r.plan.iter().map(|e| (e.source, e.target, e.mass)).collect()))
}

#[pymodule]
fn relugen(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensity>()?;
    m.add_class::<PyHistogram>()?;
    m.add_class::<PyPwl>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyTransportMap>()?;
    m.add_function(wrap_pyfunction!(network_size, m)?)?;
    m.add_function(wrap_pyfunction!(py_wasserstein_1d, m)?)?;
    m.add_function(wrap_pyfunction!(py_empirical_wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ot, m)?)?;
    Ok(())
}
