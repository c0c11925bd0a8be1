//! Python bindings: cyclotomic integers, windows, the Penrose scheme, the
//! Perron-Frobenius solve, the window-side densities and the verification
//! report.

use mcms_core::refine::{self, SolveOptions};
use mcms_core::scheme::{self, NuPolicy, WindowWeight};
use mcms_core::verify::{self, VerifyOptions};
use mcms_core::{pf_eigen as core_pf_eigen, ConvexPolygon, CycInt as CoreCycInt, Vec2};
use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: mcms_core::Error) -> PyErr {
    match e {
        mcms_core::Error::Overflow | mcms_core::Error::NotDivisible(..) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 || rows.iter().any(|row| row.len() != r) {
        return Err(PyValueError::new_err("expected a non-empty square matrix"));
    }
    Ok(DMatrix::from_fn(r, r, |j, i| rows[j][i]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|j| m.row(j).iter().copied().collect()).collect()
}

/// Element of Z[xi] in the basis 1, xi, xi^2, xi^3.
#[pyclass(frozen, eq, hash, skip_from_py_object, module = "mcms")]
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct CycInt(CoreCycInt);

#[pymethods]
impl CycInt {
    #[new]
    #[pyo3(signature = (m0=0, m1=0, m2=0, m3=0))]
    fn new(m0: i64, m1: i64, m2: i64, m3: i64) -> Self {
        CycInt(CoreCycInt::new(m0, m1, m2, m3))
    }

    #[staticmethod]
    fn tau() -> Self {
        CycInt(CoreCycInt::TAU)
    }

    #[getter]
    fn coeffs(&self) -> [i64; 4] {
        self.0.coeffs()
    }

    fn __add__(&self, o: &CycInt) -> PyResult<Self> {
        self.0.checked_add(o.0).map(CycInt).map_err(err)
    }

    fn __sub__(&self, o: &CycInt) -> PyResult<Self> {
        self.0.checked_sub(o.0).map(CycInt).map_err(err)
    }

    fn __mul__(&self, o: &CycInt) -> PyResult<Self> {
        self.0.checked_mul(o.0).map(CycInt).map_err(err)
    }

    fn __neg__(&self) -> PyResult<Self> {
        self.0.checked_neg().map(CycInt).map_err(err)
    }

    /// Exact quotient; raises ArithmeticError when not divisible.
    fn div(&self, o: &CycInt) -> PyResult<Self> {
        self.0.checked_div(o.0).map(CycInt).map_err(err)
    }

    fn star(&self) -> Self {
        CycInt(self.0.star())
    }

    fn rho(&self) -> u8 {
        self.0.rho()
    }

    fn norm(&self) -> PyResult<i64> {
        self.0.norm().map_err(err)
    }

    fn embed_physical(&self) -> Complex64 {
        self.0.embed_physical()
    }

    fn embed_internal(&self) -> Complex64 {
        self.0.embed_internal()
    }

    fn __repr__(&self) -> String {
        format!("CycInt{}", self.0)
    }
}

/// Convex window or one of its degenerate collapses.
#[pyclass(frozen, skip_from_py_object, module = "mcms")]
#[derive(Clone)]
struct Region(mcms_core::Region);

#[pymethods]
impl Region {
    #[staticmethod]
    fn polygon(vertices: Vec<(f64, f64)>) -> PyResult<Self> {
        mcms_core::Region::polygon(vertices.into_iter().map(|(x, y)| Vec2::new(x, y)).collect())
            .map(Region)
            .map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, radius=1.0, phase=0.0))]
    fn regular(n: usize, radius: f64, phase: f64) -> PyResult<Self> {
        ConvexPolygon::regular(n, radius, phase).map(|p| Region(mcms_core::Region::Polygon(p))).map_err(err)
    }

    /// "empty", "point", "segment" or "polygon".
    #[getter]
    fn kind(&self) -> &'static str {
        match self.0 {
            mcms_core::Region::Empty => "empty",
            mcms_core::Region::Point(_) => "point",
            mcms_core::Region::Segment(..) => "segment",
            mcms_core::Region::Polygon(_) => "polygon",
        }
    }

    #[getter]
    fn vertices(&self) -> Vec<(f64, f64)> {
        self.0.vertices().iter().map(|v| (v.x, v.y)).collect()
    }

    #[getter]
    fn area(&self) -> f64 {
        self.0.area()
    }

    #[pyo3(signature = (x, y, eps=1e-9))]
    fn contains(&self, x: f64, y: f64, eps: f64) -> bool {
        self.0.contains(Vec2::new(x, y), eps)
    }

    fn scaled(&self, k: f64) -> PyResult<Self> {
        self.0.scaled(k).map(Region).map_err(err)
    }

    /// {u : other + u inside self}.
    fn erode(&self, other: &Region) -> PyResult<Self> {
        mcms_core::polygeom::erode(&self.0, &other.0).map(Region).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Region({}, area={})", self.kind(), self.0.area())
    }
}

fn policy(kind: &str, weight: &str, matrix: Option<Vec<Vec<f64>>>) -> PyResult<NuPolicy> {
    match kind {
        "area-markov" => Ok(NuPolicy::AreaMarkov(match weight {
            "scale" => WindowWeight::Scale,
            "area" => WindowWeight::Area,
            other => return Err(PyValueError::new_err(format!("unknown weight {other:?}"))),
        })),
        "explicit" => {
            let m = matrix.ok_or_else(|| PyValueError::new_err("explicit policy needs a matrix"))?;
            Ok(NuPolicy::Explicit(to_matrix(&m)?))
        }
        "example2" => Ok(NuPolicy::Explicit(scheme::penrose_example2_nu())),
        other => Err(PyValueError::new_err(format!("unknown policy {other:?}"))),
    }
}

/// The four-component Penrose scheme, optionally shifted by gamma.
#[pyclass(frozen, module = "mcms")]
struct Scheme(scheme::SchemeSpec);

#[pymethods]
impl Scheme {
    #[staticmethod]
    #[pyo3(signature = (gamma=(0.0, 0.0), open_boundary=false))]
    fn penrose(gamma: (f64, f64), open_boundary: bool) -> Self {
        let mode = if open_boundary { mcms_core::BoundaryMode::Open } else { mcms_core::BoundaryMode::Closed };
        Scheme(scheme::SchemeSpec::penrose().with_gamma(Vec2::new(gamma.0, gamma.1)).with_boundary_mode(mode))
    }

    #[getter]
    fn r(&self) -> usize {
        self.0.r()
    }

    fn windows(&self) -> Vec<Region> {
        self.0.effective_windows().into_iter().map(Region).collect()
    }

    fn transition_windows(&self) -> PyResult<Vec<Vec<Region>>> {
        let w = scheme::transition_windows(&self.0).map_err(err)?;
        Ok(w.into_iter().map(|row| row.into_iter().map(Region).collect()).collect())
    }

    /// Points of component `i` (1-based) within radius s as
    /// (coefficients, physical, internal) tuples.
    fn points(&self, i: usize, s: f64) -> PyResult<Vec<([i64; 4], Complex64, Complex64)>> {
        if i == 0 || i > self.0.r() {
            return Err(PyValueError::new_err(format!("component must be in 1..={}", self.0.r())));
        }
        Ok(scheme::generate_points(&self.0, i - 1, s)
            .into_iter()
            .map(|p| (p.coeffs.coeffs(), p.phys, p.internal))
            .collect())
    }

    /// Weight matrix; kind is "area-markov", "explicit" or "example2".
    #[pyo3(signature = (kind="area-markov", weight="scale", matrix=None))]
    fn nu(&self, kind: &str, weight: &str, matrix: Option<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
        let w = scheme::transition_windows(&self.0).map_err(err)?;
        let m = scheme::build_nu(&w, &policy(kind, weight, matrix)?).map_err(err)?;
        Ok(from_matrix(&m))
    }

    fn is_member(&self, i: usize, x: &CycInt) -> bool {
        i >= 1 && i <= self.0.r() && self.0.is_member(i - 1, x.0)
    }
}

/// Dominant eigenpair of a non-negative matrix.
#[pyfunction]
#[pyo3(signature = (matrix, tol=1e-12, maxit=100_000))]
fn pf_eigen<'py>(py: Python<'py>, matrix: Vec<Vec<f64>>, tol: f64, maxit: usize) -> PyResult<Bound<'py, PyDict>> {
    let res = core_pf_eigen(&to_matrix(&matrix)?, tol, maxit).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("lambda_max", res.lambda_max)?;
    d.set_item("w", res.w)?;
    d.set_item("lambda2_abs", res.lambda2_abs)?;
    d.set_item("gap", res.gap)?;
    d.set_item("simple", res.simple)?;
    Ok(d)
}

/// Converged window-side densities on a grid.
#[pyclass(frozen, module = "mcms")]
struct Density {
    inner: refine::DensityGrid,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    residuals: Vec<f64>,
    #[pyo3(get)]
    w: Vec<f64>,
}

#[pymethods]
impl Density {
    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.inner.masses.clone()
    }

    /// (origin_x, origin_y, h, nx, ny).
    #[getter]
    fn grid(&self) -> (f64, f64, f64, usize, usize) {
        let g = self.inner.grid;
        (g.origin.x, g.origin.y, g.h, g.nx, g.ny)
    }

    /// Row-major values of channel j (1-based).
    fn values(&self, j: usize) -> PyResult<Vec<f64>> {
        self.inner
            .values
            .get(j.wrapping_sub(1))
            .cloned()
            .ok_or_else(|| PyValueError::new_err("channel out of range"))
    }

    /// Bilinear value of channel j (1-based) at (x, y).
    fn value_at(&self, j: usize, x: f64, y: f64) -> PyResult<f64> {
        if j == 0 || j > self.inner.r() {
            return Err(PyValueError::new_err("channel out of range"));
        }
        Ok(self.inner.value_at(j - 1, Vec2::new(x, y)))
    }
}

/// Cascade solve of the invariant densities.
#[pyfunction]
#[pyo3(signature = (scheme, kind="area-markov", weight="scale", matrix=None, h=1.0/128.0, tol=1e-8, maxit=200))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    scheme: &Scheme,
    kind: &str,
    weight: &str,
    matrix: Option<Vec<Vec<f64>>>,
    h: f64,
    tol: f64,
    maxit: usize,
) -> PyResult<Density> {
    let pol = policy(kind, weight, matrix)?;
    let spec = scheme.0.clone();
    py.detach(move || {
        let w = scheme::transition_windows(&spec).map_err(err)?;
        let nu = scheme::build_nu(&w, &pol).map_err(err)?;
        let pf = core_pf_eigen(&nu, 1e-12, 100_000).map_err(err)?;
        let opts = SolveOptions { h, tol, maxit, ..Default::default() };
        let (_, fp) = refine::solve_system(&spec.window_system(), &w, &nu, &pf.w, &opts).map_err(err)?;
        let iterations = fp.iterations();
        Ok(Density { inner: fp.density, iterations, residuals: fp.residuals, w: pf.w })
    })
}

/// Fourier transform of the invariant densities at k by the infinite product.
#[pyfunction]
#[pyo3(signature = (scheme, k, kind="area-markov", weight="scale", matrix=None))]
fn fourier_product(
    scheme: &Scheme,
    k: (f64, f64),
    kind: &str,
    weight: &str,
    matrix: Option<Vec<Vec<f64>>>,
) -> PyResult<Vec<Complex64>> {
    let w = scheme::transition_windows(&scheme.0).map_err(err)?;
    let nu = scheme::build_nu(&w, &policy(kind, weight, matrix)?).map_err(err)?;
    let pf = core_pf_eigen(&nu, 1e-12, 100_000).map_err(err)?;
    refine::fourier_product(&w, &scheme.0.contraction(), &nu, &pf.w, Vec2::new(k.0, k.1)).map_err(err)
}

/// Full verification report as (all_pass, text).
#[pyfunction]
#[pyo3(signature = (scheme, kind="area-markov", weight="scale", matrix=None, s=40.0, h=1.0/128.0))]
fn verify_report(
    py: Python<'_>,
    scheme: &Scheme,
    kind: &str,
    weight: &str,
    matrix: Option<Vec<Vec<f64>>>,
    s: f64,
    h: f64,
) -> PyResult<(bool, String)> {
    let pol = policy(kind, weight, matrix)?;
    let spec = scheme.0.clone();
    py.detach(move || {
        let opts = VerifyOptions { s, solve: SolveOptions { h, ..Default::default() }, ..Default::default() };
        let report = verify::run_verification(&spec, &pol, &opts).map_err(err)?;
        Ok((report.all_pass(), report.to_string()))
    })
}

#[pymodule]
fn mcms(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CycInt>()?;
    m.add_class::<Region>()?;
    m.add_class::<Scheme>()?;
    m.add_class::<Density>()?;
    m.add_function(wrap_pyfunction!(pf_eigen, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_product, m)?)?;
    m.add_function(wrap_pyfunction!(verify_report, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
