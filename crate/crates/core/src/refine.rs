//! Window-side invariant densities.
//!
//! The densities f = (f^1, ..., f^r) on the windows are the fixed point of
//!
//! ```text
//! (R f)^j(x) = |det Q| sum_i nu^{ji} (X_{Omega^{ji}} * g^i)(x),   g^i(y) = f^i(A^{-1} y),
//! ```
//!
//! with X_S the indicator of S divided by its area. Two independent routes are
//! provided: cascade iteration of R on a shared grid (convolutions via FFT),
//! and the infinite Fourier product f^(k) = prod_l Y^((A^t)^l k) w.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::polygeom::{rasterize, GridSpec, Mat2, Region, Vec2};

pub use crate::scheme::WindowSystem;

pub const DEFAULT_H: f64 = 1.0 / 128.0;
pub const DEFAULT_HALF_WIDTH: f64 = 1.7;
pub const DEFAULT_SUPERSAMPLE: usize = 4;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAXIT: usize = 200;

/// Wavevectors shorter than this after contraction are treated as zero.
pub const PRODUCT_CUTOFF: f64 = 1e-8;

/// r-channel non-negative samples at the cell centres of a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub grid: GridSpec,
    pub values: Vec<Vec<f64>>,
    /// Channel integrals, sum(values) * h^2.
    pub masses: Vec<f64>,
}

impl DensityGrid {
    pub fn zeros(grid: GridSpec, r: usize) -> Self {
        DensityGrid { grid, values: vec![vec![0.0; grid.len()]; r], masses: vec![0.0; r] }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.iter().any(|v| v.len() != grid.len()) {
            return Err(Error::InvalidArgument("channel length does not match grid".into()));
        }
        let mut g = DensityGrid { grid, masses: vec![0.0; values.len()], values };
        g.recompute_masses();
        Ok(g)
    }

    pub fn r(&self) -> usize {
        self.values.len()
    }

    pub fn recompute_masses(&mut self) {
        let a = self.grid.cell_area();
        self.masses = self.values.iter().map(|v| v.iter().sum::<f64>() * a).collect();
    }

    /// Sum over channels of the L1 distance.
    pub fn l1_distance(&self, other: &DensityGrid) -> f64 {
        let a = self.grid.cell_area();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).abs()).sum::<f64>() * a)
            .sum()
    }

    pub fn channel_l1(&self, j: usize) -> f64 {
        self.values[j].iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn channel_max(&self, j: usize) -> f64 {
        self.values[j].iter().copied().fold(0.0, f64::max)
    }

    /// Bilinear interpolation of channel j at an internal-space point.
    pub fn value_at(&self, j: usize, p: Vec2) -> f64 {
        self.grid.interpolate(&self.values[j], p)
    }
}

/// Two-dimensional complex FFT over a fixed `nx * ny` row-major layout.
/// Spectra are kept in transposed (column-major) order; only pointwise
/// products are taken between them.
#[derive(Clone)]
struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.nx, self.ny)
    }
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

impl Fft2 {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_x: planner.plan_fft_inverse(nx),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    fn forward(&self, real: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd_x.process(&mut buf);
        let mut t = transpose(&buf, self.ny, self.nx);
        self.fwd_y.process(&mut t);
        t
    }

    /// Inverse of [`Fft2::forward`], returning the real part, normalized.
    fn inverse(&self, spectrum: Vec<Complex64>) -> Vec<f64> {
        let mut t = spectrum;
        self.inv_y.process(&mut t);
        let mut buf = transpose(&t, self.nx, self.ny);
        self.inv_x.process(&mut buf);
        let n = (self.nx * self.ny) as f64;
        buf.iter().map(|c| c.re / n).collect()
    }
}

/// Discretized kernel matrix Y = (nu^{ji} X_{Omega^{ji}}) on a grid, plus the
/// pieces of the operator that do not change between iterations.
#[derive(Clone, Debug)]
pub struct RefinementKernel {
    pub grid: GridSpec,
    pub det_q_abs: f64,
    pub contraction: Mat2,
    inverse_contraction: Mat2,
    windows: Vec<Region>,
    /// [j][i]: discrete integral of the normalized indicator before exact
    /// renormalization (1 up to rasterization error); None where nu^{ji} = 0.
    pub kernel_mass: Vec<Vec<Option<f64>>>,
    spectra: Vec<Vec<Option<Vec<Complex64>>>>,
    masks: Vec<Vec<bool>>,
    fft: Fft2,
}

impl RefinementKernel {
    /// Rasterizes every transition window with nu^{ji} > 0.
    pub fn build(
        system: &WindowSystem,
        windows_ji: &[Vec<Region>],
        nu: &DMatrix<f64>,
        grid: GridSpec,
        supersample: usize,
    ) -> Result<Self> {
        let r = system.r();
        if nu.nrows() != r || nu.ncols() != r || windows_ji.len() != r {
            return Err(Error::InvalidArgument(format!("expected {r} components")));
        }
        let inverse_contraction = system
            .contraction
            .try_inverse()
            .ok_or(Error::SingularMap(system.contraction.determinant()))?;
        let h = grid.h;
        for (j, w) in system.windows.iter().enumerate() {
            let (lo, hi) = w.bbox().expect("windows are polygons");
            if !grid.contains_box(lo, hi, 2.0 * h) {
                return Err(Error::GridTooSmall(format!("window {} does not fit the grid", j + 1)));
            }
        }
        // kernel cells are centred on the lattice h Z^2, offset d at d - floor(n/2)
        let (hx, hy) = (grid.nx / 2, grid.ny / 2);
        let kgrid = GridSpec::new(
            Vec2::new(-(hx as f64) * h - 0.5 * h, -(hy as f64) * h - 0.5 * h),
            h,
            grid.nx,
            grid.ny,
        )?;
        let fft = Fft2::new(grid.nx, grid.ny);

        let mut kernel_mass = vec![vec![None; r]; r];
        let mut spectra = vec![vec![None; r]; r];
        for j in 0..r {
            for i in 0..r {
                if nu[(j, i)] <= 0.0 {
                    continue;
                }
                let win = &windows_ji[j][i];
                let underflow = |reason: &str| Error::GridUnderflow { j: j + 1, i: i + 1, reason: reason.into() };
                if win.area() <= 0.0 {
                    return Err(Error::GhostTransition { j: j + 1, i: i + 1, value: nu[(j, i)] });
                }
                let (klo, khi) = win.bbox().unwrap();
                if !kgrid.contains_box(klo, khi, h) {
                    return Err(underflow("transition window exceeds kernel box"));
                }
                let (alo, ahi) = system.windows[i].linear_image(&system.contraction)?.bbox().unwrap();
                if !grid.contains_box(alo, ahi, 2.0 * h) {
                    return Err(underflow("contracted source window exceeds grid"));
                }
                if !grid.contains_box(klo + alo, khi + ahi, 2.0 * h) {
                    return Err(underflow("convolution support exceeds grid"));
                }
                let cov = rasterize(win, &kgrid, supersample)?;
                let total: f64 = cov.iter().sum();
                kernel_mass[j][i] = Some(total * grid.cell_area() / win.area());
                let mut shifted = vec![0.0; grid.len()];
                for ky in 0..grid.ny {
                    let wy = (ky + grid.ny - hy) % grid.ny;
                    for kx in 0..grid.nx {
                        let c = cov[kgrid.index(kx, ky)];
                        if c != 0.0 {
                            let wx = (kx + grid.nx - hx) % grid.nx;
                            shifted[grid.index(wx, wy)] = c / total;
                        }
                    }
                }
                spectra[j][i] = Some(fft.forward(&shifted));
            }
        }
        let masks = system
            .windows
            .iter()
            .map(|w| {
                let p = w.as_polygon().unwrap();
                (0..grid.len())
                    .map(|k| p.edge_violation(grid.center(k % grid.nx, k / grid.nx)) <= h)
                    .collect()
            })
            .collect();
        Ok(RefinementKernel {
            grid,
            det_q_abs: system.det_q_abs,
            contraction: system.contraction,
            inverse_contraction,
            windows: system.windows.clone(),
            kernel_mass,
            spectra,
            masks,
            fft,
        })
    }

    pub fn r(&self) -> usize {
        self.windows.len()
    }

    /// Initial iterate f0^j = w^j X_{Omega^(j)}.
    pub fn initial_density(&self, w: &[f64], supersample: usize) -> Result<DensityGrid> {
        let a = self.grid.cell_area();
        let values = self
            .windows
            .iter()
            .zip(w)
            .map(|(win, &wj)| {
                let cov = rasterize(win, &self.grid, supersample)?;
                let total: f64 = cov.iter().sum::<f64>() * a;
                Ok(cov.into_iter().map(|c| wj * c / total).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        DensityGrid::from_values(self.grid, values)
    }

    /// g(y) = f(A^{-1} y) by bilinear interpolation.
    fn contract(&self, f: &[f64]) -> Vec<f64> {
        let g = self.grid;
        (0..g.len())
            .into_par_iter()
            .map(|k| {
                let y = g.center(k % g.nx, k / g.nx);
                g.interpolate(f, self.inverse_contraction * y)
            })
            .collect()
    }
}

/// One application of the refinement operator.
pub fn apply_refinement(f: &DensityGrid, k: &RefinementKernel, nu: &DMatrix<f64>) -> Result<DensityGrid> {
    let r = k.r();
    if f.r() != r || f.grid != k.grid || nu.nrows() != r || nu.ncols() != r {
        return Err(Error::InvalidArgument("density, kernel and nu disagree in shape".into()));
    }
    let used: Vec<bool> = (0..r)
        .map(|i| (0..r).any(|j| nu[(j, i)] > 0.0) && f.masses[i] != 0.0)
        .collect();
    let sources: Vec<Option<Vec<Complex64>>> = (0..r)
        .into_par_iter()
        .map(|i| used[i].then(|| k.fft.forward(&k.contract(&f.values[i]))))
        .collect();
    let values: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map(|j| {
            let mut acc: Option<Vec<Complex64>> = None;
            for i in 0..r {
                let (Some(src), Some(ker)) = (&sources[i], &k.spectra[j][i]) else {
                    continue;
                };
                let wgt = nu[(j, i)];
                let acc = acc.get_or_insert_with(|| vec![Complex64::new(0.0, 0.0); src.len()]);
                for ((a, s), kk) in acc.iter_mut().zip(src).zip(ker) {
                    *a += s * kk * wgt;
                }
            }
            match acc {
                None => vec![0.0; k.grid.len()],
                Some(spec) => k
                    .fft
                    .inverse(spec)
                    .into_iter()
                    .zip(&k.masks[j])
                    .map(|(v, &inside)| if inside { (v * k.det_q_abs).max(0.0) } else { 0.0 })
                    .collect(),
            }
        })
        .collect();
    DensityGrid::from_values(k.grid, values)
}

#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub density: DensityGrid,
    /// L1 change (summed over channels) at each iteration.
    pub residuals: Vec<f64>,
    /// max_j |m(Rf)_j - (nu m(f))_j| at each iteration.
    pub mass_errors: Vec<f64>,
}

impl FixedPoint {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    /// Geometric mean ratio of successive residuals over the last `n` steps.
    pub fn contraction_factor(&self, n: usize) -> f64 {
        let r = &self.residuals;
        if r.len() < 2 {
            return 0.0;
        }
        let n = n.min(r.len() - 1);
        let a = r[r.len() - 1 - n];
        let b = r[r.len() - 1];
        if a <= 0.0 || b <= 0.0 {
            return 0.0;
        }
        (b / a).powf(1.0 / n as f64)
    }
}

fn check_pf1(nu: &DMatrix<f64>, w: &[f64]) -> Result<()> {
    let r = nu.nrows();
    if w.len() != r {
        return Err(Error::Pf1Violated(format!("w has {} entries, expected {r}", w.len())));
    }
    if w.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Pf1Violated("w has negative entries".into()));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Pf1Violated(format!("w sums to {s}, expected 1")));
    }
    let wv = DVector::from_column_slice(w);
    let res = (nu * &wv - &wv).amax();
    if res > 1e-9 {
        return Err(Error::Pf1Violated(format!("|nu w - w| = {res:e}")));
    }
    Ok(())
}

/// Cascade iteration f_{k+1} = R f_k from f_0^j = w^j X_{Omega^(j)} until the
/// summed L1 change drops below `tol`.
///
/// The discretized operator preserves total mass only up to quadrature
/// error, so each iterate is rescaled to the total mass of `w` (a power
/// iteration for the dominant eigenfunction of the discrete operator).
pub fn solve_fixed_point(
    k: &RefinementKernel,
    nu: &DMatrix<f64>,
    w: &[f64],
    tol: f64,
    maxit: usize,
    supersample: usize,
) -> Result<FixedPoint> {
    check_pf1(nu, w)?;
    let mut f = k.initial_density(w, supersample)?;
    let mut residuals = Vec::new();
    let mut mass_errors = Vec::new();
    for _ in 0..maxit {
        let next = apply_refinement(&f, k, nu)?;
        let expected = nu * DVector::from_column_slice(&f.masses);
        let merr = next
            .masses
            .iter()
            .zip(expected.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        mass_errors.push(merr);
        let mut next = next;
        let total: f64 = next.masses.iter().sum();
        if total > 0.0 {
            let scale = w.iter().sum::<f64>() / total;
            next.values.iter_mut().flatten().for_each(|v| *v *= scale);
            next.recompute_masses();
        }
        let res = next.l1_distance(&f);
        residuals.push(res);
        f = next;
        if res < tol {
            return Ok(FixedPoint { density: f, residuals, mass_errors });
        }
    }
    Err(Error::MaxIterations { iterations: maxit, residual: residuals.last().copied().unwrap_or(f64::NAN) })
}

/// Options for the end-to-end window-side solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub h: f64,
    pub half_width: f64,
    pub supersample: usize,
    pub tol: f64,
    pub maxit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            h: DEFAULT_H,
            half_width: DEFAULT_HALF_WIDTH,
            supersample: DEFAULT_SUPERSAMPLE,
            tol: DEFAULT_TOL,
            maxit: DEFAULT_MAXIT,
        }
    }
}

/// Builds the kernel on a centred grid and runs the cascade iteration.
pub fn solve_system(
    system: &WindowSystem,
    windows_ji: &[Vec<Region>],
    nu: &DMatrix<f64>,
    w: &[f64],
    opts: &SolveOptions,
) -> Result<(RefinementKernel, FixedPoint)> {
    let grid = GridSpec::centered(opts.half_width, opts.h)?;
    let kernel = RefinementKernel::build(system, windows_ji, nu, grid, opts.supersample)?;
    let fp = solve_fixed_point(&kernel, nu, w, opts.tol, opts.maxit, opts.supersample)?;
    Ok((kernel, fp))
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// Fourier transform of the normalized indicator of a polygon,
/// int X_P(x) exp(-i k.x) dx.
///
/// Uses the divergence theorem, which reduces the integral to a sum over
/// edges of sinc factors; for |k| R < 1e-4 (R the distance from the centroid
/// to the farthest vertex) a second-order moment expansion avoids the
/// cancellation in that sum.
pub fn polygon_ft(p: &Region, k: Vec2) -> Result<Complex64> {
    let poly = p.as_polygon().ok_or(Error::MeasureZeroWindow)?;
    let area = poly.area();
    let c = poly.centroid();
    let radius = poly.vertices().iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
    let kn = k.norm();
    let phase = |x: Vec2| Complex64::from_polar(1.0, -k.dot(&x));
    if kn * radius < 1e-4 {
        let (ixx, ixy, iyy) = poly.central_second_moments();
        let quad = k.x * k.x * ixx + 2.0 * k.x * k.y * ixy + k.y * k.y * iyy;
        return Ok(phase(c) * (1.0 - 0.5 * quad / area));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (a, b) in poly.edges() {
        let d = b - a;
        let m = (a + b) * 0.5 - c;
        let flux = k.x * d.y - k.y * d.x;
        sum += phase(m) * (flux * sinc(0.5 * k.dot(&d)));
    }
    Ok(phase(c) * Complex64::new(0.0, 1.0) * sum / (kn * kn * area))
}

/// Smallest L with |(A^t)^{L+1} k| < [`PRODUCT_CUTOFF`].
pub fn truncation_depth(contraction: &Mat2, k: Vec2) -> usize {
    let at = contraction.transpose();
    let mut v = at * k;
    let mut depth = 0;
    while v.norm() >= PRODUCT_CUTOFF {
        v = at * v;
        depth += 1;
        if depth > 10_000 {
            break;
        }
    }
    depth
}

/// Y^(kappa)[j][i] = nu^{ji} X^_{Omega^{ji}}(kappa).
fn y_hat(windows_ji: &[Vec<Region>], nu: &DMatrix<f64>, kappa: Vec2) -> Result<DMatrix<Complex64>> {
    let r = nu.nrows();
    let mut m = DMatrix::from_element(r, r, Complex64::new(0.0, 0.0));
    for j in 0..r {
        for i in 0..r {
            if nu[(j, i)] > 0.0 {
                m[(j, i)] = polygon_ft(&windows_ji[j][i], kappa)? * nu[(j, i)];
            }
        }
    }
    Ok(m)
}

/// Truncated product Y^(k) Y^(A^t k) ... Y^((A^t)^depth k) w.
pub fn fourier_product_depth(
    windows_ji: &[Vec<Region>],
    contraction: &Mat2,
    nu: &DMatrix<f64>,
    w: &[f64],
    k: Vec2,
    depth: usize,
) -> Result<Vec<Complex64>> {
    let at = contraction.transpose();
    let mut ks = Vec::with_capacity(depth + 1);
    let mut kappa = k;
    for _ in 0..=depth {
        ks.push(kappa);
        kappa = at * kappa;
    }
    let mut v = DVector::from_iterator(w.len(), w.iter().map(|&x| Complex64::new(x, 0.0)));
    for kappa in ks.iter().rev() {
        v = y_hat(windows_ji, nu, *kappa)? * v;
    }
    Ok(v.iter().copied().collect())
}

/// Fourier transform of the invariant densities at k, truncated once the
/// contracted wavevector is negligible.
pub fn fourier_product(
    windows_ji: &[Vec<Region>],
    contraction: &Mat2,
    nu: &DMatrix<f64>,
    w: &[f64],
    k: Vec2,
) -> Result<Vec<Complex64>> {
    fourier_product_depth(windows_ji, contraction, nu, w, k, truncation_depth(contraction, k))
}

/// Riemann-sum Fourier transform of one grid channel at k.
pub fn dft_channel(f: &DensityGrid, j: usize, k: Vec2) -> Complex64 {
    let g = f.grid;
    let px: Vec<Complex64> =
        (0..g.nx).map(|ix| Complex64::from_polar(1.0, -k.x * g.center(ix, 0).x)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    for iy in 0..g.ny {
        let row = &f.values[j][iy * g.nx..(iy + 1) * g.nx];
        let s: Complex64 = row.iter().zip(&px).map(|(v, p)| p * *v).sum();
        total += s * Complex64::from_polar(1.0, -k.y * g.center(0, iy).y);
    }
    total * g.cell_area()
}

/// Largest deviation between the grid solution's transform and the Fourier
/// product over `ks`, relative to max_j w^j.
pub fn compare_solvers(
    f: &DensityGrid,
    windows_ji: &[Vec<Region>],
    contraction: &Mat2,
    nu: &DMatrix<f64>,
    w: &[f64],
    ks: &[Vec2],
) -> Result<f64> {
    let wmax = w.iter().copied().fold(0.0, f64::max);
    if !(wmax > 0.0) {
        return Err(Error::InvalidArgument("w must have a positive entry".into()));
    }
    let devs = ks
        .par_iter()
        .map(|&k| {
            let fp = fourier_product(windows_ji, contraction, nu, w, k)?;
            Ok((0..f.r())
                .map(|j| (dft_channel(f, j, k) - fp[j]).norm())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max) / wmax)
}
