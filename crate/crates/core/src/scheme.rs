//! Multi-component model sets over Z[xi].
//!
//! Component i consists of the x in the coset {x : rho(x) = rho(z^i)} whose
//! internal image x* lies in the window Omega^(i) (shifted by gamma). A fixed
//! similarity Q (multiplication by `q_mult`) maps component i into component j
//! after translation by any v whose internal image lies in the transition
//! window Omega^{ji} = {u : A Omega^(i) + u inside Omega^(j)}, A = Q*.

use std::collections::HashSet;
use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cyclotomic::CycInt;
use crate::error::{Error, Result};
use crate::pfsolve::{pf_eigen, PfResult};
use crate::polygeom::{erode, BoundaryMode, ConvexPolygon, Mat2, Region, Vec2, MEMBERSHIP_EPS};

/// Boundary band used to separate genuine closure violations from points whose
/// internal image sits on a window edge.
pub const BOUNDARY_BAND: f64 = 1e-6;

fn c2v(z: Complex64) -> Vec2 {
    Vec2::new(z.re, z.im)
}

/// Real 2x2 matrix of multiplication by `z` on C = R^2.
pub fn complex_mul_matrix(z: Complex64) -> Mat2 {
    Mat2::new(z.re, -z.im, z.im, z.re)
}

/// Windows plus the internal contraction A and |det Q|: everything the
/// window-side refinement problem needs.
#[derive(Clone, Debug)]
pub struct WindowSystem {
    pub windows: Vec<Region>,
    pub contraction: Mat2,
    pub det_q_abs: f64,
}

impl WindowSystem {
    pub fn new(windows: Vec<Region>, contraction: Mat2, det_q_abs: f64) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::InvalidScheme("no windows".into()));
        }
        if let Some(k) = windows.iter().position(|w| w.as_polygon().is_none()) {
            return Err(Error::InvalidScheme(format!("window {} is not a polygon", k + 1)));
        }
        let sv = contraction.singular_values();
        if !(sv.max() < 1.0) || sv.min() <= 0.0 {
            return Err(Error::InvalidScheme(format!(
                "contraction must be invertible with norm < 1, singular values {:?}",
                sv.as_slice()
            )));
        }
        if !(det_q_abs > 0.0) {
            return Err(Error::InvalidScheme("|det Q| must be positive".into()));
        }
        Ok(WindowSystem { windows, contraction, det_q_abs })
    }

    pub fn r(&self) -> usize {
        self.windows.len()
    }

    pub fn transition_windows(&self) -> Result<Vec<Vec<Region>>> {
        transition_windows_for(&self.windows, &self.contraction)
    }
}

/// Entry [j][i] is erode(Omega^(j), A Omega^(i)).
pub fn transition_windows_for(windows: &[Region], a: &Mat2) -> Result<Vec<Vec<Region>>> {
    let images = windows
        .iter()
        .map(|w| w.linear_image(a))
        .collect::<Result<Vec<_>>>()?;
    windows
        .iter()
        .map(|wj| images.iter().map(|ai| erode(wj, ai)).collect())
        .collect()
}

/// Problem statement for a multi-component model set in Z[xi].
#[derive(Clone, Debug)]
pub struct SchemeSpec {
    pub windows: Vec<Region>,
    pub coset_reps: Vec<CycInt>,
    /// The similarity Q acts as multiplication by this element.
    pub q_mult: CycInt,
    pub gamma: Vec2,
    pub boundary_mode: BoundaryMode,
}

impl SchemeSpec {
    pub fn new(windows: Vec<Region>, coset_reps: Vec<CycInt>, q_mult: CycInt) -> Result<Self> {
        let spec = SchemeSpec {
            windows,
            coset_reps,
            q_mult,
            gamma: Vec2::zeros(),
            boundary_mode: BoundaryMode::Closed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The four-component rhombic Penrose vertex set: windows P, -tau P,
    /// tau P, -P for the cosets rho = 1..4, inflation by tau.
    pub fn penrose() -> SchemeSpec {
        let p = Region::Polygon(ConvexPolygon::regular(5, 1.0, 0.0).expect("pentagon"));
        let tau = CycInt::TAU.embed_physical().re;
        let windows = vec![
            p.clone(),
            p.scaled(-tau).unwrap(),
            p.scaled(tau).unwrap(),
            p.scaled(-1.0).unwrap(),
        ];
        let coset_reps = (1..=4).map(CycInt::from_int).collect();
        SchemeSpec::new(windows, coset_reps, CycInt::TAU).expect("valid Penrose scheme")
    }

    pub fn with_gamma(mut self, gamma: Vec2) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_boundary_mode(mut self, mode: BoundaryMode) -> Self {
        self.boundary_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.windows.len();
        if r == 0 {
            return Err(Error::InvalidScheme("at least one component required".into()));
        }
        if self.coset_reps.len() != r {
            return Err(Error::InvalidScheme(format!(
                "{} windows but {} coset representatives",
                r,
                self.coset_reps.len()
            )));
        }
        if let Some(k) = self.windows.iter().position(|w| w.as_polygon().is_none()) {
            return Err(Error::InvalidScheme(format!(
                "window {} must be a polygon with interior",
                k + 1
            )));
        }
        let mut seen = HashSet::new();
        for z in &self.coset_reps {
            if !seen.insert(z.rho()) {
                return Err(Error::InvalidScheme(format!(
                    "coset representatives must have distinct rho values (rho = {} repeats)",
                    z.rho()
                )));
            }
        }
        let a = self.contraction_factor().norm();
        if !(a < 1.0) || a == 0.0 {
            return Err(Error::InvalidScheme(format!(
                "internal image of Q must be a contraction, |q*| = {a}"
            )));
        }
        if !(self.gamma.x.is_finite() && self.gamma.y.is_finite()) {
            return Err(Error::InvalidScheme("gamma must be finite".into()));
        }
        Ok(())
    }

    pub fn r(&self) -> usize {
        self.windows.len()
    }

    pub fn inflation_factor(&self) -> f64 {
        self.q_mult.embed_physical().norm()
    }

    /// q* as a complex number: A acts as multiplication by it.
    pub fn contraction_factor(&self) -> Complex64 {
        self.q_mult.embed_internal()
    }

    pub fn contraction(&self) -> Mat2 {
        complex_mul_matrix(self.contraction_factor())
    }

    pub fn similarity(&self) -> Mat2 {
        complex_mul_matrix(self.q_mult.embed_physical())
    }

    pub fn det_q_abs(&self) -> f64 {
        self.q_mult.embed_physical().norm_sqr()
    }

    /// Windows displaced by gamma.
    pub fn effective_windows(&self) -> Vec<Region> {
        self.windows.iter().map(|w| w.translate(self.gamma)).collect()
    }

    pub fn residue(&self, i: usize) -> u8 {
        self.coset_reps[i].rho()
    }

    /// Residue class of L^{ji} = L + (z^j - Q z^i).
    pub fn transition_residue(&self, j: usize, i: usize) -> u8 {
        let z = self.coset_reps[j] - self.q_mult * self.coset_reps[i];
        z.rho()
    }

    pub fn window_system(&self) -> WindowSystem {
        WindowSystem {
            windows: self.effective_windows(),
            contraction: self.contraction(),
            det_q_abs: self.det_q_abs(),
        }
    }

    /// Membership of an arbitrary module element in component i.
    pub fn is_member(&self, i: usize, x: CycInt) -> bool {
        x.rho() == self.residue(i)
            && self.windows[i].contains_with(
                c2v(x.embed_internal()) - self.gamma,
                MEMBERSHIP_EPS,
                self.boundary_mode,
            )
    }
}

/// Entry [j][i] holds Omega^{ji} for the scheme (gamma included).
pub fn transition_windows(spec: &SchemeSpec) -> Result<Vec<Vec<Region>>> {
    transition_windows_for(&spec.effective_windows(), &spec.contraction())
}

/// How a transition window is weighted when ν is built from geometry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WindowWeight {
    /// Linear size, sqrt(area). This is the weighting behind the classical
    /// Penrose table of weights, e.g. (2 - tau)/4 for entry (1,1).
    #[default]
    Scale,
    /// Lebesgue area.
    Area,
}

impl WindowWeight {
    fn of(self, area: f64) -> f64 {
        match self {
            WindowWeight::Scale => area.sqrt(),
            WindowWeight::Area => area,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NuPolicy {
    /// Column-normalized geometric weights of the transition windows.
    AreaMarkov(WindowWeight),
    /// A user-supplied matrix, validated against the ghost convention.
    Explicit(DMatrix<f64>),
}

/// Builds the weight matrix ν. Entries on measure-zero transition windows are
/// always zero: their normalized indicators would be Dirac measures.
pub fn build_nu(windows_ji: &[Vec<Region>], policy: &NuPolicy) -> Result<DMatrix<f64>> {
    let r = windows_ji.len();
    if windows_ji.iter().any(|row| row.len() != r) {
        return Err(Error::InvalidMatrix("transition table is not square".into()));
    }
    match policy {
        NuPolicy::AreaMarkov(weight) => {
            let mut nu = DMatrix::from_fn(r, r, |j, i| weight.of(windows_ji[j][i].area()));
            for i in 0..r {
                let s: f64 = nu.column(i).sum();
                if !(s > 0.0) {
                    return Err(Error::EmptyColumn(i + 1));
                }
                nu.column_mut(i).scale_mut(1.0 / s);
            }
            Ok(nu)
        }
        NuPolicy::Explicit(m) => {
            if m.nrows() != r || m.ncols() != r {
                return Err(Error::InvalidMatrix(format!(
                    "explicit nu is {}x{}, expected {r}x{r}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for j in 0..r {
                for i in 0..r {
                    let v = m[(j, i)];
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::InvalidMatrix(format!(
                            "entry ({},{}) = {v} must be finite and non-negative",
                            j + 1,
                            i + 1
                        )));
                    }
                    if v > 0.0 && windows_ji[j][i].area() <= 0.0 {
                        return Err(Error::GhostTransition { j: j + 1, i: i + 1, value: v });
                    }
                }
            }
            if m.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidMatrix("nu must be non-zero".into()));
            }
            Ok(m.clone())
        }
    }
}

/// A point of component `component` (0-based).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPoint {
    pub component: usize,
    pub coeffs: CycInt,
    pub phys: Complex64,
    pub internal: Complex64,
}

impl LabeledPoint {
    pub fn new(component: usize, coeffs: CycInt) -> Self {
        LabeledPoint {
            component,
            coeffs,
            phys: coeffs.embed_physical(),
            internal: coeffs.embed_internal(),
        }
    }
}

/// An admissible translation v for a transition (j, i).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Translation {
    pub coeffs: CycInt,
    pub phys: Complex64,
    pub internal: Complex64,
}

impl From<CycInt> for Translation {
    fn from(coeffs: CycInt) -> Self {
        Translation {
            coeffs,
            phys: coeffs.embed_physical(),
            internal: coeffs.embed_internal(),
        }
    }
}

/// Matrix sending (m0..m3) to (Re x, Im x, Re x*, Im x*).
pub fn embedding_matrix() -> Matrix4<f64> {
    let mut b = Matrix4::zeros();
    for k in 0..4 {
        let p = CycInt(std::array::from_fn(|t| (t == k) as i64));
        let (x, xs) = (p.embed_physical(), p.embed_internal());
        b[(0, k)] = x.re;
        b[(1, k)] = x.im;
        b[(2, k)] = xs.re;
        b[(3, k)] = xs.im;
    }
    b
}

fn inverse_embedding_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        let inv = embedding_matrix().try_inverse().expect("embedding is invertible");
        (0..4)
            .map(|r| (0..4).map(|c| inv[(r, c)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    })
}

/// Bound on |m_k| for any x with |x| <= s and |x*| <= window_radius.
pub fn coefficient_bound(s: f64, window_radius: f64) -> i64 {
    (inverse_embedding_norm() * (s * s + window_radius * window_radius).sqrt()).floor() as i64 + 1
}

/// All x in Z[xi] with rho(x) = residue, |x| <= s and x* in `region`.
///
/// The outer three coefficients range over the box from [`coefficient_bound`];
/// for each the admissible m0 form an interval (from both the disc and the
/// window's bounding box) stepped by 5 to respect the residue. Results are
/// sorted by coefficient tuple.
pub fn enumerate_class(
    residue: u8,
    region: &Region,
    s: f64,
    eps: f64,
    mode: BoundaryMode,
) -> Vec<CycInt> {
    let Some((lo, hi)) = region.bbox() else {
        return Vec::new();
    };
    if !(s >= 0.0) {
        return Vec::new();
    }
    let m = coefficient_bound(s, region.circumradius());
    let slack = eps + 1e-9;
    let (lo, hi) = (lo - Vec2::repeat(slack), hi + Vec2::repeat(slack));
    let s_tol = s + 1e-9;
    let basis: [CycInt; 3] = [CycInt::new(0, 1, 0, 0), CycInt::new(0, 0, 1, 0), CycInt::new(0, 0, 0, 1)];
    let phys: Vec<Complex64> = basis.iter().map(|b| b.embed_physical()).collect();
    let internal: Vec<Complex64> = basis.iter().map(|b| b.embed_internal()).collect();

    let mut out: Vec<CycInt> = (-m..=m)
        .into_par_iter()
        .flat_map_iter(|m3| {
            let mut local = Vec::new();
            for m2 in -m..=m {
                for m1 in -m..=m {
                    let c = phys[0] * m1 as f64 + phys[1] * m2 as f64 + phys[2] * m3 as f64;
                    if c.im.abs() > s_tol {
                        continue;
                    }
                    let cs = internal[0] * m1 as f64
                        + internal[1] * m2 as f64
                        + internal[2] * m3 as f64;
                    if cs.im < lo.y || cs.im > hi.y {
                        continue;
                    }
                    let half = (s_tol * s_tol - c.im * c.im).max(0.0).sqrt();
                    let a = (-c.re - half).max(lo.x - cs.re).max(-m as f64);
                    let b = (-c.re + half).min(hi.x - cs.re).min(m as f64);
                    if a > b {
                        continue;
                    }
                    let first = a.ceil() as i64;
                    let last = b.floor() as i64;
                    let need = (residue as i64 - (m1 + m2 + m3)).rem_euclid(5);
                    let mut m0 = first + (need - first).rem_euclid(5);
                    while m0 <= last {
                        let x = CycInt::new(m0, m1, m2, m3);
                        let xp = c + m0 as f64;
                        let xs = cs + m0 as f64;
                        if xp.norm() <= s_tol && region.contains_with(c2v(xs), eps, mode) {
                            local.push(x);
                        }
                        m0 += 5;
                    }
                }
            }
            local
        })
        .collect();
    out.sort_unstable();
    out
}

/// Points of component i (0-based) within physical radius s.
pub fn generate_points(spec: &SchemeSpec, i: usize, s: f64) -> Vec<LabeledPoint> {
    let window = spec.windows[i].translate(spec.gamma);
    enumerate_class(spec.residue(i), &window, s, MEMBERSHIP_EPS, spec.boundary_mode)
        .into_iter()
        .map(|x| LabeledPoint::new(i, x))
        .collect()
}

/// Points of every component within radius s, one list per component.
pub fn generate_all_points(spec: &SchemeSpec, s: f64) -> Vec<Vec<LabeledPoint>> {
    (0..spec.r()).map(|i| generate_points(spec, i, s)).collect()
}

/// Entry [j][i] lists T^{ji}_s: the y in L + (z^j - Q z^i) with |y| <= s and
/// y* in Omega^{ji}. Transition windows are closed in either boundary mode.
pub fn translation_sets(
    spec: &SchemeSpec,
    windows_ji: &[Vec<Region>],
    s: f64,
) -> Vec<Vec<Vec<Translation>>> {
    let r = spec.r();
    (0..r)
        .map(|j| {
            (0..r)
                .map(|i| {
                    enumerate_class(
                        spec.transition_residue(j, i),
                        &windows_ji[j][i],
                        s,
                        MEMBERSHIP_EPS,
                        BoundaryMode::Closed,
                    )
                    .into_iter()
                    .map(Translation::from)
                    .collect()
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureViolation {
    /// Target and source components (0-based).
    pub j: usize,
    pub i: usize,
    pub x: CycInt,
    pub v: CycInt,
    pub image: CycInt,
    /// Distance of image* from the boundary of Omega^(j).
    pub boundary_distance: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ClosureReport {
    pub checked: usize,
    pub violations: Vec<ClosureViolation>,
    /// Failures whose internal image lies within [`BOUNDARY_BAND`] of a window edge.
    pub boundary_cases: Vec<ClosureViolation>,
    /// Images that are members but fell outside the supplied point lists.
    pub out_of_range: usize,
}

/// Checks that x -> Qx + v maps component i into component j for every
/// x in `points[i]` with |x| <= s and every v in T^{ji}.
///
/// `points` should be enumerated to radius q s + max |v| so that images can be
/// looked up; images beyond the lists are checked directly and counted in
/// `out_of_range`.
pub fn check_selfsim_closure(
    spec: &SchemeSpec,
    points: &[Vec<LabeledPoint>],
    tsets: &[Vec<Vec<Translation>>],
    s: f64,
) -> ClosureReport {
    let r = spec.r();
    let known: Vec<HashSet<CycInt>> = points
        .iter()
        .map(|pts| pts.iter().map(|p| p.coeffs).collect())
        .collect();
    let mut report = ClosureReport::default();
    for i in 0..r {
        for x in points[i].iter().filter(|p| p.phys.norm() <= s + 1e-9) {
            let qx = spec.q_mult * x.coeffs;
            for j in 0..r {
                for v in &tsets[j][i] {
                    report.checked += 1;
                    let y = qx + v.coeffs;
                    if known[j].contains(&y) {
                        continue;
                    }
                    if spec.is_member(j, y) {
                        report.out_of_range += 1;
                        continue;
                    }
                    let dist = spec.windows[j]
                        .boundary_distance(c2v(y.embed_internal()) - spec.gamma);
                    let rec = ClosureViolation {
                        j,
                        i,
                        x: x.coeffs,
                        v: v.coeffs,
                        image: y,
                        boundary_distance: dist,
                    };
                    if y.rho() == spec.residue(j) && dist <= BOUNDARY_BAND {
                        report.boundary_cases.push(rec);
                    } else {
                        report.violations.push(rec);
                    }
                }
            }
        }
    }
    report
}

/// Everything derived from a scheme and a choice of ν.
#[derive(Clone, Debug)]
pub struct TransitionData {
    pub windows_ji: Vec<Vec<Region>>,
    pub nu: DMatrix<f64>,
    pub pf: PfResult,
    pub tsets: Vec<Vec<Vec<Translation>>>,
}

impl TransitionData {
    pub fn build(spec: &SchemeSpec, policy: &NuPolicy, s: f64) -> Result<Self> {
        let windows_ji = transition_windows(spec)?;
        let nu = build_nu(&windows_ji, policy)?;
        let pf = pf_eigen(&nu, crate::pfsolve::DEFAULT_TOL, crate::pfsolve::DEFAULT_MAXIT)?;
        let tsets = translation_sets(spec, &windows_ji, s);
        Ok(TransitionData { windows_ji, nu, pf, tsets })
    }
}

/// The explicit weight matrix of the second Penrose example.
pub fn penrose_example2_nu() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[2.0, 0.0, 0.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 0.0, 0.0, 2.0],
    ) / 4.0
}
