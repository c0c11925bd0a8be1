//! Convex window geometry in the 2-D internal space.
//!
//! Windows are convex polygons with counter-clockwise vertices. Erosions of one
//! window by another can collapse, so [`Region`] also carries the degenerate
//! outcomes (empty set, single point, segment).

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Collinearity / duplicate-vertex tolerance.
const COLLINEAR_EPS: f64 = 1e-12;
/// Areas below this are measure-zero after erosion.
const COLLAPSE_AREA: f64 = 1e-18;
/// Feasibility slack when classifying a collapsed erosion.
const FEASIBLE_EPS: f64 = 1e-9;

/// Default membership tolerance for closed windows.
pub const MEMBERSHIP_EPS: f64 = 1e-9;

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Whether window boundaries belong to the window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    #[default]
    Closed,
    Open,
}

/// Strictly convex polygon with counter-clockwise vertices and positive area.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Builds a polygon from vertices in either orientation. Duplicate and
    /// collinear vertices are dropped.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let mut vs = clean_ring(vertices);
        if vs.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 non-collinear vertices, got {}",
                vs.len()
            )));
        }
        if signed_area(&vs) < 0.0 {
            vs.reverse();
        }
        let n = vs.len();
        let scale = vs.iter().map(|v| v.norm()).fold(1.0, f64::max);
        for k in 0..n {
            let a = vs[k];
            let b = vs[(k + 1) % n];
            let c = vs[(k + 2) % n];
            if cross(b - a, c - b) <= COLLINEAR_EPS * scale * scale {
                return Err(Error::InvalidPolygon("vertices are not strictly convex".into()));
            }
        }
        Ok(ConvexPolygon { vertices: vs })
    }

    /// Convex hull of the unit-circumradius regular polygon with `n` vertices,
    /// the first at angle `phase`.
    pub fn regular(n: usize, radius: f64, phase: f64) -> Result<Self> {
        let vs = (0..n)
            .map(|k| {
                let t = phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Vec2::new(radius * t.cos(), radius * t.sin())
            })
            .collect();
        ConvexPolygon::new(vs)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    /// Outward unit normals and offsets: the polygon is the set of u with
    /// <u, n_k> <= c_k for every edge k.
    pub fn half_planes(&self) -> Vec<(Vec2, f64)> {
        self.edges()
            .map(|(a, b)| {
                let d = b - a;
                let n = Vec2::new(d.y, -d.x).normalize();
                (n, n.dot(&a))
            })
            .collect()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn centroid(&self) -> Vec2 {
        let mut c = Vec2::zeros();
        let mut a2 = 0.0;
        for (p, q) in self.edges() {
            let w = cross(p, q);
            a2 += w;
            c += (p + q) * w;
        }
        c / (3.0 * a2)
    }

    /// Second moments (Ixx, Ixy, Iyy) of the polygon about its centroid.
    pub fn central_second_moments(&self) -> (f64, f64, f64) {
        let c = self.centroid();
        let (mut ixx, mut ixy, mut iyy) = (0.0, 0.0, 0.0);
        for (p, q) in self.edges() {
            let (p, q) = (p - c, q - c);
            let w = cross(p, q);
            ixx += w * (p.x * p.x + p.x * q.x + q.x * q.x);
            iyy += w * (p.y * p.y + p.y * q.y + q.y * q.y);
            ixy += w * (2.0 * p.x * p.y + p.x * q.y + q.x * p.y + 2.0 * q.x * q.y);
        }
        (ixx / 12.0, ixy / 24.0, iyy / 12.0)
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        bbox_of(&self.vertices)
    }

    pub fn support(&self, n: Vec2) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.dot(&n))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// max_k (<u, n_k> - c_k): non-positive inside, positive outside. Outside
    /// the polygon it is a lower bound on the Euclidean distance.
    pub fn edge_violation(&self, u: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let d = b - a;
                let n = Vec2::new(d.y, -d.x) / d.norm();
                n.dot(&(u - a))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euclidean distance from `u` to the polygon (0 inside).
    pub fn distance(&self, u: Vec2) -> f64 {
        if self.edge_violation(u) <= 0.0 {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| segment_distance(u, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether every vertex of `other` lies in this polygon (within eps).
    pub fn contains_polygon(&self, other: &ConvexPolygon, eps: f64) -> bool {
        other.vertices.iter().all(|&v| self.edge_violation(v) <= eps)
    }
}

fn signed_area(vs: &[Vec2]) -> f64 {
    let n = vs.len();
    0.5 * (0..n).map(|k| cross(vs[k], vs[(k + 1) % n])).sum::<f64>()
}

fn bbox_of(vs: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::repeat(f64::INFINITY);
    let mut hi = Vec2::repeat(f64::NEG_INFINITY);
    for v in vs {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (lo, hi)
}

fn segment_distance(u: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return (u - a).norm();
    }
    let t = ((u - a).dot(&d) / len2).clamp(0.0, 1.0);
    (u - (a + d * t)).norm()
}

/// Drops repeated and collinear vertices from a closed ring.
fn clean_ring(mut vs: Vec<Vec2>) -> Vec<Vec2> {
    let scale = vs.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let tol = COLLINEAR_EPS * scale;
    loop {
        let n = vs.len();
        if n < 3 {
            return vs;
        }
        let mut removed = false;
        for k in 0..n {
            let prev = vs[(k + n - 1) % n];
            let cur = vs[k];
            let next = vs[(k + 1) % n];
            let dup = (cur - prev).norm() <= tol;
            let d = next - prev;
            let collinear = d.norm() > 0.0 && cross(d, cur - prev).abs() / d.norm() <= tol;
            if dup || collinear {
                vs.remove(k);
                removed = true;
                break;
            }
        }
        if !removed {
            return vs;
        }
    }
}

/// A convex window: possibly degenerate.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Empty,
    Point(Vec2),
    /// Measure-zero segment; only produced by erosions with parallel edges.
    Segment(Vec2, Vec2),
    Polygon(ConvexPolygon),
}

impl Region {
    pub fn polygon(vertices: Vec<Vec2>) -> Result<Region> {
        Ok(Region::Polygon(ConvexPolygon::new(vertices)?))
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Region::Empty)
    }

    pub fn as_polygon(&self) -> Option<&ConvexPolygon> {
        match self {
            Region::Polygon(p) => Some(p),
            _ => None,
        }
    }

    /// Vertex list (empty for `Empty`).
    pub fn vertices(&self) -> Vec<Vec2> {
        match self {
            Region::Empty => vec![],
            Region::Point(p) => vec![*p],
            Region::Segment(a, b) => vec![*a, *b],
            Region::Polygon(p) => p.vertices().to_vec(),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Region::Polygon(p) => p.area(),
            _ => 0.0,
        }
    }

    pub fn support(&self, n: Vec2) -> Result<f64> {
        match self {
            Region::Empty => Err(Error::EmptySupport),
            Region::Point(p) => Ok(p.dot(&n)),
            Region::Segment(a, b) => Ok(a.dot(&n).max(b.dot(&n))),
            Region::Polygon(p) => Ok(p.support(n)),
        }
    }

    pub fn bbox(&self) -> Option<(Vec2, Vec2)> {
        match self {
            Region::Empty => None,
            _ => Some(bbox_of(&self.vertices())),
        }
    }

    /// Largest distance of a point of the region from the origin.
    pub fn circumradius(&self) -> f64 {
        self.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn translate(&self, t: Vec2) -> Region {
        match self {
            Region::Empty => Region::Empty,
            Region::Point(p) => Region::Point(p + t),
            Region::Segment(a, b) => Region::Segment(a + t, b + t),
            Region::Polygon(p) => Region::Polygon(ConvexPolygon {
                vertices: p.vertices.iter().map(|v| v + t).collect(),
            }),
        }
    }

    /// Image under the linear map `m`, re-oriented counter-clockwise.
    pub fn linear_image(&self, m: &Mat2) -> Result<Region> {
        match self {
            Region::Empty => Ok(Region::Empty),
            Region::Point(p) => Ok(Region::Point(m * p)),
            Region::Segment(a, b) => Ok(Region::Segment(m * a, m * b)),
            Region::Polygon(p) => {
                let det = m.determinant();
                if det.abs() < 1e-300 || !det.is_finite() {
                    return Err(Error::SingularMap(det));
                }
                let mut vs: Vec<Vec2> = p.vertices.iter().map(|v| m * v).collect();
                if det < 0.0 {
                    vs.reverse();
                }
                Ok(Region::Polygon(ConvexPolygon { vertices: vs }))
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Result<Region> {
        self.linear_image(&(Mat2::identity() * s))
    }

    /// Closed-set membership: true iff `u` is within distance `eps` of the region.
    pub fn contains(&self, u: Vec2, eps: f64) -> bool {
        match self {
            Region::Empty => false,
            Region::Point(p) => (u - p).norm() <= eps,
            Region::Segment(a, b) => segment_distance(u, *a, *b) <= eps,
            Region::Polygon(p) => p.edge_violation(u) <= eps,
        }
    }

    /// Membership under a boundary convention. Open mode excludes a band of
    /// width `eps` along the boundary; degenerate regions have empty interior.
    pub fn contains_with(&self, u: Vec2, eps: f64, mode: BoundaryMode) -> bool {
        match mode {
            BoundaryMode::Closed => self.contains(u, eps),
            BoundaryMode::Open => match self {
                Region::Polygon(p) => p.edge_violation(u) < -eps,
                _ => false,
            },
        }
    }

    /// Euclidean distance to the boundary of the region (for polygons), or to
    /// the region itself for degenerate variants.
    pub fn boundary_distance(&self, u: Vec2) -> f64 {
        match self {
            Region::Empty => f64::INFINITY,
            Region::Point(p) => (u - p).norm(),
            Region::Segment(a, b) => segment_distance(u, *a, *b),
            Region::Polygon(p) => {
                let v = p.edge_violation(u);
                if v <= 0.0 {
                    -v
                } else {
                    p.distance(u)
                }
            }
        }
    }

    /// Whether `other` is contained in `self` (within eps).
    pub fn contains_region(&self, other: &Region, eps: f64) -> bool {
        other.vertices().iter().all(|&v| self.contains(v, eps))
    }

    /// Same variant and matching vertex sets within `tol`.
    pub fn approx_eq(&self, other: &Region, tol: f64) -> bool {
        let same_kind = std::mem::discriminant(self) == std::mem::discriminant(other);
        if !same_kind {
            return false;
        }
        let a = self.vertices();
        let b = other.vertices();
        a.len() == b.len()
            && a.iter().all(|u| b.iter().any(|v| (u - v).norm() <= tol))
            && b.iter().all(|u| a.iter().any(|v| (u - v).norm() <= tol))
    }
}

pub fn support(p: &Region, n: Vec2) -> Result<f64> {
    p.support(n)
}

pub fn linear_image(p: &Region, m: &Mat2) -> Result<Region> {
    p.linear_image(m)
}

pub fn area(p: &Region) -> f64 {
    p.area()
}

pub fn contains(p: &Region, u: Vec2, eps: f64) -> bool {
    p.contains(u, eps)
}

/// Intersection of half-planes {u : <u, n_k> <= c_k} clipped from `start`.
fn clip_half_planes(start: Vec<Vec2>, planes: &[(Vec2, f64)]) -> Vec<Vec2> {
    let mut poly = start;
    for &(n, c) in planes {
        if poly.is_empty() {
            break;
        }
        let m = poly.len();
        let mut out = Vec::with_capacity(m + 1);
        for k in 0..m {
            let p = poly[k];
            let q = poly[(k + 1) % m];
            let fp = n.dot(&p) - c;
            let fq = n.dot(&q) - c;
            if fp <= 0.0 {
                out.push(p);
            }
            if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
                let t = fp / (fp - fq);
                out.push(p + (q - p) * t);
            }
        }
        poly = out;
    }
    poly
}

/// Minkowski erosion {u : K + u is contained in C}.
///
/// For a polygon `c` every edge half-plane is shifted inward by the support of
/// `k` in the outward normal direction; the intersection is exact for convex
/// inputs. Measure-zero outcomes are classified as `Point`, `Segment` or `Empty`.
pub fn erode(c: &Region, k: &Region) -> Result<Region> {
    if c.is_empty() || k.is_empty() {
        return Err(Error::EmptySupport);
    }
    if let Region::Point(p) = k {
        return Ok(c.translate(-p));
    }
    match c {
        Region::Polygon(cp) => Ok(erode_polygon(cp, k)),
        Region::Point(_) => Ok(Region::Empty),
        Region::Segment(a, b) => Ok(erode_segment(*a, *b, k)),
        Region::Empty => unreachable!(),
    }
}

fn erode_polygon(c: &ConvexPolygon, k: &Region) -> Region {
    let planes: Vec<(Vec2, f64)> = c
        .half_planes()
        .into_iter()
        .map(|(n, off)| (n, off - k.support(n).expect("non-empty")))
        .collect();
    // Any feasible u lies in C - k0 for a point k0 of K.
    let k0 = k.vertices()[0];
    let (lo, hi) = c.bbox();
    let pad = 1.0 + (hi - lo).norm();
    let (lo, hi) = (lo - k0 - Vec2::repeat(pad), hi - k0 + Vec2::repeat(pad));
    let square = vec![lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];

    let raw = clip_half_planes(square.clone(), &planes);
    let exact = clean_ring(raw.clone());
    if exact.len() >= 3 && signed_area(&exact) >= COLLAPSE_AREA {
        if let Ok(p) = ConvexPolygon::new(exact) {
            return Region::Polygon(p);
        }
    }

    // A degenerate exact clip already carries the right vertices; otherwise
    // rounding emptied it and the relaxed clip decides.
    let sliver = if raw.is_empty() {
        let relaxed: Vec<(Vec2, f64)> = planes.iter().map(|&(n, c)| (n, c + FEASIBLE_EPS)).collect();
        clip_half_planes(square, &relaxed)
    } else {
        raw
    };
    if sliver.is_empty() {
        return Region::Empty;
    }
    let feasible = |u: Vec2| {
        planes
            .iter()
            .map(|&(n, c)| n.dot(&u) - c)
            .fold(f64::NEG_INFINITY, f64::max)
            <= 2.0 * FEASIBLE_EPS
    };
    // Farthest pair of the thin feasible sliver decides point vs segment.
    let (mut ia, mut ib, mut best) = (0, 0, -1.0);
    for a in 0..sliver.len() {
        for b in a..sliver.len() {
            let d = (sliver[a] - sliver[b]).norm();
            if d > best {
                (ia, ib, best) = (a, b, d);
            }
        }
    }
    let centre = sliver.iter().sum::<Vec2>() / sliver.len() as f64;
    let (a, b) = (sliver[ia], sliver[ib]);
    if best > 1e-6 && feasible(a) && feasible(b) {
        Region::Segment(a, b)
    } else if feasible(centre) {
        Region::Point(centre)
    } else {
        Region::Empty
    }
}

fn erode_segment(a: Vec2, b: Vec2, k: &Region) -> Region {
    // Only a parallel, no-longer segment fits inside a segment.
    let Region::Segment(p, q) = k else {
        return Region::Empty;
    };
    let d = b - a;
    let e = q - p;
    let len = d.norm();
    if len == 0.0 || cross(d, e).abs() > COLLINEAR_EPS * len * e.norm().max(1.0) {
        return Region::Empty;
    }
    let dir = d / len;
    let (p, q) = if e.dot(&dir) >= 0.0 { (*p, *q) } else { (*q, *p) };
    let slack = len - (q - p).norm();
    if slack < -FEASIBLE_EPS {
        return Region::Empty;
    }
    let start = a - p;
    if slack <= 1e-12 {
        Region::Point(start)
    } else {
        Region::Segment(start, start + dir * slack)
    }
}

/// Uniform square grid of `nx * ny` cells of side `h`; `origin` is the lower
/// left corner of cell (0, 0). Values are stored row-major with y increasing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub origin: Vec2,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Smallest integer >= n whose only prime factors are 2, 3 and 5.
pub fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

impl GridSpec {
    pub fn new(origin: Vec2, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("cell size must be positive, got {h}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("grid must have at least one cell".into()));
        }
        Ok(GridSpec { origin, h, nx, ny })
    }

    /// Square grid centred on the origin covering [-half_width, half_width]^2,
    /// with an even, FFT-friendly cell count.
    pub fn centered(half_width: f64, h: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidArgument("half width must be positive".into()));
        }
        let mut n = next_smooth((2.0 * half_width / h).ceil() as usize);
        while n % 2 == 1 {
            n = next_smooth(n + 1);
        }
        let o = -(n as f64) * h / 2.0;
        GridSpec::new(Vec2::new(o, o), h, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn center(&self, ix: usize, iy: usize) -> Vec2 {
        self.origin + Vec2::new((ix as f64 + 0.5) * self.h, (iy as f64 + 0.5) * self.h)
    }

    pub fn upper(&self) -> Vec2 {
        self.origin + Vec2::new(self.nx as f64 * self.h, self.ny as f64 * self.h)
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Whether the box [lo, hi] lies inside the grid box shrunk by `margin`.
    pub fn contains_box(&self, lo: Vec2, hi: Vec2, margin: f64) -> bool {
        let up = self.upper();
        lo.x >= self.origin.x + margin
            && lo.y >= self.origin.y + margin
            && hi.x <= up.x - margin
            && hi.y <= up.y - margin
    }

    /// Bilinear interpolation of cell-centre samples, zero outside the grid.
    pub fn interpolate(&self, values: &[f64], p: Vec2) -> f64 {
        let fx = (p.x - self.origin.x) / self.h - 0.5;
        let fy = (p.y - self.origin.y) / self.h - 0.5;
        if !(fx > -1.0 && fy > -1.0 && fx < self.nx as f64 && fy < self.ny as f64) {
            return 0.0;
        }
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let at = |ix: i64, iy: i64| -> f64 {
            if ix < 0 || iy < 0 || ix >= self.nx as i64 || iy >= self.ny as i64 {
                0.0
            } else {
                values[self.index(ix as usize, iy as usize)]
            }
        };
        (1.0 - ty) * ((1.0 - tx) * at(x0, y0) + tx * at(x0 + 1, y0))
            + ty * ((1.0 - tx) * at(x0, y0 + 1) + tx * at(x0 + 1, y0 + 1))
    }
}

/// Per-cell coverage fractions of a polygon window, estimated with
/// `supersample^2` stratified subsamples in cells cut by the boundary.
pub fn rasterize(p: &Region, g: &GridSpec, supersample: usize) -> Result<Vec<f64>> {
    let poly = p.as_polygon().ok_or(Error::MeasureZeroWindow)?;
    let (lo, hi) = poly.bbox();
    if !g.contains_box(lo, hi, 0.0) {
        return Err(Error::GridTooSmall(format!(
            "window box [{:.4},{:.4}]x[{:.4},{:.4}] exceeds grid",
            lo.x, hi.x, lo.y, hi.y
        )));
    }
    let s = supersample.max(1);
    let planes = poly.half_planes();
    let h = g.h;
    let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
    let viol = |u: Vec2| {
        planes
            .iter()
            .map(|&(n, c)| n.dot(&u) - c)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let ix0 = (((lo.x - g.origin.x) / h).floor().max(0.0)) as usize;
    let iy0 = (((lo.y - g.origin.y) / h).floor().max(0.0)) as usize;
    let ix1 = ((((hi.x - g.origin.x) / h).ceil()) as usize).min(g.nx);
    let iy1 = ((((hi.y - g.origin.y) / h).ceil()) as usize).min(g.ny);

    let mut out = vec![0.0; g.len()];
    for iy in iy0..iy1 {
        for ix in ix0..ix1 {
            let c = g.center(ix, iy);
            let v = viol(c);
            let cov = if v <= -half_diag {
                1.0
            } else if v >= half_diag {
                0.0
            } else {
                let mut hits = 0usize;
                for a in 0..s {
                    for b in 0..s {
                        let u = Vec2::new(
                            c.x + h * ((a as f64 + 0.5) / s as f64 - 0.5),
                            c.y + h * ((b as f64 + 0.5) / s as f64 - 0.5),
                        );
                        if viol(u) <= 0.0 {
                            hits += 1;
                        }
                    }
                }
                hits as f64 / (s * s) as f64
            };
            out[g.index(ix, iy)] = cov;
        }
    }
    Ok(out)
}
