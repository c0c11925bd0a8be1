//! Physical-side checks of the invariant densities and the point sets.
//!
//! Every tolerance here is an engineering bound observed to hold, not a
//! proven rate; the report marks them as such.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cyclotomic::CycInt;
use crate::error::{Error, Result};
use crate::polygeom::{Region, Vec2};
use crate::refine::{solve_system, DensityGrid, SolveOptions};
use crate::scheme::{
    check_selfsim_closure, generate_all_points, LabeledPoint, NuPolicy, SchemeSpec, TransitionData,
    Translation,
};

fn c2v(z: Complex64) -> Vec2 {
    Vec2::new(z.re, z.im)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeylResult {
    pub empirical: f64,
    pub expected: f64,
    pub deviation: f64,
    pub n: usize,
}

impl WeylResult {
    /// Empirical tolerance 5/sqrt(N).
    pub fn tolerance(&self) -> f64 {
        5.0 / (self.n as f64).sqrt()
    }

    pub fn passes(&self) -> bool {
        self.deviation <= self.tolerance()
    }
}

/// Fraction of internal images falling in `sub` against area(sub)/area(window).
pub fn weyl_test(points: &[LabeledPoint], window: &Region, sub: &Region) -> Result<WeylResult> {
    if points.is_empty() {
        return Err(Error::EmptyPointList);
    }
    if !sub.is_empty() && !window.contains_region(sub, 1e-9) {
        return Err(Error::InvalidArgument("test region is not inside the window".into()));
    }
    let hits = points
        .iter()
        .filter(|p| sub.contains(c2v(p.internal), 1e-12))
        .count();
    let empirical = hits as f64 / points.len() as f64;
    let expected = sub.area() / window.area();
    Ok(WeylResult { empirical, expected, deviation: (empirical - expected).abs(), n: points.len() })
}

/// Residual statistics of the finite-radius invariance equations.
#[derive(Clone, Debug, PartialEq)]
pub struct Id2Report {
    pub sampled: usize,
    pub mean: f64,
    pub max: f64,
    /// (component, point, lhs, rhs, residual) per sample.
    pub samples: Vec<Id2Sample>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Id2Sample {
    pub component: usize,
    pub point: CycInt,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Point density p^i(y): f^i at y* where y lies in component i, else 0.
fn point_density(spec: &SchemeSpec, f: &DensityGrid, i: usize, y: CycInt) -> f64 {
    if spec.is_member(i, y) {
        f.value_at(i, c2v(y.embed_internal()))
    } else {
        0.0
    }
}

/// Compares p^j(x) with |det Q| sum_i nu^{ji}/#T^{ji} sum_v p^i(Q^{-1}(x - v))
/// on `samples` points x drawn (seeded) from all components with |x| <= s/q.
/// Residuals are relative to the peak of channel j (absolute if it is zero).
#[allow(clippy::too_many_arguments)]
pub fn check_id2(
    spec: &SchemeSpec,
    nu: &DMatrix<f64>,
    f: &DensityGrid,
    points: &[Vec<LabeledPoint>],
    tsets: &[Vec<Vec<Translation>>],
    s: f64,
    samples: usize,
    seed: u64,
) -> Result<Id2Report> {
    let r = spec.r();
    for j in 0..r {
        for i in 0..r {
            if nu[(j, i)] > 0.0 && tsets[j][i].is_empty() {
                return Err(Error::InsufficientRadius { j: j + 1, i: i + 1 });
            }
        }
    }
    let reach = s / spec.inflation_factor();
    let candidates: Vec<&LabeledPoint> = points
        .iter()
        .flatten()
        .filter(|p| p.phys.norm() <= reach)
        .collect();
    if candidates.is_empty() {
        return Err(Error::EmptyPointList);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, candidates.len(), samples.min(candidates.len())).into_vec();
    chosen.sort_unstable();
    let det = spec.det_q_abs();
    let peaks: Vec<f64> = (0..r).map(|j| f.channel_max(j)).collect();

    let out = chosen
        .par_iter()
        .map(|&k| {
            let x = candidates[k];
            let j = x.component;
            let lhs = point_density(spec, f, j, x.coeffs);
            let mut rhs = 0.0;
            for i in 0..r {
                if nu[(j, i)] <= 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for v in &tsets[j][i] {
                    let diff = x.coeffs.checked_sub(v.coeffs)?;
                    if let Ok(y) = diff.checked_div(spec.q_mult) {
                        acc += point_density(spec, f, i, y);
                    }
                }
                rhs += nu[(j, i)] * acc / tsets[j][i].len() as f64;
            }
            rhs *= det;
            let scale = if peaks[j] > 0.0 { peaks[j] } else { 1.0 };
            Ok(Id2Sample { component: j, point: x.coeffs, lhs, rhs, residual: (lhs - rhs).abs() / scale })
        })
        .collect::<Result<Vec<Id2Sample>>>()?;
    let mean = out.iter().map(|s| s.residual).sum::<f64>() / out.len() as f64;
    let max = out.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(Id2Report { sampled: out.len(), mean, max, samples: out })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityEstimate {
    pub s_list: Vec<f64>,
    /// densities[k][i] = #Lambda^(i)_{s_k} / (pi s_k^2).
    pub densities: Vec<Vec<f64>>,
    /// Largest relative change of any component between successive radii.
    pub cauchy: Vec<f64>,
}

impl DensityEstimate {
    /// d_i / d_j at the largest radius.
    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        let last = self.densities.last().expect("non-empty radius list");
        last[i] / last[j]
    }
}

/// Counts the supplied points (enumerated to at least the largest radius)
/// inside each disc of `s_list`.
pub fn density_estimate(points: &[Vec<LabeledPoint>], s_list: &[f64]) -> Result<DensityEstimate> {
    if s_list.is_empty() || s_list.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    if s_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radii must increase".into()));
    }
    let densities: Vec<Vec<f64>> = s_list
        .iter()
        .map(|&s| {
            let area = std::f64::consts::PI * s * s;
            points
                .iter()
                .map(|pts| pts.iter().filter(|p| p.phys.norm() <= s + 1e-9).count() as f64 / area)
                .collect()
        })
        .collect();
    let cauchy = densities
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| if *b > 0.0 { (a - b).abs() / b } else { 0.0 })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(DensityEstimate { s_list: s_list.to_vec(), densities, cauchy })
}

/// Statistical normalization of the point densities:
/// (area(Omega^(j)) / #Lambda^(j)_s) sum_x p^j(x), which tends to w^j.
pub fn id3_estimate(spec: &SchemeSpec, f: &DensityGrid, points: &[Vec<LabeledPoint>]) -> Result<Vec<f64>> {
    points
        .iter()
        .enumerate()
        .map(|(j, pts)| {
            if pts.is_empty() {
                return Err(Error::EmptyPointList);
            }
            let total: f64 = pts.iter().map(|p| point_density(spec, f, j, p.coeffs)).sum();
            Ok(spec.windows[j].area() * total / pts.len() as f64)
        })
        .collect()
}

/// Smallest distance between two of the points (infinite for fewer than two).
pub fn min_pairwise_distance(points: &[Complex64]) -> f64 {
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut best = f64::INFINITY;
    for k in 1..pts.len() {
        let p = pts[k];
        for q in pts[..k].iter().rev() {
            if p.re - q.re >= best {
                break;
            }
            best = best.min((p - q).norm());
        }
    }
    best
}

/// What a report line is compared against.
#[derive(Clone, Debug, PartialEq)]
pub enum Criterion {
    AtMost(f64),
    Near { expected: f64, tol: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportLine {
    pub name: String,
    /// None when the check could not be evaluated.
    pub value: Option<f64>,
    pub criterion: Criterion,
    pub note: Option<String>,
}

impl ReportLine {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        ReportLine { name: name.into(), value: Some(value), criterion: Criterion::AtMost(bound), note: None }
    }

    pub fn near(name: impl Into<String>, value: f64, expected: f64, tol: f64) -> Self {
        ReportLine { name: name.into(), value: Some(value), criterion: Criterion::Near { expected, tol }, note: None }
    }

    pub fn failed(name: impl Into<String>, criterion: Criterion, err: &Error) -> Self {
        ReportLine { name: name.into(), value: None, criterion, note: Some(err.to_string()) }
    }

    pub fn pass(&self) -> bool {
        match (self.value, &self.criterion) {
            (Some(v), Criterion::AtMost(b)) => v <= *b,
            (Some(v), Criterion::Near { expected, tol }) => (v - expected).abs() <= *tol,
            (None, _) => false,
        }
    }
}

impl fmt::Display for ReportLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let value = match (self.value, &self.note) {
            (Some(v), _) => format!("{v:.6e}"),
            (None, Some(n)) if n.starts_with("insufficient radius") => "insufficient-radius".to_string(),
            (None, _) => "error".to_string(),
        };
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        match &self.criterion {
            Criterion::AtMost(b) => write!(f, "{} {} <= {} {}", self.name, value, fmt_g(*b), verdict)?,
            Criterion::Near { expected, tol } => {
                write!(f, "{} {} ~ {} +- {} {}", self.name, value, fmt_g(*expected), fmt_g(*tol), verdict)?
            }
        }
        Ok(())
    }
}

fn fmt_g(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 10 {
        s
    } else {
        format!("{v:.6e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub lines: Vec<ReportLine>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(ReportLine::pass)
    }

    pub fn push(&mut self, line: ReportLine) {
        self.lines.push(line);
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# tolerances are empirical engineering bounds")?;
        for l in &self.lines {
            writeln!(f, "{l}")?;
            if let Some(n) = &l.note {
                writeln!(f, "#   {n}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub s: f64,
    pub samples: usize,
    pub seed: u64,
    /// Radius for the self-similarity closure check.
    pub closure_s: f64,
    pub solve: SolveOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { s: 40.0, samples: 100, seed: 7, closure_s: 5.0, solve: SolveOptions::default() }
    }
}

pub const ID2_TOL: f64 = 0.05;
pub const ID3_TOL: f64 = 0.05;
pub const DENSITY_RATIO_TOL: f64 = 0.05;

/// Runs every physical-side check for a scheme and collects a report.
/// Failures to evaluate a check become FAIL lines rather than errors; only
/// problems with the scheme itself are returned as errors.
pub fn run_verification(spec: &SchemeSpec, policy: &NuPolicy, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let r = spec.r();
    let data = TransitionData::build(spec, policy, opts.s)?;
    report.push(ReportLine::near("PF.lambda_max", data.pf.lambda_max, 1.0, 1e-10));

    let points = generate_all_points(spec, opts.s);
    let windows = spec.effective_windows();

    for i in 0..r {
        let name = format!("Weyl.{}.deviation", i + 1);
        let sub = shrink_about_centroid(&windows[i], 1.0 / spec.inflation_factor());
        match sub.and_then(|sub| weyl_test(&points[i], &windows[i], &sub)) {
            Ok(w) => {
                let mut line = ReportLine::at_most(name, w.deviation, w.tolerance());
                line.note = Some(format!("N={} expected={:.6}", w.n, w.expected));
                report.push(line);
            }
            Err(e) => report.push(ReportLine::failed(name, Criterion::AtMost(0.0), &e)),
        }
    }

    let radii = [opts.s / 4.0, opts.s / 2.0, opts.s];
    match density_estimate(&points, &radii) {
        Ok(d) => {
            for i in 1..r {
                let expected = windows[i].area() / windows[0].area();
                let name = format!("M3.d{}/d1", i + 1);
                report.push(ReportLine::near(name, d.ratio(i, 0), expected, DENSITY_RATIO_TOL * expected));
            }
        }
        Err(e) => report.push(ReportLine::failed("M3.density", Criterion::AtMost(0.0), &e)),
    }

    let solved = solve_system(&spec.window_system(), &data.windows_ji, &data.nu, &data.pf.w, &opts.solve);
    match solved {
        Ok((_, fp)) => {
            let f = &fp.density;
            match check_id2(spec, &data.nu, f, &points, &data.tsets, opts.s, opts.samples, opts.seed) {
                Ok(rep) => {
                    let mut line = ReportLine::at_most("ID2.mean_residual", rep.mean, ID2_TOL);
                    line.note = Some(format!("samples={} max={:.3e}", rep.sampled, rep.max));
                    report.push(line);
                }
                Err(e) => report.push(ReportLine::failed("ID2.mean_residual", Criterion::AtMost(ID2_TOL), &e)),
            }
            match id3_estimate(spec, f, &points) {
                Ok(est) => {
                    for (j, v) in est.iter().enumerate() {
                        report.push(ReportLine::near(format!("ID3.{}", j + 1), *v, data.pf.w[j], ID3_TOL));
                    }
                }
                Err(e) => report.push(ReportLine::failed("ID3", Criterion::AtMost(ID3_TOL), &e)),
            }
        }
        Err(e) => {
            report.push(ReportLine::failed("solve", Criterion::AtMost(opts.solve.tol), &e));
        }
    }

    let cs = opts.closure_s;
    let closure_tsets = crate::scheme::translation_sets(spec, &data.windows_ji, cs);
    let reach = closure_tsets
        .iter()
        .flatten()
        .flatten()
        .map(|v| v.phys.norm())
        .fold(0.0, f64::max);
    let closure_points = generate_all_points(spec, spec.inflation_factor() * cs + reach + 1.0);
    let closure = check_selfsim_closure(spec, &closure_points, &closure_tsets, cs);
    let mut line = ReportLine::at_most("closure.violations", closure.violations.len() as f64, 0.0);
    line.note = Some(format!("checked={} boundary={}", closure.checked, closure.boundary_cases.len()));
    report.push(line);
    Ok(report)
}

fn shrink_about_centroid(window: &Region, k: f64) -> Result<Region> {
    let c = window.as_polygon().ok_or(Error::MeasureZeroWindow)?.centroid();
    window.translate(-c).scaled(k).map(|w| w.translate(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{generate_points, transition_windows, translation_sets};
    use approx::assert_abs_diff_eq;

    #[test]
    fn weyl_whole_window_and_null_region() {
        let spec = SchemeSpec::penrose();
        let pts = generate_points(&spec, 0, 10.0);
        let w = weyl_test(&pts, &spec.windows[0], &spec.windows[0]).unwrap();
        assert_eq!(w.empirical, 1.0);
        assert_eq!(w.expected, 1.0);
        let seg = Region::Segment(Vec2::new(-0.1, 0.013), Vec2::new(0.2, 0.013));
        let w = weyl_test(&pts, &spec.windows[0], &seg).unwrap();
        assert_eq!(w.expected, 0.0);
        assert!(w.empirical <= 2.0 / pts.len() as f64);
        assert_eq!(weyl_test(&[], &spec.windows[0], &seg), Err(Error::EmptyPointList));
    }

    #[test]
    fn weyl_inner_pentagon() {
        let spec = SchemeSpec::penrose();
        let pts = generate_points(&spec, 0, 40.0);
        let sub = spec.windows[0].scaled(1.0 / 1.618_033_988_749_895).unwrap();
        let w = weyl_test(&pts, &spec.windows[0], &sub).unwrap();
        assert_abs_diff_eq!(w.expected, 0.381_966_011_250_105, epsilon = 1e-12);
        assert!(w.passes(), "{w:?}");
    }

    #[test]
    fn min_distance_brute_force() {
        let pts: Vec<Complex64> = (0..200)
            .map(|k| {
                let t = k as f64;
                Complex64::new((t * 0.7548776662).fract() * 10.0, (t * 0.5698402910).fract() * 10.0)
            })
            .collect();
        let mut brute = f64::INFINITY;
        for a in 0..pts.len() {
            for b in 0..a {
                brute = brute.min((pts[a] - pts[b]).norm());
            }
        }
        assert_eq!(min_pairwise_distance(&pts), brute);
        assert_eq!(min_pairwise_distance(&pts[..1]), f64::INFINITY);
    }

    #[test]
    fn density_estimate_validates_radii() {
        let spec = SchemeSpec::penrose();
        let pts = generate_all_points(&spec, 10.0);
        assert!(density_estimate(&pts, &[10.0, 5.0]).is_err());
        let d = density_estimate(&pts, &[5.0, 10.0]).unwrap();
        assert!(d.densities.iter().flatten().all(|&v| v > 0.0));
        assert_eq!(d.cauchy.len(), 1);
    }

    #[test]
    fn id2_zero_density_and_small_radius() {
        let spec = SchemeSpec::penrose();
        let wji = transition_windows(&spec).unwrap();
        let nu = crate::scheme::penrose_example2_nu();
        let grid = crate::polygeom::GridSpec::centered(1.7, 1.0 / 16.0).unwrap();
        let f = DensityGrid::zeros(grid, 4);
        let pts = generate_all_points(&spec, 10.0);
        let ts = translation_sets(&spec, &wji, 10.0);
        let rep = check_id2(&spec, &nu, &f, &pts, &ts, 10.0, 20, 1).unwrap();
        assert_eq!(rep.mean, 0.0);
        assert_eq!(rep.sampled, 20);
        let ts1 = translation_sets(&spec, &wji, 1.0);
        assert!(matches!(
            check_id2(&spec, &nu, &f, &pts, &ts1, 1.0, 20, 1),
            Err(Error::InsufficientRadius { .. })
        ));
    }

    #[test]
    fn report_line_format() {
        let l = ReportLine::at_most("ID2.mean_residual", 0.0123, 0.05);
        let s = l.to_string();
        assert!(s.starts_with("ID2.mean_residual "));
        assert!(s.ends_with(" <= 0.05 PASS"), "{s}");
        let l = ReportLine::near("M3.d3/d1", 2.6, 2.618, 0.13);
        assert!(l.to_string().ends_with("~ 2.618 +- 0.13 PASS"));
        let e = ReportLine::failed("ID2.mean_residual", Criterion::AtMost(0.05), &Error::InsufficientRadius { j: 1, i: 2 });
        assert!(e.to_string().starts_with("ID2.mean_residual insufficient-radius <= 0.05 FAIL"));
    }
}
