//! The pipeline behind each subcommand. Every command renders its files in
//! memory; nothing touches the disk until all of them are ready.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mcms_core::refine::{compare_solvers, solve_system, DensityGrid};
use mcms_core::scheme::{build_nu, generate_all_points, transition_windows, LabeledPoint};
use mcms_core::verify::{run_verification, VerifyReport};
use mcms_core::{pf_eigen, PfResult, Region, Vec2};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::format::{g12, g12_snap, join};

/// A rendered output file.
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn artifact(name: impl Into<String>, contents: String) -> Artifact {
    Artifact { name: name.into(), contents }
}

pub fn write_artifacts(out: &Path, artifacts: &[Artifact]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for a in artifacts {
        let path = out.join(&a.name);
        fs::write(&path, &a.contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn render_region(r: &Region) -> String {
    let coords = |pts: &[Vec2]| join(pts.iter().flat_map(|p| [p.x, p.y]), g12_snap);
    match r {
        Region::Empty => "EMPTY".into(),
        Region::Point(p) => format!("POINT {}", coords(&[*p])),
        Region::Segment(a, b) => format!("SEGMENT {}", coords(&[*a, *b])),
        Region::Polygon(p) => format!("POLYGON {} {}", p.vertices().len(), coords(p.vertices())),
    }
}

fn render_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for j in 0..m.nrows() {
        writeln!(s, "{}", join(m.row(j).iter().copied(), g12_snap)).unwrap();
    }
    s
}

pub fn windows(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let w = transition_windows(&cfg.spec).context("transition_windows")?;
    let r = w.len();
    let mut table = String::from("# entry j i KIND coordinates (x y pairs; POLYGON carries its vertex count)\n");
    for (j, row) in w.iter().enumerate() {
        for (i, region) in row.iter().enumerate() {
            writeln!(table, "entry {} {} {}", j + 1, i + 1, render_region(region)).unwrap();
        }
    }
    let areas = DMatrix::from_fn(r, r, |j, i| w[j][i].area());
    let mut out = Vec::new();
    if cfg.wants("windows") {
        out.push(artifact("windows.txt", table));
    }
    if cfg.wants("areas") {
        out.push(artifact("areas.txt", render_matrix(&areas)));
    }
    Ok(out)
}

pub fn points_csv(points: &[Vec<LabeledPoint>]) -> String {
    let mut s = String::from("component,m0,m1,m2,m3,phys_re,phys_im,int_re,int_im\n");
    for p in points.iter().flatten() {
        let [m0, m1, m2, m3] = p.coeffs.0;
        writeln!(
            s,
            "{},{m0},{m1},{m2},{m3},{},{},{},{}",
            p.component + 1,
            g12_snap(p.phys.re),
            g12_snap(p.phys.im),
            g12_snap(p.internal.re),
            g12_snap(p.internal.im)
        )
        .unwrap();
    }
    s
}

pub fn points(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let pts = generate_all_points(&cfg.spec, cfg.s);
    Ok(if cfg.wants("points") { vec![artifact("points.csv", points_csv(&pts))] } else { Vec::new() })
}

fn render_pf(pf: &PfResult) -> String {
    let mut s = String::new();
    writeln!(s, "lambda = {}", g12(pf.lambda_max)).unwrap();
    writeln!(s, "w = {}", join(pf.w.iter().copied(), g12_snap)).unwrap();
    writeln!(s, "lambda2_abs = {}", g12_snap(pf.lambda2_abs)).unwrap();
    writeln!(s, "gap = {}", g12_snap(pf.gap)).unwrap();
    writeln!(s, "simple = {}", pf.simple).unwrap();
    s
}

fn nu_and_pf(cfg: &RunConfig) -> Result<(Vec<Vec<Region>>, DMatrix<f64>, PfResult)> {
    let w = transition_windows(&cfg.spec).context("transition_windows")?;
    let nu = build_nu(&w, &cfg.nu_policy).context("build_nu")?;
    let pf = pf_eigen(&nu, mcms_core::pfsolve::DEFAULT_TOL, mcms_core::pfsolve::DEFAULT_MAXIT).context("pf_eigen")?;
    Ok((w, nu, pf))
}

pub fn nu(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let (_, nu, pf) = nu_and_pf(cfg)?;
    let mut out = Vec::new();
    if cfg.wants("nu") {
        out.push(artifact("nu.txt", render_matrix(&nu)));
    }
    if cfg.wants("summary") {
        out.push(artifact("pf.txt", render_pf(&pf)));
    }
    Ok(out)
}

pub fn density_grid_file(f: &DensityGrid, j: usize) -> String {
    let g = f.grid;
    let mut s = String::new();
    writeln!(s, "# origin {} {}", g12(g.origin.x), g12(g.origin.y)).unwrap();
    writeln!(s, "# h {}", g12(g.h)).unwrap();
    writeln!(s, "# nx {} ny {}", g.nx, g.ny).unwrap();
    for row in f.values[j].chunks(g.nx) {
        writeln!(s, "{}", join(row.iter().copied(), g12_snap)).unwrap();
    }
    s
}

pub fn density_csv(f: &DensityGrid) -> String {
    let g = f.grid;
    let mut s = String::from("x,y");
    for j in 0..f.r() {
        write!(s, ",f{}", j + 1).unwrap();
    }
    s.push('\n');
    for c in 0..g.len() {
        let x = g.center(c % g.nx, c / g.nx);
        write!(s, "{},{}", g12_snap(x.x), g12_snap(x.y)).unwrap();
        for j in 0..f.r() {
            write!(s, ",{}", g12_snap(f.values[j][c])).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Seeded sample of 25 wavevectors with |k| <= 10.
pub fn sample_wavevectors(seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..25)
        .map(|_| {
            let r = 10.0 * rng.random_range(0.0f64..1.0).sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

pub fn solve(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let (w, nu, pf) = nu_and_pf(cfg)?;
    let (kernel, fp) =
        solve_system(&cfg.spec.window_system(), &w, &nu, &pf.w, &cfg.solve).context("solve_fixed_point")?;
    let ks = sample_wavevectors(cfg.seed);
    let deviation = compare_solvers(&fp.density, &w, &cfg.spec.contraction(), &nu, &pf.w, &ks)
        .context("compare_solvers")?;
    let f = &fp.density;

    let mut summary = render_pf(&pf);
    writeln!(summary, "h = {}", g12(kernel.grid.h)).unwrap();
    writeln!(summary, "grid = {} {}", kernel.grid.nx, kernel.grid.ny).unwrap();
    writeln!(summary, "iterations = {}", fp.iterations()).unwrap();
    writeln!(summary, "contraction = {}", g12(fp.contraction_factor(5))).unwrap();
    writeln!(summary, "masses = {}", join(f.masses.iter().copied(), g12_snap)).unwrap();
    writeln!(summary, "peaks = {}", join((0..f.r()).map(|j| f.channel_max(j)), g12_snap)).unwrap();
    writeln!(summary, "fourier_deviation = {}", g12(deviation)).unwrap();
    writeln!(summary, "# iteration residual mass_error").unwrap();
    for (k, (r, m)) in fp.residuals.iter().zip(&fp.mass_errors).enumerate() {
        writeln!(summary, "residual {} {} {}", k + 1, g12(*r), g12(*m)).unwrap();
    }

    let mut out = Vec::new();
    if cfg.wants("nu") {
        out.push(artifact("nu.txt", render_matrix(&nu)));
    }
    if cfg.wants("density-grids") {
        for j in 0..f.r() {
            out.push(artifact(format!("density_{}.txt", j + 1), density_grid_file(f, j)));
        }
    }
    if cfg.wants("density-csv") {
        out.push(artifact("density.csv", density_csv(f)));
    }
    if cfg.wants("summary") {
        out.push(artifact("summary.txt", summary));
    }
    Ok(out)
}

pub fn verify(cfg: &RunConfig) -> Result<(VerifyReport, Vec<Artifact>)> {
    let report = run_verification(&cfg.spec, &cfg.nu_policy, &cfg.verify_options()).context("verify")?;
    let files = if cfg.wants("report") {
        vec![artifact("verify_report.txt", report.to_string())]
    } else {
        Vec::new()
    };
    Ok((report, files))
}
