//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use mcms_core::refine::{
    compare_solvers, fourier_product, solve_system, FixedPoint, RefinementKernel, SolveOptions,
};
use mcms_core::scheme::{
    build_nu, check_selfsim_closure, generate_all_points, penrose_example2_nu, transition_windows,
    translation_sets, NuPolicy, SchemeSpec, TransitionData, WindowWeight,
};
use mcms_core::verify::{check_id2, density_estimate, weyl_test};
use mcms_core::{pf_eigen, ConvexPolygon, Mat2, Region, Vec2, WindowSystem};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: f64 = 1.618_033_988_749_895;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn pentagon() -> Region {
    Region::Polygon(ConvexPolygon::regular(5, 1.0, 0.0).unwrap())
}

fn example1() -> NuPolicy {
    NuPolicy::AreaMarkov(WindowWeight::Scale)
}

fn example2() -> NuPolicy {
    NuPolicy::Explicit(penrose_example2_nu())
}

fn solve(policy: &NuPolicy, h: f64) -> (TransitionData, RefinementKernel, FixedPoint) {
    let spec = SchemeSpec::penrose();
    let data = TransitionData::build(&spec, policy, 1.0).unwrap();
    let opts = SolveOptions { h, ..Default::default() };
    let (k, fp) = solve_system(&spec.window_system(), &data.windows_ji, &data.nu, &data.pf.w, &opts).unwrap();
    (data, k, fp)
}

fn wavevectors(n: usize, radius: f64, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = radius * rng.random_range(0.0f64..1.0).sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

fn transition_table() -> Outcome {
    // entries as printed, in units of the pentagon P; None marks the empty set
    // and Some(0.0) the singleton {0}
    let t1 = 1.0 / TAU;
    let t2 = t1 * t1;
    let t3 = t2 * t1;
    let table: [[Option<f64>; 4]; 4] = [
        [Some(t3), Some(0.0), None, Some(t2)],
        [Some(-1.0), Some(-t2), Some(-t1), Some(-(t3 + t1))],
        [Some(t3 + t1), Some(t1), Some(t2), Some(1.0)],
        [Some(-t2), None, Some(0.0), Some(-t3)],
    ];
    let start = Instant::now();
    let w = transition_windows(&SchemeSpec::penrose()).unwrap();
    let elapsed = start.elapsed();
    let p = pentagon();
    let mut bad = Vec::new();
    for j in 0..4 {
        for i in 0..4 {
            let ok = match table[j][i] {
                None => w[j][i] == Region::Empty,
                Some(c) if c == 0.0 => matches!(w[j][i], Region::Point(u) if u.norm() <= 1e-9),
                Some(c) => w[j][i].approx_eq(&p.scaled(c).unwrap(), 1e-9),
            };
            if !ok {
                bad.push(format!("({},{})", j + 1, i + 1));
            }
        }
    }
    let pass = bad.is_empty() && elapsed.as_secs_f64() < 1.0;
    outcome(pass, format!("mismatches [{}], {:.1} ms", bad.join(" "), elapsed.as_secs_f64() * 1e3))
}

fn example1_nu() -> Outcome {
    let printed = DMatrix::from_row_slice(
        4,
        4,
        &[
            (2.0 - TAU) / 4.0, 0.0, 0.0, (TAU - 1.0) / 4.0,
            TAU / 4.0, 2.0 - TAU, TAU - 1.0, (3.0 - TAU) / 4.0,
            (3.0 - TAU) / 4.0, TAU - 1.0, 2.0 - TAU, TAU / 4.0,
            (TAU - 1.0) / 4.0, 0.0, 0.0, (2.0 - TAU) / 4.0,
        ],
    );
    let w = transition_windows(&SchemeSpec::penrose()).unwrap();
    let nu = build_nu(&w, &example1()).unwrap();
    let dev = (&nu - &printed).amax();
    let col = (0..4).map(|i| (nu.column(i).sum() - 1.0).abs()).fold(0.0, f64::max);
    outcome(dev <= 1e-9 && col <= 1e-12, format!("max entry deviation {dev:.2e}, column-sum error {col:.2e}"))
}

fn pf_pairs() -> Outcome {
    let w = transition_windows(&SchemeSpec::penrose()).unwrap();
    let mut worst: f64 = 0.0;
    for (policy, expected) in [(example1(), [0.0, 0.5, 0.5, 0.0]), (example2(), [0.25; 4])] {
        let nu = build_nu(&w, &policy).unwrap();
        let res = pf_eigen(&nu, 1e-12, 100_000).unwrap();
        worst = worst.max((res.lambda_max - 1.0).abs());
        for (a, b) in res.w.iter().zip(expected) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max deviation {worst:.2e}"))
}

fn support_collapse() -> Outcome {
    let h = 1.0 / 128.0;
    let start = Instant::now();
    let (_, k, fp) = solve(&example1(), h);
    let f = &fp.density;
    let (m1, m4) = (f.channel_l1(0), f.channel_l1(3));
    let g = k.grid;
    let mut refl: f64 = 0.0;
    for c in 0..g.len() {
        let x = g.center(c % g.nx, c / g.nx);
        refl = refl.max((f.values[1][c] - f.value_at(2, -x)).abs());
    }
    let pass = m1 <= 1e-8 && m4 <= 1e-8 && refl <= 3.0 * h;
    outcome(
        pass,
        format!(
            "L1 masses ch1 {m1:.2e} ch4 {m4:.2e}; reflection error {refl:.2e} (3h = {:.2e}); {} iterations in {:.1} s",
            3.0 * h,
            fp.iterations(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn masses() -> Outcome {
    let h = 1.0 / 128.0;
    let mut worst_mass: f64 = 0.0;
    let mut worst_transport: f64 = 0.0;
    for policy in [example1(), example2()] {
        let (data, _, fp) = solve(&policy, h);
        for (m, w) in fp.density.masses.iter().zip(&data.pf.w) {
            worst_mass = worst_mass.max((m - w).abs());
        }
        worst_transport = worst_transport.max(fp.mass_errors.iter().copied().fold(0.0, f64::max));
    }
    outcome(
        worst_mass <= 1e-3 && worst_transport <= 10.0 * h,
        format!("|m - w| max {worst_mass:.2e}; per-iteration |m' - nu m| max {worst_transport:.2e} (10h = {:.2e})", 10.0 * h),
    )
}

fn cross_validation() -> Outcome {
    let ks = wavevectors(25, 10.0, 2024);
    let spec = SchemeSpec::penrose();
    let mut devs = Vec::new();
    for n in [128.0, 256.0] {
        let (data, _, fp) = solve(&example2(), 1.0 / n);
        devs.push(compare_solvers(&fp.density, &data.windows_ji, &spec.contraction(), &data.nu, &data.pf.w, &ks).unwrap());
    }
    let pass = devs[0] <= 5e-2 && devs[1] <= 2.5e-2 && devs[1] <= devs[0];
    outcome(pass, format!("relative deviation h=1/128 {:.2e}, h=1/256 {:.2e}", devs[0], devs[1]))
}

fn physical_id2() -> Outcome {
    let spec = SchemeSpec::penrose();
    let (data, _, fp) = solve(&example2(), 1.0 / 128.0);
    let mut means = Vec::new();
    for s in [40.0, 80.0] {
        let pts = generate_all_points(&spec, s);
        let ts = translation_sets(&spec, &data.windows_ji, s);
        let rep = check_id2(&spec, &data.nu, &fp.density, &pts, &ts, s, 100, 7).unwrap();
        means.push(rep.mean);
    }
    outcome(
        means[0] <= 0.05 && means[1] < means[0],
        format!("mean relative residual s=40 {:.3e}, s=80 {:.3e}", means[0], means[1]),
    )
}

fn equidistribution() -> Outcome {
    let spec = SchemeSpec::penrose();
    let s = 40.0;
    let pts = generate_all_points(&spec, s);
    let mut weyl_ok = true;
    let mut worst_ratio: f64 = 0.0;
    for (i, comp) in pts.iter().enumerate() {
        let sub = spec.windows[i].scaled(1.0 / TAU).unwrap();
        let w = weyl_test(comp, &spec.windows[i], &sub).unwrap();
        weyl_ok &= w.passes();
        worst_ratio = worst_ratio.max(w.deviation * (w.n as f64).sqrt() / 5.0);
    }
    let d = density_estimate(&pts, &[s]).unwrap();
    let r31 = d.ratio(2, 0);
    let r23 = d.ratio(1, 2);
    let pass = weyl_ok && (r31 / (TAU * TAU) - 1.0).abs() <= 0.05 && (r23 - 1.0).abs() <= 0.05;
    outcome(
        pass,
        format!("max Weyl deviation {worst_ratio:.2} x 5/sqrt(N); d3/d1 {r31:.4} (tau^2 {:.4}); d2/d3 {r23:.4}", TAU * TAU),
    )
}

fn closure() -> Outcome {
    let spec = SchemeSpec::penrose();
    let s = 5.0;
    let w = transition_windows(&spec).unwrap();
    let ts = translation_sets(&spec, &w, s);
    let reach = ts.iter().flatten().flatten().map(|v| v.phys.norm()).fold(0.0, f64::max);
    let pts = generate_all_points(&spec, TAU * s + reach + 1.0);
    let rep = check_selfsim_closure(&spec, &pts, &ts, s);
    outcome(
        rep.violations.is_empty() && rep.checked > 0,
        format!(
            "{} violations over {} checks ({} on window boundaries)",
            rep.violations.len(),
            rep.checked,
            rep.boundary_cases.len()
        ),
    )
}

fn toy_oracle() -> Outcome {
    let square = Region::polygon(vec![
        Vec2::new(-1.0, -1.0),
        Vec2::new(1.0, -1.0),
        Vec2::new(1.0, 1.0),
        Vec2::new(-1.0, 1.0),
    ])
    .unwrap();
    let sys = WindowSystem::new(vec![square], Mat2::identity() * 0.5, 4.0).unwrap();
    let wji = sys.transition_windows().unwrap();
    let nu = DMatrix::from_element(1, 1, 1.0);
    let opts = SolveOptions { h: 1.0 / 256.0, half_width: 1.25, ..Default::default() };
    let (_, fp) = match solve_system(&sys, &wji, &nu, &[1.0], &opts) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("solve failed: {e}")),
    };
    // closed form: prod_l sinc(k_x / 2^(l+1)) sinc(k_y / 2^(l+1))
    let sinc = |t: f64| if t == 0.0 { 1.0 } else { t.sin() / t };
    let closed = |k: Vec2| -> f64 {
        (0..64)
            .map(|l| {
                let s = 0.5f64.powi(l + 1);
                sinc(k.x * s) * sinc(k.y * s)
            })
            .product()
    };
    let ks = wavevectors(25, 10.0, 99);
    let mut product_err: f64 = 0.0;
    for &k in &ks {
        let v = fourier_product(&wji, &sys.contraction, &nu, &[1.0], k).unwrap()[0];
        product_err = product_err.max((v.re - closed(k)).abs().max(v.im.abs()));
    }
    let grid_err = compare_solvers(&fp.density, &wji, &sys.contraction, &nu, &[1.0], &ks).unwrap();
    outcome(
        product_err <= 1e-3 && grid_err <= 1e-3,
        format!(
            "converged in {} iterations; product vs closed form {product_err:.2e}; grid DFT vs product {grid_err:.2e}",
            fp.iterations()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("transition-window table", transition_table),
        ("Example 1 weight matrix", example1_nu),
        ("Perron-Frobenius pairs", pf_pairs),
        ("Example 1 support collapse and reflection", support_collapse),
        ("masses and mass transport", masses),
        ("grid solver vs Fourier product", cross_validation),
        ("physical-side invariance residual", physical_id2),
        ("equidistribution and densities", equidistribution),
        ("self-similarity closure", closure),
        ("square toy oracle", toy_oracle),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let r = check();
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {name}: {}", n + 1, r.detail);
        failed += usize::from(!r.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
