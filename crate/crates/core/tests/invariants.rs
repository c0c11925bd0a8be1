use mcms_core::refine::{solve_system, DensityGrid, FixedPoint, SolveOptions};
use mcms_core::scheme::{
    generate_all_points, penrose_example2_nu, translation_sets, NuPolicy, SchemeSpec, TransitionData,
    WindowWeight,
};
use mcms_core::verify::{check_id2, density_estimate, id3_estimate};
use mcms_core::{Mat2, Vec2};

const TAU: f64 = 1.618_033_988_749_895;

fn solve(policy: &NuPolicy, h: f64) -> (TransitionData, FixedPoint) {
    let spec = SchemeSpec::penrose();
    let data = TransitionData::build(&spec, policy, 1.0).unwrap();
    let opts = SolveOptions { h, ..Default::default() };
    let (_, fp) = solve_system(&spec.window_system(), &data.windows_ji, &data.nu, &data.pf.w, &opts).unwrap();
    (data, fp)
}

/// L1 distance between a coarse solution and a finer one sampled at the
/// coarse cell centres.
fn l1_against_finer(coarse: &DensityGrid, fine: &DensityGrid) -> f64 {
    let g = coarse.grid;
    let mut total = 0.0;
    for j in 0..coarse.r() {
        for c in 0..g.len() {
            let x = g.center(c % g.nx, c / g.nx);
            total += (coarse.values[j][c] - fine.value_at(j, x)).abs();
        }
    }
    total * g.cell_area()
}

#[test]
fn residual_decreases_after_burn_in() {
    for policy in [NuPolicy::AreaMarkov(WindowWeight::Scale), NuPolicy::Explicit(penrose_example2_nu())] {
        let (_, fp) = solve(&policy, 1.0 / 64.0);
        let r = &fp.residuals;
        for k in 5..r.len() {
            assert!(r[k] < r[k - 1], "step {k}: {r:?}");
        }
        let c = fp.contraction_factor(5);
        assert!(c > 0.0 && c < 0.5, "contraction {c}");
    }
}

#[test]
fn grid_refinement_consistency() {
    let policy = NuPolicy::Explicit(penrose_example2_nu());
    let sols: Vec<DensityGrid> = [32.0, 64.0, 128.0].iter().map(|n| solve(&policy, 1.0 / n).1.density).collect();
    let d1 = l1_against_finer(&sols[0], &sols[1]);
    let d2 = l1_against_finer(&sols[1], &sols[2]);
    assert!(d1 / d2 >= 1.8, "d(h, h/2) = {d1:e}, d(h/2, h/4) = {d2:e}");
}

#[test]
fn pentagon_symmetry() {
    let h = 1.0 / 64.0;
    let (_, fp) = solve(&NuPolicy::Explicit(penrose_example2_nu()), h);
    let f = &fp.density;
    let g = f.grid;
    let a = 2.0 * std::f64::consts::PI / 5.0;
    let rot = Mat2::new(a.cos(), -a.sin(), a.sin(), a.cos());
    for j in 0..4 {
        let v = &f.values[j];
        let mut lip: f64 = 0.0;
        for iy in 0..g.ny - 1 {
            for ix in 0..g.nx - 1 {
                let here = v[g.index(ix, iy)];
                lip = lip.max((v[g.index(ix + 1, iy)] - here).abs() / h);
                lip = lip.max((v[g.index(ix, iy + 1)] - here).abs() / h);
            }
        }
        let mut worst: f64 = 0.0;
        for c in 0..g.len() {
            let x = g.center(c % g.nx, c / g.nx);
            worst = worst.max((f.value_at(j, rot * x) - v[c]).abs());
        }
        assert!(worst <= 3.0 * h * lip, "channel {}: {worst:e} vs {:e}", j + 1, 3.0 * h * lip);
    }
}

#[test]
fn density_ratios_converge_to_area_ratios() {
    let spec = SchemeSpec::penrose();
    let radii = [10.0, 20.0, 40.0];
    let pts = generate_all_points(&spec, 40.0);
    let d = density_estimate(&pts, &radii).unwrap();
    assert!(d.densities.iter().flatten().all(|&v| v > 0.0));
    let dev: Vec<f64> = d.densities.iter().map(|row| (row[2] / row[0] / (TAU * TAU) - 1.0).abs()).collect();
    assert!(dev[1] < dev[0] && dev[2] < dev[1], "{dev:?}");
    assert!(d.cauchy[1] < d.cauchy[0]);
}

#[test]
fn id2_and_id3_converge_with_radius() {
    let spec = SchemeSpec::penrose();
    for policy in [NuPolicy::AreaMarkov(WindowWeight::Scale), NuPolicy::Explicit(penrose_example2_nu())] {
        let (data, fp) = solve(&policy, 1.0 / 128.0);
        let mut means = Vec::new();
        for s in [20.0, 40.0] {
            let pts = generate_all_points(&spec, s);
            let ts = translation_sets(&spec, &data.windows_ji, s);
            means.push(check_id2(&spec, &data.nu, &fp.density, &pts, &ts, s, 100, 3).unwrap().mean);
            if s == 40.0 {
                let id3 = id3_estimate(&spec, &fp.density, &pts).unwrap();
                for (e, w) in id3.iter().zip(&data.pf.w) {
                    assert!((e - w).abs() < 0.05, "{id3:?} vs {:?}", data.pf.w);
                }
            }
        }
        assert!(means[1] < means[0], "{means:?}");
    }
}

#[test]
fn example1_vanishing_component_has_zero_point_density() {
    let spec = SchemeSpec::penrose();
    let (data, fp) = solve(&NuPolicy::AreaMarkov(WindowWeight::Scale), 1.0 / 64.0);
    let pts = generate_all_points(&spec, 20.0);
    let ts = translation_sets(&spec, &data.windows_ji, 20.0);
    let rep = check_id2(&spec, &data.nu, &fp.density, &pts, &ts, 20.0, 200, 11).unwrap();
    for s in rep.samples.iter().filter(|s| s.component == 0 || s.component == 3) {
        assert!(s.lhs.abs() < 1e-12 && s.rhs.abs() < 1e-12, "{s:?}");
    }
    assert!(rep.samples.iter().any(|s| s.component == 0));
}

#[test]
fn gamma_shift_moves_densities_with_windows() {
    let gamma = Vec2::new(0.01, -0.02);
    let spec = SchemeSpec::penrose().with_gamma(gamma);
    let data = TransitionData::build(&spec, &NuPolicy::Explicit(penrose_example2_nu()), 1.0).unwrap();
    let opts = SolveOptions { h: 1.0 / 64.0, ..Default::default() };
    let (_, shifted) = solve_system(&spec.window_system(), &data.windows_ji, &data.nu, &data.pf.w, &opts).unwrap();
    let (_, base) = solve(&NuPolicy::Explicit(penrose_example2_nu()), 1.0 / 64.0);
    for (a, b) in shifted.density.masses.iter().zip(&base.density.masses) {
        assert!((a - b).abs() < 1e-3);
    }
    let probe = Vec2::new(0.1, 0.2);
    let lhs = shifted.density.value_at(1, probe + gamma);
    let rhs = base.density.value_at(1, probe);
    assert!((lhs - rhs).abs() < 0.05 * base.density.channel_max(1));
}
