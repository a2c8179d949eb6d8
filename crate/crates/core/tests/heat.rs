use expheat_core::heat::duhamel::PICARD_LIMIT;
use expheat_core::heat::oracles::check_slices;
use expheat_core::heat::*;
use expheat_core::inner::{solve_eta, EtaConfig};
use expheat_core::nonlinearity::{chi, chi_prime};
use expheat_core::shooting::*;
use expheat_core::Error;
use proptest::prelude::*;
use std::sync::OnceLock;

fn profile() -> &'static SolitonProfile {
    static P: OnceLock<SolitonProfile> = OnceLock::new();
    P.get_or_init(|| {
        let sol = solve_eta(&EtaConfig::default()).unwrap();
        let cfg = ShootConfig::default();
        let points = find_r_and_rinf(&sol, cfg.ode()).unwrap();
        let ms = find_mstar(&points, &cfg).unwrap();
        assemble_phistar(&sol, &points, &ms, &cfg, &ProfileConfig::default()).unwrap()
    })
}

fn picard() -> &'static PicardSolution<'static> {
    static S: OnceLock<PicardSolution<'static>> = OnceLock::new();
    S.get_or_init(|| picard_solve(&HeatConfig::default(), profile()).unwrap())
}

fn report() -> &'static NonuniquenessReport {
    static R: OnceLock<NonuniquenessReport> = OnceLock::new();
    R.get_or_init(|| nonuniqueness_report(picard(), profile()).unwrap())
}

fn gaussian(sigma: f64, t: f64, r: f64) -> f64 {
    sigma / (sigma + t) * (-r * r / (4.0 * (sigma + t))).exp()
}

/// Smooth stand-in for the indicator of x < 0.
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + x.exp())
}

/// max / min of positive values.
fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values.into_iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    hi / lo
}

#[test]
fn gaussian_flow_on_both_quadrature_paths() {
    let sigma = 1e-3;
    let src = FnSource(move |s: f64| gaussian(sigma, 0.0, s));
    for &t in &[1e-9, 1e-6, 1e-4, 1e-3] {
        for &r in &[0.0, 1e-5, 0.01, 0.05, 0.15] {
            let want = gaussian(sigma, t, r);
            let a = heat_apply(t, &src, r, 1e-13).unwrap()[0];
            assert!((a / want - 1.0).abs() < 1e-8, "t={t} r={r}");
        }
    }
    // tables take the fixed rules; the width must be resolved by the grid
    let grid = RadialGrid::log_spaced(1e-10, 20.0, 6, 12).unwrap();
    let sigma = 0.5;
    let table: Vec<[f64; 1]> = grid.r().iter().map(|&r| [gaussian(sigma, 0.0, r)]).collect();
    for &t in &[1e-12, 1e-9, 1e-6, 1e-3, 0.1] {
        for &r in &[0.0, 1e-5, 0.01, 0.15, 0.6, 1.5] {
            let want = gaussian(sigma, t, r);
            let b = heat_apply(t, &grid.smooth_source(&table), r, 1e-13).unwrap()[0];
            assert!((b / want - 1.0).abs() < 1e-8, "t={t} r={r}: {b} {want}");
        }
    }
}

#[test]
fn semigroup_on_the_profile() {
    let grid = RadialGrid::log_spaced(1e-10, 20.0, 2, 12).unwrap();
    let src = ProfileSource(profile());
    for &(t1, t2) in &[(1e-10, 3e-10), (1e-6, 1e-6)] {
        let first: Vec<[f64; 1]> = grid.r().iter().map(|&r| heat_apply(t1, &src, r, 1e-12).unwrap()).collect();
        let mid = grid.smooth_source(&first);
        for &r in &[0.0, 1e-6, 1e-4, 1e-2, 0.3] {
            let once = heat_apply(t1 + t2, &src, r, 1e-12).unwrap()[0];
            let twice = heat_apply(t2, &mid, r, 1e-12).unwrap()[0];
            assert!((once / twice - 1.0).abs() < 1e-8, "t1={t1} r={r}: {once} {twice}");
        }
    }
}

#[test]
fn semigroup_on_a_gaussian_without_tables() {
    let g = FnSource(|s: f64| gaussian(0.05, 0.0, s));
    let (t1, t2) = (0.01, 0.02);
    let mid = FnSource(|s: f64| heat_apply(t1, &g, s, 1e-13).unwrap()[0]);
    for &r in &[0.0, 0.2, 0.7] {
        let once = heat_apply(t1 + t2, &g, r, 1e-13).unwrap()[0];
        let twice = heat_apply(t2, &mid, r, 1e-12).unwrap()[0];
        assert!((once / twice - 1.0).abs() < 1e-9, "r={r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_is_positive_and_sup_contracting(
        parts in prop::collection::vec((0.01f64..1.0, 0.0f64..1.0), 1..4),
        t in 1e-6f64..1.0,
        r in 0.0f64..3.0,
    ) {
        let mix = parts.clone();
        let src = FnSource(move |s: f64| mix.iter().map(|&(sg, w)| w * gaussian(sg, 0.0, s)).sum());
        let sup: f64 = parts.iter().map(|p| p.1).sum();
        let got = heat_apply(t, &src, r, 1e-12).unwrap()[0];
        let want: f64 = parts.iter().map(|&(sg, w)| w * gaussian(sg, t, r)).sum();
        prop_assert!(got >= 0.0 && got <= sup * (1.0 + 1e-12));
        prop_assert!((got - want).abs() <= 1e-10 * sup.max(1e-300));
    }

    #[test]
    fn decreasing_steps_stay_decreasing(edge in 0.05f64..2.0, t in 1e-6f64..0.5) {
        let grid = RadialGrid::log_spaced(1e-6, 10.0, 1, 8).unwrap();
        let step = FnSource(move |s: f64| logistic((s - edge) / (0.01 * edge)));
        let rep = monotonicity_check(&step, &[t], &grid, 1e-10).unwrap();
        prop_assert!(rep.passed, "{:?}", rep);
    }
}

#[test]
fn u0_is_bounded_decreasing_and_peaks_at_the_origin() {
    let solver = &picard().solver;
    let u0 = solver.u0_field();
    let rep = check_slices(&u0.r, &u0.times, &u0.values);
    assert!(rep.passed, "{rep:?}");
    for (k, &t) in u0.times.iter().enumerate() {
        assert!(u0.values[k].iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(u0.at_origin(k) <= profile().value(t.sqrt()).unwrap() + 1.0 / ell(t).sqrt());
    }
    // direct evaluation on a coarser time list as a second route
    let rep = monotonicity_check(&ProfileSource(profile()), &[1e-12, 1e-8, 1e-4], solver.grid(), 1e-12).unwrap();
    assert!(rep.passed && rep.sup_at_origin, "{rep:?}");
}

#[test]
fn steep_indicator_and_increasing_control() {
    let grid = RadialGrid::log_spaced(1e-8, 20.0, 2, 10).unwrap();
    let steep = FnSource(|s: f64| logistic((s - 1e-3) / 1e-5));
    assert!(monotonicity_check(&steep, &[1e-6], &grid, 1e-10).unwrap().passed);
    let up = FnSource(|s: f64| s.min(5.0));
    let rep = monotonicity_check(&up, &[1e-6], &grid, 1e-10).unwrap();
    assert!(!rep.passed);
    let (_, r1, r2, inc) = rep.worst.unwrap();
    assert!(r2 > r1 && inc > 0.0);
}

#[test]
fn origin_excess_is_a_stable_multiple_of_the_log_weight() {
    let b = u0_bounds(&picard().solver, profile()).unwrap();
    assert!(b.origin.first().unwrap().0 <= 1.4e-12 && b.origin.last().unwrap().0 == picard().solver.t_max());
    let worst = b.origin.iter().map(|o| o.1.abs()).fold(0.0, f64::max);
    assert!(worst < 1.0, "{worst}");
    assert!(b.origin_spread < 1.5, "{}", b.origin_spread);
}

#[test]
fn u0_stays_under_the_smaller_profile_value() {
    let b = u0_bounds(&picard().solver, profile()).unwrap();
    assert!(b.c_min_envelope.is_finite() && b.c_min_envelope < 1.0, "{}", b.c_min_envelope);
}

#[test]
fn envelope_constants_are_uniform() {
    let b = u0_bounds(&picard().solver, profile()).unwrap();
    assert!(b.c_f0 < 10.0 && b.c_f0_prime < 10.0);
    assert!(spread(b.envelope_decades.iter().map(|d| d.1)) < 2.0);
    assert!(spread(b.envelope_decades.iter().map(|d| d.2)) < 2.0);
}

#[test]
fn first_duhamel_term_decays_like_the_log_weight() {
    let sol = picard();
    let solver = &sol.solver;
    let (d0, e0) = solver.duhamel(&solver.zero()).unwrap();
    let c0: Vec<f64> = solver.eval_indices().iter().map(|&k| d0.sup_norm(k) * ell(d0.times[k]).powf(1.5)).collect();
    assert!(spread(c0.iter().copied()) < 1.5, "{c0:?}");
    assert!((sol.diagnostics.c0 - solver.weighted_norm(&d0.values, 1.5)).abs() < 1e-14);
    // sup |L| ≤ 2m*, and the kernel has unit mass
    for (k, &t) in e0.times.iter().enumerate() {
        assert!(e0.sup_norm(k) <= 2.0 * profile().m * t * (1.0 + 1e-9));
    }
}

#[test]
fn doubling_time_nodes_leaves_d0_unchanged() {
    let solver = &picard().solver;
    let mut cfg = *solver.config();
    cfg.duhamel_nodes *= 2;
    let fine = HeatSolver::new(&cfg, profile(), solver.epsilon(), solver.t_max()).unwrap();
    let (a, _) = solver.duhamel(&solver.zero()).unwrap();
    let (b, _) = fine.duhamel(&fine.zero()).unwrap();
    let worst = a.values.iter().flatten().zip(b.values.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < cfg.picard_tol / 10.0, "{worst}");
}

#[test]
fn correction_term_is_lipschitz_with_time_factor() {
    let solver = &picard().solver;
    let bump = |h: f64| -> Vec<Vec<f64>> {
        solver.times().iter().map(|&t| solver.grid().r().iter().map(|r| h * ell(t).powf(-0.5) * (-r * r).exp()).collect()).collect()
    };
    let (_, e1) = solver.duhamel(&bump(0.3)).unwrap();
    let (_, e2) = solver.duhamel(&bump(-0.3)).unwrap();
    let lip = profile().m
        * (0..=4000).map(|i| {
            let u = i as f64 * 5e-4;
            (chi(u) + u * chi_prime(u)).abs()
        })
        .fold(0.0, f64::max);
    for (k, &t) in solver.times().iter().enumerate() {
        let dv = 0.6 * ell(t).powf(-0.5);
        let de = e1.values[k].iter().zip(&e2.values[k]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(de <= t * lip * dv * (1.0 + 1e-9) + 1e-300, "t={t}");
    }
}

#[test]
fn picard_converges_geometrically_inside_the_ball() {
    let d = &picard().diagnostics;
    assert!(d.contraction_bound < PICARD_LIMIT);
    assert!(d.iterations <= 20 && d.geometric);
    assert!(d.fixed_point_defect < HeatConfig::default().picard_tol);
    // first iterate is D[0] − E[0]
    assert!(d.history[0].weighted_norm <= d.contraction_bound);
    for h in &d.history[1..] {
        let q = h.ratio.unwrap();
        assert!(q > 0.0 && q <= d.contraction_bound, "{q}");
    }
    assert!(d.norm_half <= 1.0);
    assert!(d.norm_three_halves.is_finite() && d.norm_three_halves < 5.0);
    assert!(d.e_bound_ratio <= 1.0);
}

#[test]
fn correction_is_small_in_the_strong_weight() {
    let sol = picard();
    let ks = sol.solver.eval_indices();
    let c: Vec<f64> = ks.iter().map(|&k| sol.v.sup_norm(k) * ell(sol.v.times[k]).powf(1.5)).collect();
    assert!(spread(c.iter().copied()) < 2.0, "{c:?}");
}

#[test]
fn both_solutions_satisfy_the_duhamel_identity() {
    let rep = report();
    assert!(rep.residuals_pass(), "{:?} {:?}", rep.regular_residuals, rep.stationary_residuals);
    assert_eq!(rep.regular_residuals.len(), 4);
    assert_eq!(rep.stationary_residuals.len(), 4);
    // continuity at t → 0
    let sol = picard();
    let k = sol.solver.eval_indices()[0];
    assert!(sol.residual(k, 2.0) < 10.0 * HeatConfig::default().picard_tol);
}

#[test]
fn regular_and_singular_solutions_separate() {
    let rep = report();
    assert!(rep.separated && rep.separation > rep.separation_threshold);
    assert!(rep.slices.iter().all(|s| s.distance_l2 > 0.0 && s.distance_l4 > 0.0));
    assert!(rep.slices.iter().all(|s| s.sup_regular.is_finite()));
    assert!(rep.ratio_window_ok, "{:?}", rep.slices.iter().map(|s| s.ratio).collect::<Vec<_>>());
    for d in &rep.singular_divergence {
        assert!((d.ratio - 1.0).abs() < 0.05, "{d:?}");
    }
}

#[test]
fn integral_formula_constants_are_stable() {
    let eps = validity_scale(profile()).unwrap();
    for &alpha in &[1.0, 1.5] {
        let samples: Vec<_> =
            [1e-12, 1e-9, 1e-6, 1e-4].iter().map(|&t| integral_formula(t, alpha, eps, 1e-8).unwrap()).collect();
        let sing: Vec<f64> = samples.iter().map(|s| s.c_singular).collect();
        let bnd: Vec<f64> = samples.iter().map(|s| s.c_bounded).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ms, mb) = (mean(&sing), mean(&bnd));
        assert!(sing.iter().all(|c| (c / ms - 1.0).abs() <= 0.2), "alpha={alpha} {sing:?}");
        assert!(bnd.iter().all(|c| (c / mb - 1.0).abs() <= 0.2), "alpha={alpha} {bnd:?}");
    }
}

#[test]
fn horizon_at_or_beyond_epsilon_squared_is_rejected() {
    let eps = validity_scale(profile()).unwrap();
    let cfg = HeatConfig { t_max: Some(eps * eps * 1.01), ..Default::default() };
    assert!(matches!(cfg.horizon(eps), Err(Error::Config(_))));
    assert!(matches!(
        HeatSolver::new(&HeatConfig::default(), profile(), eps, eps * eps),
        Err(Error::Config(_))
    ));
    let ok = HeatConfig::default().horizon(eps).unwrap();
    assert!(ok <= 1e-4 && ok < eps * eps / 9.0);
}
