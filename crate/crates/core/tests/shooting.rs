use expheat_core::inner::{inner_profile, solve_eta, EtaConfig, EtaSolution};
use expheat_core::nonlinearity::Nonlinearity;
use expheat_core::numerics::ode::OdeOptions;
use expheat_core::shooting::mstar::classify_persistent;
use expheat_core::shooting::*;
use std::sync::OnceLock;

struct Fixture {
    sol: EtaSolution,
    points: MatchPoints,
    mstar: MstarResult,
    profile: SolitonProfile,
}

fn fx() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let sol = solve_eta(&EtaConfig::default()).unwrap();
        let cfg = ShootConfig::default();
        let points = find_r_and_rinf(&sol, cfg.ode()).unwrap();
        let mstar = find_mstar(&points, &cfg).unwrap();
        let profile = assemble_phistar(&sol, &points, &mstar, &cfg, &ProfileConfig::default()).unwrap();
        Fixture { sol, points, mstar, profile }
    })
}

fn loose() -> OdeOptions {
    OdeOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() }
}

#[test]
fn match_radius_and_first_zero() {
    let p = fx().points;
    assert!(p.big_r < p.r_inf);
    assert!(p.max_du < 0.0, "u must decrease up to its zero");
    // reference fixtures
    assert!((p.big_r / 0.019_996_864 - 1.0).abs() < 1e-6, "{}", p.big_r);
    assert!((p.r_inf / 1.211_442_81 - 1.0).abs() < 1e-6, "{}", p.r_inf);
    assert!((p.du_at_big_r / -18.771_503 - 1.0).abs() < 1e-6, "{}", p.du_at_big_r);
}

#[test]
fn two_is_crossed_before_zero() {
    let f = fx();
    let start = match_inner(&f.sol, f.sol.r_edge()).unwrap();
    let opts = RadialOptions { stop_on: vec![EventKind::Zero], ..Default::default() };
    let run = integrate_radial(&Nonlinearity::pure(), start, 100.0, &opts).unwrap();
    let kinds: Vec<EventKind> = run.events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, vec![EventKind::Two, EventKind::Zero]);
    // no interior turning point, so the local-minimum exclusion holds vacuously;
    // check it on any turn that would have fired
    for e in run.events.iter().filter(|e| e.kind == EventKind::Turn && e.state.u > 0.0) {
        assert!(-Nonlinearity::pure().value(e.state.u).unwrap() < 0.0);
    }
}

#[test]
fn event_radii_stable_under_halved_tolerances() {
    let f = fx();
    let base = OdeOptions::default();
    let half = OdeOptions { rtol: base.rtol / 2.0, atol: base.atol / 2.0, ..base };
    let q = find_r_and_rinf(&f.sol, half).unwrap();
    assert!((q.big_r / f.points.big_r - 1.0).abs() < 1e-8);
    assert!((q.r_inf / f.points.r_inf - 1.0).abs() < 1e-8);
}

#[test]
fn match_radii_stable_across_configurations() {
    let sol = solve_eta(&EtaConfig { lambda: 150.0, ..Default::default() }).unwrap();
    let q = find_r_and_rinf(&sol, loose()).unwrap();
    let p = fx().points;
    assert!((q.big_r / p.big_r - 1.0).abs() < 5e-4);
    assert!((q.r_inf / p.r_inf - 1.0).abs() < 5e-4);
}

#[test]
fn handoff_state_is_the_inner_profile() {
    let f = fx();
    let r = f.sol.r_edge();
    let s = match_inner(&f.sol, r).unwrap();
    assert_eq!((s.u, s.du), inner_profile(r, &f.sol).unwrap());
    assert!(match_inner(&f.sol, 1e-3).is_err());
}

#[test]
fn handoff_radius_does_not_matter() {
    let f = fx();
    let r0 = f.sol.r_edge();
    let n = Nonlinearity::pure();
    let opts = RadialOptions { watch: vec![], ..Default::default() };
    let a = integrate_radial(&n, match_inner(&f.sol, r0).unwrap(), 0.5, &opts).unwrap().end;
    let b = integrate_radial(&n, match_inner(&f.sol, r0 / std::f64::consts::E).unwrap(), 0.5, &opts).unwrap().end;
    assert!((a.u / b.u - 1.0).abs() < 1e-6, "{} {}", a.u, b.u);
}

#[test]
fn energy_never_increases() {
    let f = fx();
    let ic = f.points.state();
    for &m in &[0.0, 0.5, f.mstar.m_star, 2.0, 50.0] {
        let n = Nonlinearity::new(m);
        let opts = RadialOptions { watch: vec![EventKind::Zero], stop_on: vec![EventKind::Zero], ..Default::default() };
        let run = integrate_radial(&n, ic, 15.0, &opts).unwrap();
        let e0 = energy(&n, &ic).unwrap();
        assert!(run.max_energy_rise <= 1e-8 * (e0.abs() + 1.0), "m={m}: {}", run.max_energy_rise);
    }
}

#[test]
fn classification_examples() {
    let f = fx();
    let ic = f.points.state();
    match classify(&Nonlinearity::pure(), ic, 40.0, OdeOptions::default()).unwrap() {
        ShootOutcome::HasZero { first_zero } => assert!((first_zero / f.points.r_inf - 1.0).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
    let big = f.mstar.m_hi;
    assert!(energy(&Nonlinearity::new(big), &ic).unwrap() < 0.0);
    match classify(&Nonlinearity::new(big), ic, 40.0, OdeOptions::default()).unwrap() {
        ShootOutcome::StaysPositive { witness_r, .. } => assert_eq!(witness_r, ic.r),
        other => panic!("{other:?}"),
    }
}

#[test]
fn scan_is_monotone_and_bracket_is_valid() {
    let f = fx();
    let ms = &f.mstar;
    assert!(ms.non_monotone.is_empty(), "{:?}", ms.non_monotone);
    let cfg = ShootConfig::default();
    let ic = f.points.state();
    assert!(classify_persistent(ms.bracket.0, ic, &cfg).unwrap().0.has_zero());
    assert!(classify_persistent(ms.bracket.1, ic, &cfg).unwrap().0.stays_positive());
    assert!(ms.bracket.1 - ms.bracket.0 <= cfg.bracket_tol);
    assert!(ms.m_star > 0.0 && ms.m_star < ms.m_hi);
    // fixture for the default cutoff
    assert!((ms.m_star - 0.986_259_000).abs() < 1e-6, "{}", ms.m_star);
}

#[test]
fn critical_mass_stable_across_tolerances() {
    let f = fx();
    let cfg = ShootConfig { rtol: 1e-10, atol: 1e-12, ..Default::default() };
    let pts = find_r_and_rinf(&f.sol, cfg.ode()).unwrap();
    let ms = find_mstar(&pts, &cfg).unwrap();
    assert!((ms.m_star - f.mstar.m_star).abs() < 1e-6, "{} {}", ms.m_star, f.mstar.m_star);
}

#[test]
fn energy_certificate_is_sound() {
    let f = fx();
    for rec in f.mstar.history.iter() {
        if let ShootOutcome::StaysPositive { witness_r, .. } = rec.outcome {
            let n = Nonlinearity::new(rec.m);
            let ic = f.points.state();
            let opts = RadialOptions { watch: vec![EventKind::Zero], stop_on: vec![EventKind::Zero], ..Default::default() };
            let run = integrate_radial(&n, ic, (10.0 * witness_r).max(20.0), &opts).unwrap();
            assert!(run.first(EventKind::Zero).is_none(), "m={} crossed zero", rec.m);
        }
    }
}

#[test]
fn profile_shape() {
    let p = &fx().profile;
    assert!(p.grid.len() >= 2000);
    assert!((p.value(p.big_r).unwrap() - 2.0).abs() < 1e-9);
    for w in p.u.windows(2) {
        assert!(w[1] < w[0] && w[1] > 0.0);
    }
    assert!(p.du.iter().all(|&d| d < 0.0));
    let finite: Vec<f64> = p.energy.iter().copied().filter(|e| e.is_finite()).collect();
    assert!(finite.len() > 1000);
    for w in finite.windows(2) {
        assert!(w[1] <= w[0] + 1e-8 * (w[0].abs() + 1.0));
    }
    let n = p.nonlinearity();
    // the closed form cancels for tiny u; the series form is exact there
    let gap = |u: f64| if u < 0.5 { n.superquadratic_gap_series(u) } else { n.superquadratic_gap(u) };
    assert!(p.u.iter().filter(|u| u.abs() < 26.0).all(|&u| gap(u).unwrap() > 0.0));
}

#[test]
fn decay_beats_every_smaller_mass() {
    let p = &fx().profile;
    let m = 0.9 * p.m;
    for &r in &[15.0, 20.0, 30.0] {
        let (u, du) = p.eval(r).unwrap();
        assert!(du / u <= -m.sqrt(), "r={r}: {}", du / u);
    }
}

#[test]
fn glue_points_satisfy_the_equation() {
    let g = fx().profile.glue_residuals().unwrap();
    assert!(g.inner < 1e-6 && g.tail < 1e-6, "{g:?}");
}

#[test]
fn lp_norms_finite_and_converged() {
    let f = fx();
    let coarse = ProfileConfig { table_nodes: 4000, ..Default::default() };
    let other = assemble_phistar(&f.sol, &f.points, &f.mstar, &ShootConfig::default(), &coarse).unwrap();
    for &p in &[1.0, 2.0, 4.0, 8.0, 16.0] {
        let a = f.profile.lp_norm(p).unwrap();
        let b = other.lp_norm(p).unwrap();
        assert!(a.is_finite() && a > 0.0);
        assert!((a / b - 1.0).abs() < 1e-4, "p={p}: {a} {b}");
    }
    assert!(f.profile.lp_norm(0.5).is_err());
}

#[test]
fn sup_grows_like_the_singularity() {
    let p = &fx().profile;
    for &r in &[1e-100f64, 1e-200, 1e-300] {
        let ratio = p.sup_from(r).unwrap() / (-2.0 * r.ln()).sqrt();
        assert!((ratio - 1.0).abs() < 0.05, "{r}: {ratio}");
    }
}

#[test]
fn table_round_trip_and_csv() {
    let f = fx();
    let json = serde_json::to_string(&f.profile.table()).unwrap();
    let back = SolitonProfile::from_table(serde_json::from_str(&json).unwrap(), &f.sol, &ProfileConfig::default())
        .unwrap();
    for &r in &[1e-30, 0.01, 0.7, 5.0, 12.0] {
        assert_eq!(back.eval(r).unwrap(), f.profile.eval(r).unwrap());
    }
    let mut buf = Vec::new();
    f.profile.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("r,u,du,energy\n"));
    assert_eq!(text.lines().count(), f.profile.grid.len() + 1);
}
