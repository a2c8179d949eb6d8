//! The cutoff χ, the nonlinearity family f_m(s) = s(e^{s²}−1) − mχ(s)s,
//! its potential F_m and the superquadratic gap G_m = u f_m − 2F_m.

use crate::error::{Error, Result};
use crate::numerics::exp_rem2;
use serde::{Deserialize, Serialize};

/// Largest argument of `exp` that stays finite.
pub const EXP_LIMIT: f64 = 709.0;

/// ∫₀² χ(s) s ds for the quintic bridge.
pub const CHI_MOMENT_TOTAL: f64 = 8.0 / 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub inner_edge: f64,
    pub outer_edge: f64,
    /// Degree of the smoothstep polynomial bridging the two edges.
    pub bridge_degree: u32,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec { inner_edge: 1.0, outer_edge: 2.0, bridge_degree: 5 }
    }
}

fn smoothstep(x: f64) -> f64 {
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

/// χ(t): 1 on |t| ≤ 1, 0 on |t| ≥ 2, quintic smoothstep in between.
pub fn chi(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        smoothstep(2.0 - a)
    }
}

pub fn chi_prime(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 || a >= 2.0 {
        return 0.0;
    }
    let x = 2.0 - a;
    -30.0 * x * x * (1.0 - x) * (1.0 - x) * t.signum()
}

/// ∫₀^{|u|} χ(s) s ds in closed form.
pub fn chi_moment(u: f64) -> f64 {
    let a = u.abs();
    if a <= 1.0 {
        0.5 * a * a
    } else if a >= 2.0 {
        CHI_MOMENT_TOTAL
    } else {
        // ∫ smoothstep(x)(2−x) dx = −(6/7)x⁷ + (9/2)x⁶ − 8x⁵ + 5x⁴
        let p = |x: f64| x.powi(4) * (5.0 + x * (-8.0 + x * (4.5 - x * 6.0 / 7.0)));
        0.5 + p(1.0) - p(2.0 - a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub m: f64,
    pub cutoff: CutoffSpec,
}

impl Nonlinearity {
    pub fn new(m: f64) -> Self {
        assert!(m >= 0.0, "mass parameter must be non-negative");
        Nonlinearity { m, cutoff: CutoffSpec::default() }
    }

    /// The pure exponential member f₀.
    pub fn pure() -> Self {
        Nonlinearity::new(0.0)
    }

    /// f_m(s).
    pub fn value(&self, s: f64) -> Result<f64> {
        let s2 = s * s;
        if s2 > EXP_LIMIT {
            return Err(Error::Overflow(s));
        }
        Ok(s * s2.exp_m1() - self.m * chi(s) * s)
    }

    /// f_m(s) without the overflow check; infinite past the exponent range.
    pub fn value_unchecked(&self, s: f64) -> f64 {
        s * (s * s).exp_m1() - self.m * chi(s) * s
    }

    /// F_m(u) = (e^{u²}−1−u²)/2 − m∫₀ᵘχ(s)s ds.
    pub fn potential(&self, u: f64) -> Result<f64> {
        let u2 = u * u;
        if u2 > EXP_LIMIT {
            return Err(Error::Overflow(u));
        }
        Ok(0.5 * exp_rem2(u2) - self.m * chi_moment(u))
    }

    /// G_m(u) = u f_m(u) − 2F_m(u).
    pub fn superquadratic_gap(&self, u: f64) -> Result<f64> {
        Ok(u * self.value(u)? - 2.0 * self.potential(u)?)
    }

    /// G_m through Σ_{k≥2} (k−1)/k! u^{2k} + 2m∫₀ᵘ(χ(s)−χ(u))s ds.
    pub fn superquadratic_gap_series(&self, u: f64) -> Result<f64> {
        let x = u * u;
        if x > EXP_LIMIT {
            return Err(Error::Overflow(u));
        }
        let mut term = x; // x^k / k! at k = 1
        let mut sum = 0.0;
        let mut k = 1.0;
        loop {
            k += 1.0;
            term *= x / k;
            let add = (k - 1.0) * term;
            sum += add;
            if add <= 1e-18 * sum && k > x {
                break;
            }
        }
        Ok(sum + 2.0 * self.m * (chi_moment(u) - 0.5 * chi(u) * x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn chi_examples() {
        assert_eq!(chi(0.5), 1.0);
        assert_eq!(chi(3.0), 0.0);
        // Midpoint of the bridge: smoothstep(1/2) = 1/2.
        assert_eq!(chi(1.5), 0.5);
        assert_eq!(chi(-1.5), 0.5);
    }

    #[test]
    fn chi_derivative_matches_finite_difference() {
        for &t in &[1.1, 1.37, 1.5, 1.93, -1.2] {
            let h = 1e-6;
            let fd = (chi(t + h) - chi(t - h)) / (2.0 * h);
            assert_relative_eq!(chi_prime(t), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn moment_matches_quadrature() {
        use crate::numerics::gauss::GaussRule;
        let g = GaussRule::new(30);
        for &u in &[0.4f64, 1.0, 1.3, 1.75, 2.0, 5.0] {
            let q = g.integrate(0.0, u.min(1.0), |s| s) + if u > 1.0 { g.integrate(1.0, u.min(2.0), |s| chi(s) * s) } else { 0.0 };
            assert_relative_eq!(chi_moment(u), q, epsilon = 1e-14);
        }
        assert_relative_eq!(chi_moment(2.0), 8.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn value_examples() {
        let n = Nonlinearity::new(1.7);
        assert_eq!(n.value(0.0).unwrap(), 0.0);
        assert_relative_eq!(n.value(2.0).unwrap(), 2.0 * (4f64.exp() - 1.0), max_relative = 1e-15);
        let s = 1e-4;
        assert_relative_eq!(n.value(s).unwrap() / (n.m * s), -1.0, max_relative = 1e-6);
        assert!(matches!(n.value(30.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn potential_examples() {
        let m = 0.8;
        let n = Nonlinearity::new(m);
        assert_eq!(n.potential(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            n.potential(2.0).unwrap(),
            (4f64.exp() - 5.0) / 2.0 - m * CHI_MOMENT_TOTAL,
            max_relative = 1e-14
        );
        let h = 1e-5;
        let fd = (n.potential(1.3 + h).unwrap() - n.potential(1.3 - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd, n.value(1.3).unwrap(), max_relative = 1e-8);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(Nonlinearity::new(2.0).superquadratic_gap(0.0).unwrap(), 0.0);
        let g = Nonlinearity::pure().superquadratic_gap(0.1).unwrap();
        assert_relative_eq!(g, 5.0e-5, max_relative = 0.02);
        let n = Nonlinearity::new(3.0);
        assert_relative_eq!(
            n.superquadratic_gap(1.7).unwrap(),
            n.superquadratic_gap_series(1.7).unwrap(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn asymptotic_limits() {
        let n = Nonlinearity::new(0.9);
        let u: f64 = 6.0;
        assert_relative_eq!(n.value(u).unwrap() / ((u * u).exp_m1() * u), 1.0, max_relative = 1e-6);
        assert_relative_eq!(n.value(1e-4).unwrap() / (0.9 * 1e-4), -1.0, max_relative = 1e-6);
    }

    #[test]
    fn chi_is_monotone_on_dense_sample() {
        for i in 0..=40_000 {
            let t = -4.0 + 8.0 * i as f64 / 40_000.0;
            let c = chi(t);
            assert!((0.0..=1.0).contains(&c));
            assert!(t * chi_prime(t) <= 0.0);
            assert_eq!(c, chi(-t));
        }
    }

    proptest! {
        #[test]
        fn value_is_odd(s in -20.0f64..20.0, m in 0.0f64..5.0) {
            let n = Nonlinearity::new(m);
            prop_assert_eq!(n.value(-s).unwrap(), -n.value(s).unwrap());
        }

        #[test]
        fn potential_derivative_is_value(u in 0.01f64..3.0, m in 0.0f64..5.0) {
            let n = Nonlinearity::new(m);
            let h = 1e-5 * u.max(0.1);
            let fd = (n.potential(u + h).unwrap() - n.potential(u - h).unwrap()) / (2.0 * h);
            let f = n.value(u).unwrap();
            // central-difference truncation h²F‴/6 is ~1e-9 on the cutoff bridge
            prop_assert!((fd - f).abs() <= 1e-8 * f.abs().max(1.0), "u={} fd={} f={}", u, fd, f);
        }

        #[test]
        fn gap_paths_agree(u in 0.05f64..3.0, m in 0.0f64..5.0) {
            let n = Nonlinearity::new(m);
            let a = n.superquadratic_gap(u).unwrap();
            let b = n.superquadratic_gap_series(u).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-12), "{} vs {}", a, b);
        }

        #[test]
        fn outside_cutoff_is_pure(s in 2.0f64..20.0, m in 0.0f64..5.0) {
            let n = Nonlinearity::new(m);
            prop_assert_eq!(n.value(s).unwrap(), s * (s * s).exp_m1());
        }
    }

    #[test]
    fn gap_is_positive_on_log_grid() {
        // Masses bracketing the critical value of the default cutoff.
        for &m in &[0.0, 0.493, 0.986, 1.972] {
            let n = Nonlinearity::new(m);
            for i in 0..=400 {
                let u = 1e-4 * (3.0f64 / 1e-4).powf(i as f64 / 400.0);
                assert!(n.superquadratic_gap(u).unwrap() > 0.0, "m={m} u={u}");
                assert!(n.superquadratic_gap(-u).unwrap() > 0.0);
            }
        }
    }
}
