//! Validity scale, envelopes, the integral-formula oracle and the radial
//! monotonicity check.

use super::grid::RadialGrid;
use super::kernel::{heat_apply, FnSource, RadialSource};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_scalar, QuadOptions};
use crate::shooting::SolitonProfile;
use serde::{Deserialize, Serialize};

/// Largest admissible ε; keeps |log ε²| above the envelope exponents so that
/// F₀ and F₀′ stay decreasing in t + r².
pub const EPSILON_CAP: f64 = 0.3;

/// Largest r ≤ EPSILON_CAP such that φ*(s)² ≥ ρ − 2 log ρ − 5 (ρ = 2|log s|)
/// for every s in (0, r]; scanned on a log grid and refined by bisection.
pub fn validity_scale(profile: &SolitonProfile) -> Result<f64> {
    let holds = |r: f64| -> Result<bool> {
        let rho = -2.0 * r.ln();
        let u = profile.value(r)?;
        Ok(u * u >= rho - 2.0 * rho.ln() - 5.0)
    };
    let (lo, hi) = (1e-300f64.ln(), EPSILON_CAP.ln());
    let steps = 4000;
    let mut prev = lo;
    for k in 0..=steps {
        let x = lo + (hi - lo) * k as f64 / steps as f64;
        if !holds(x.exp())? {
            if k == 0 {
                return Err(Error::Profile("asymptotic regime not reached at r = 1e-300".into()));
            }
            let (mut a, mut b) = (prev, x);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if holds(m.exp())? {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(a.exp());
        }
        prev = x;
    }
    Ok(EPSILON_CAP)
}

/// ℓ = |log t|.
pub fn ell(t: f64) -> f64 {
    t.ln().abs()
}

/// Closed-form upper envelopes for u₀e^{u₀²} and u₀²e^{u₀²}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeOracle {
    pub epsilon: f64,
}

impl EnvelopeOracle {
    fn parts(&self, t: f64, r: f64) -> (f64, f64) {
        let q = t + r * r;
        let e2 = self.epsilon * self.epsilon;
        (1.0 / q + 1.0 / e2, q.min(e2).ln().abs())
    }

    /// F₀ = [(t+r²)^{−1} + ε^{−2}] |log min(t+r², ε²)|^{−3/2}.
    pub fn f0(&self, t: f64, r: f64) -> f64 {
        let (a, l) = self.parts(t, r);
        a * l.powf(-1.5)
    }

    /// F₀′ = [(t+r²)^{−1} + ε^{−2}] |log min(t+r², ε²)|^{−1}.
    pub fn f0_prime(&self, t: f64, r: f64) -> f64 {
        let (a, l) = self.parts(t, r);
        a / l
    }
}

/// Measured constants of the integral formula at one (t, α).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralFormulaSample {
    pub t: f64,
    pub alpha: f64,
    /// ℓ^α ∫₀ᵗ e^{(t−s)Δ}(s+r²)^{−1}|log min(s+r², ε²)|^{−α} ds at r = 0.
    pub c_singular: f64,
    /// ℓ^α t^{−1} ∫₀ᵗ e^{(t−s)Δ}|log min(s+r², ε²)|^{−α} ds at r = 0.
    pub c_bounded: f64,
}

/// Evaluates both integrals at the origin, where radially decreasing data
/// have their sup, with the heat kernel of this module inside an outer
/// quadrature in log s.
pub fn integral_formula(t: f64, alpha: f64, epsilon: f64, rel_tol: f64) -> Result<IntegralFormulaSample> {
    let e2 = epsilon * epsilon;
    if !(t > 0.0 && t < e2) {
        return Err(Error::Domain(format!("need 0 < t < ε², got t = {t}")));
    }
    let lg = |q: f64| q.min(e2).ln().abs().powf(-alpha);
    let outer = |singular: bool| -> Result<f64> {
        let mut err = None;
        let val = integrate_scalar(
            |x: f64| {
                let s = t * x.exp();
                let src = FnSource(move |y: f64| {
                    let q = s + y * y;
                    if singular {
                        lg(q) / q
                    } else {
                        lg(q)
                    }
                });
                match heat_apply(t - s, &src, 0.0, 0.1 * rel_tol) {
                    Ok(v) => s * v[0],
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            },
            -60.0,
            0.0,
            QuadOptions::rel(rel_tol),
        )?;
        err.map_or(Ok(val), Err)
    };
    let w = ell(t).powf(alpha);
    Ok(IntegralFormulaSample { t, alpha, c_singular: outer(true)? * w, c_bounded: outer(false)? * w / t })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub passed: bool,
    /// (t, r_i, r_{i+1}, increase) of the worst violation.
    pub worst: Option<(f64, f64, f64, f64)>,
    pub sup_at_origin: bool,
    pub slices: usize,
}

/// Checks that each slice is non-increasing in r up to 10⁻¹⁰ of the local
/// value scale, and that its sup is the value at the smallest radius.
pub fn check_slices(r: &[f64], times: &[f64], slices: &[Vec<f64>]) -> MonotonicityReport {
    let mut worst: Option<(f64, f64, f64, f64)> = None;
    let mut sup_at_origin = true;
    for (t, vals) in times.iter().zip(slices) {
        for i in 0..vals.len() - 1 {
            let inc = vals[i + 1] - vals[i];
            let slack = 1e-10 * vals[i].abs().max(vals[i + 1].abs()).max(1e-300);
            if inc > slack && worst.map_or(true, |w| inc > w.3) {
                worst = Some((*t, r[i], r[i + 1], inc));
            }
        }
        let sup = vals.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        if sup > vals[0] * (1.0 + 1e-10) {
            sup_at_origin = false;
        }
    }
    MonotonicityReport { passed: worst.is_none() && sup_at_origin, worst, sup_at_origin, slices: slices.len() }
}

/// Applies the heat flow to `src` at each time and checks every output slice.
pub fn monotonicity_check<S: RadialSource<1>>(
    src: &S,
    times: &[f64],
    grid: &RadialGrid,
    rel_tol: f64,
) -> Result<MonotonicityReport> {
    let mut slices = Vec::with_capacity(times.len());
    for &t in times {
        let vals = grid.r().iter().map(|&r| heat_apply(t, src, r, rel_tol).map(|v| v[0])).collect::<Result<Vec<_>>>()?;
        slices.push(vals);
    }
    Ok(check_slices(grid.r(), times, &slices))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelopes_decrease_in_the_parabolic_distance() {
        let env = EnvelopeOracle { epsilon: 0.2 };
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for k in 0..200 {
            let q = 1e-30 * 10f64.powf(k as f64 * 0.15);
            let cur = (env.f0(q, 0.0), env.f0_prime(q, 0.0));
            assert!(cur.0 > 0.0 && cur.1 > 0.0);
            assert!(cur.0 < prev.0 && cur.1 < prev.1, "q={q}");
            prev = cur;
        }
    }

    #[test]
    fn integral_formula_matches_origin_substitution() {
        // at r = 0, e^{τΔ}h(0) = ∫₀^∞ e^{−x} h(√(4τx)) dx
        let (t, eps, alpha) = (1e-6, 0.2, 1.5);
        let got = integral_formula(t, alpha, eps, 1e-9).unwrap();
        let e2: f64 = eps * eps;
        let h = |q: f64| q.min(e2).ln().abs().powf(-alpha) / q;
        let inner = |s: f64| {
            integrate_scalar(
                |y: f64| {
                    let x = y.exp();
                    x * (-x).exp() * h(s + 4.0 * (t - s) * x)
                },
                (s / (4.0 * t)).ln() - 40.0,
                5.0,
                QuadOptions::rel(1e-11),
            )
            .unwrap()
        };
        let outer =
            integrate_scalar(|x: f64| t * x.exp() * inner(t * x.exp()), -60.0, 0.0, QuadOptions::rel(1e-9)).unwrap();
        let want = outer * ell(t).powf(alpha);
        assert!((got.c_singular / want - 1.0).abs() < 1e-6, "{} {}", got.c_singular, want);
    }

    #[test]
    fn increasing_input_fails_the_check() {
        let grid = RadialGrid::log_spaced(1e-6, 10.0, 1, 8).unwrap();
        let up = FnSource(|s: f64| s.min(3.0));
        let rep = monotonicity_check(&up, &[1e-3], &grid, 1e-10).unwrap();
        assert!(!rep.passed && rep.worst.is_some());
        let step = FnSource(|s: f64| if s < 1.0 { 1.0 } else { 0.0 });
        let rep = monotonicity_check(&step, &[1e-6], &grid, 1e-10).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}
