//! Independent checks of the asymptotic estimates used by the fixed-point argument.

use super::asymptotics::{forcing, g_terms, phi_leading};
use super::solver::oscillatory_tail;
use crate::error::Result;
use crate::numerics::gauss::GaussRule;
use std::f64::consts::{FRAC_PI_2, SQRT_2};

/// Integral of sin(√(2ρ) − √(2s)) s^{−σ} w(s) over s ≥ ρ together
/// with its leading-order prediction.
#[derive(Debug, Clone, Copy)]
pub struct SinIntegral {
    pub value: f64,
    pub leading: f64,
}

impl SinIntegral {
    pub fn ratio(&self) -> f64 {
        self.value / self.leading
    }
}

fn sin_integral<W: Fn(f64) -> f64>(sigma: f64, rho: f64, w: W) -> Result<f64> {
    let u0 = (2.0 * rho).sqrt();
    let h = |u: f64| {
        let s = 0.5 * u * u;
        s.powf(-sigma) * w(s) * u
    };
    let rule = GaussRule::new(20);
    let panels = 400 + (4.0 * u0 / FRAC_PI_2) as usize;
    let (mut c, mut s) = (0.0, 0.0);
    for p in 0..panels {
        let a = u0 + p as f64 * FRAC_PI_2;
        for (x, wt) in rule.mapped(a, a + FRAC_PI_2) {
            let v = h(x) * wt;
            c += v * x.cos();
            s += v * x.sin();
        }
    }
    let tail = oscillatory_tail(|u| Ok(h(u)), u0 + panels as f64 * FRAC_PI_2)?;
    c += tail.cos;
    s += tail.sin;
    let (sn, cs) = u0.sin_cos();
    Ok(sn * c - cs * s)
}

/// Log-weighted and plain versions of the sine-kernel integral.
pub fn lem_sin(sigma: f64, rho: f64) -> Result<(SinIntegral, SinIntegral)> {
    let lead = -SQRT_2 * rho.powf(0.5 - sigma);
    let weighted = SinIntegral { value: sin_integral(sigma, rho, f64::ln)?, leading: lead * rho.ln() };
    let plain = SinIntegral { value: sin_integral(sigma, rho, |_| 1.0)?, leading: lead };
    Ok((weighted, plain))
}

/// ρ^{5/2}/log ρ · f(ρ).
pub fn forcing_scaled(rho: f64) -> Result<f64> {
    Ok(forcing(rho)? * rho.powf(2.5) / rho.ln())
}

/// Expansion of the forcing in powers of 1/ρ with log ρ kept as a symbol:
/// ρ^{−5/2}[(2 − L) + ρ^{−1}(−2L² + 4L − 1)].
pub fn forcing_expansion(rho: f64) -> f64 {
    let l = rho.ln();
    rho.powf(-2.5) * ((2.0 - l) + (-2.0 * l * l + 4.0 * l - 1.0) / rho)
}

/// The four elementary terms of the forcing estimate, each divided by its
/// predicted leading order:
/// (φ^{−3} − ρ^{−3/2}) / (3ρ^{−5/2} log ρ),
/// |ρ^{−3/2}((1 − 2 log ρ/ρ)^{1/2} − 1)| / (ρ^{−5/2} log ρ),
/// φ^{−1}ρ^{−2} / ρ^{−5/2} and φ^{−3}(ρ^{−1} − ρ^{−2}) / ρ^{−5/2}.
pub fn estimate_f_ratios(rho: f64) -> Result<[f64; 4]> {
    let phi = phi_leading(rho)?;
    let l = rho.ln();
    let x = 2.0 * l / rho;
    // (1 − x)^{−3/2} − 1 and (1 − x)^{1/2} − 1 without cancellation
    let a = (-1.5 * (-x).ln_1p()).exp_m1();
    let b = (0.5 * (-x).ln_1p()).exp_m1();
    let lead = rho.powf(-2.5);
    Ok([
        rho.powf(-1.5) * a / (3.0 * lead * l),
        (rho.powf(-1.5) * b).abs() / (lead * l),
        1.0 / (phi * rho * rho) / lead,
        phi.powi(-3) * (1.0 / rho - 1.0 / (rho * rho)) / lead,
    ])
}

/// |g_i(ρ,η₁) − g_i(ρ,η₂)| / |η₁ − η₂| scaled by ρ²/log ρ.
pub fn g_lipschitz_scaled(rho: f64, eta1: f64, eta2: f64) -> Result<[f64; 7]> {
    let a = g_terms(rho, eta1, true)?;
    let b = g_terms(rho, eta2, true)?;
    let scale = rho * rho / rho.ln() / (eta1 - eta2).abs();
    let mut out = [0.0; 7];
    for i in 0..7 {
        out[i] = (a[i] - b[i]).abs() * scale;
    }
    Ok(out)
}

/// |Σ g_i(ρ, η)| scaled by ρ^{7/2}/log² ρ.
pub fn g_sum_scaled(rho: f64, eta: f64) -> Result<f64> {
    let s: f64 = g_terms(rho, eta, true)?.iter().sum();
    let l = rho.ln();
    Ok(s.abs() * rho.powf(3.5) / (l * l))
}
