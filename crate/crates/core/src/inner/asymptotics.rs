//! Closed-form pieces of the correction equation η″ + qη + F(ρ, η) = 0,
//! q = 1/(2ρ) + 3/(16ρ²), written in the Emden–Fowler variable ρ = 2|log r|.

use crate::error::{Error, Result};
use crate::numerics::exp_rem2;

/// Leading profile (ρ − 2 log ρ)^{1/2}.
pub fn phi_leading(rho: f64) -> Result<f64> {
    let rad = rho - 2.0 * rho.ln();
    if !(rho > 0.0 && rad > 0.0 && rad.is_finite()) {
        return Err(Error::Domain(format!("rho - 2 log rho <= 0 at rho = {rho}")));
    }
    Ok(rad.sqrt())
}

/// dφ/dρ = (1 − 2/ρ)/(2φ).
pub fn phi_leading_d(rho: f64) -> Result<f64> {
    Ok((1.0 - 2.0 / rho) / (2.0 * phi_leading(rho)?))
}

/// d²φ/dρ² = φ⁻¹ρ⁻² − φ⁻³(1 − 2/ρ)²/4.
pub fn phi_leading_dd(rho: f64) -> Result<f64> {
    let p = phi_leading(rho)?;
    let b = 1.0 - 2.0 / rho;
    Ok(1.0 / (p * rho * rho) - b * b / (4.0 * p * p * p))
}

/// Potential of the linear comparison equation.
pub fn comparison_potential(rho: f64) -> f64 {
    1.0 / (2.0 * rho) + 3.0 / (16.0 * rho * rho)
}

/// √(1 − 2 log ρ/ρ) − 1, accurate when the log term is small.
fn sqrt_factor_minus_one(rho: f64) -> f64 {
    let e = -2.0 * rho.ln() / rho;
    e / ((1.0 + e).sqrt() + 1.0)
}

/// The forcing f(ρ) left over when φ is inserted into the equation.
pub fn forcing(rho: f64) -> Result<f64> {
    if rho < 2.0 {
        return Err(Error::Domain(format!("forcing needs rho >= 2, got {rho}")));
    }
    let p = phi_leading(rho)?;
    let p3 = 1.0 / (p * p * p);
    let r32 = rho.powf(-1.5);
    Ok(-0.25 * phi3_gap(rho, p3, r32)
        + p3 * (1.0 / rho - 1.0 / (rho * rho))
        + 1.0 / (p * rho * rho)
        + 0.25 * r32 * sqrt_factor_minus_one(rho))
}

/// φ⁻³ − ρ^{-3/2} without cancellation: ρ^{-3/2}((1−e)^{-3/2} − 1), e = 2 log ρ/ρ.
fn phi3_gap(rho: f64, p3: f64, r32: f64) -> f64 {
    let e = 2.0 * rho.ln() / rho;
    if e < 1e-3 {
        // (1−e)^{-3/2} − 1 = Σ_k c_k e^k with c_k = c_{k−1}(k + 1/2)/k.
        let mut c = 1.5;
        let mut pw = e;
        let mut sum = 0.0f64;
        let mut k = 1.0;
        while (c * pw).abs() > 1e-20 * sum.abs().max(1e-300) {
            sum += c * pw;
            k += 1.0;
            c *= (k + 0.5) / k;
            pw *= e;
        }
        r32 * sum
    } else {
        p3 - r32
    }
}

/// φ(ρ)⁻³ − ρ^{-3/2}, the first bracket of the forcing.
pub fn forcing_head_gap(rho: f64) -> Result<f64> {
    let p = phi_leading(rho)?;
    Ok(phi3_gap(rho, 1.0 / (p * p * p), rho.powf(-1.5)))
}

/// The seven nonlinear remainder terms at (ρ, η). The last entry is the
/// −3η/(16ρ²) term that compensates the extra potential; it is zeroed when
/// `include_last` is false.
pub fn g_terms(rho: f64, eta: f64, include_last: bool) -> Result<[f64; 7]> {
    let p = phi_leading(rho)?;
    let sq = rho.sqrt();
    let r32 = 1.0 / (rho * sq);
    let r2 = 1.0 / (rho * rho);
    let d = 2.0 * p * eta + eta * eta;
    let sqm1 = sqrt_factor_minus_one(rho);
    // φ − √ρ = −2 log ρ/(φ + √ρ)
    let p_minus_sq = -2.0 * rho.ln() / (p + sq);
    Ok([
        0.25 * r2 * eta,
        0.5 * r32 * p_minus_sq * eta,
        0.25 * r32 * eta * eta,
        0.25 * d * r32 * sqm1,
        0.25 * r2 * d * eta,
        0.25 * r2 * exp_rem2(d) * (sq * (1.0 + sqm1) + eta),
        if include_last { -3.0 * eta / (16.0 * rho * rho) } else { 0.0 },
    ])
}

/// Full right-hand side F(ρ, η) = f + Σg − e^{−ρ}(φ + η)/4.
pub fn total_forcing(rho: f64, eta: f64) -> Result<f64> {
    let g: f64 = g_terms(rho, eta, true)?.iter().sum();
    Ok(forcing(rho)? + g - 0.25 * (-rho).exp() * (phi_leading(rho)? + eta))
}

/// (ρs)^{1/4} sin(√(2ρ) − √(2s)).
pub fn kernel(rho: f64, s: f64) -> f64 {
    (rho * s).powf(0.25) * ((2.0 * rho).sqrt() - (2.0 * s).sqrt()).sin()
}

/// Normalisation turning `kernel` into the Green's function of the
/// comparison equation: the fundamental pair below has Wronskian −1/√2.
pub const KERNEL_SCALE: f64 = std::f64::consts::SQRT_2;

/// ρ^{1/4} sin √(2ρ).
pub fn fundamental_sin(rho: f64) -> f64 {
    rho.powf(0.25) * (2.0 * rho).sqrt().sin()
}

/// ρ^{1/4} cos √(2ρ).
pub fn fundamental_cos(rho: f64) -> f64 {
    rho.powf(0.25) * (2.0 * rho).sqrt().cos()
}

/// Residual of the Emden–Fowler equation −y″ = (e^{−ρ}/4) y (e^{y²} − 1).
pub fn emden_fowler_residual(rho: f64, y: f64, ypp: f64) -> f64 {
    let rhs = 0.25 * y * ((y * y - rho).exp() - (-rho).exp());
    -ypp - rhs
}
