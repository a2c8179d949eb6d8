//! Radial heat kernel on R²:
//! (e^{τΔ}φ)(r) = (1/2τ)∫₀^∞ e^{−(r−s)²/4τ}·[e^{−x}I₀(x)]_{x=rs/2τ}·φ(s) s ds.

use crate::error::Result;
use crate::numerics::bessel::i0e;
use crate::numerics::gauss::{GaussRule, HermiteRule};
use crate::numerics::quadrature::{integrate, QuadOptions};
use crate::shooting::SolitonProfile;
use std::sync::OnceLock;

/// Half-width of the Gaussian window in units of √τ; e^{−13²/4} ≈ 4e-19.
pub const WINDOW: f64 = 13.0;

/// A radial function with N components.
pub trait RadialSource<const N: usize> {
    fn at(&self, s: f64) -> Result<[f64; N]>;

    /// s²·value at s = e^{−ρ/2}. Sources singular at the origin override this
    /// with a form that survives the underflow of s.
    fn scaled_at_rho(&self, rho: f64) -> Result<[f64; N]> {
        let s = (-0.5 * rho).exp();
        Ok(self.at(s)?.map(|x| x * s * s))
    }

    /// True when the source has no structure on scales finer than √τ for
    /// the τ it is propagated with; such sources take fixed quadrature rules.
    fn smooth_on_kernel_scale(&self) -> bool {
        false
    }
}

/// Wraps a closure as a one-component source.
pub struct FnSource<F>(pub F);

impl<F: Fn(f64) -> f64> RadialSource<1> for FnSource<F> {
    fn at(&self, s: f64) -> Result<[f64; 1]> {
        Ok([(self.0)(s)])
    }
}

/// φ* at s = e^{−ρ/2}, through the inner variable once s is in the inner region.
fn profile_at_rho(p: &SolitonProfile, rho: f64) -> Result<f64> {
    if rho >= p.inner().lambda() {
        p.value_at_rho(rho)
    } else {
        p.value((-0.5 * rho).exp())
    }
}

/// (φ*, φ*² − ρ) at s = e^{−ρ/2}. In the inner region φ* = (ρ − 2 log ρ)^{1/2} + η
/// and the gap is formed from η directly, since φ*² ≈ ρ cancels.
fn profile_gap_at_rho(p: &SolitonProfile, rho: f64) -> Result<(f64, f64)> {
    if rho >= p.inner().lambda() {
        let lead = crate::inner::phi_leading(rho)?;
        let (eta, _) = p.inner().eval(rho)?;
        return Ok((lead + eta, -2.0 * rho.ln() + eta * (2.0 * lead + eta)));
    }
    let u = p.value((-0.5 * rho).exp())?;
    Ok((u, u * u - rho))
}

/// The soliton profile φ*.
pub struct ProfileSource<'a>(pub &'a SolitonProfile);

impl RadialSource<1> for ProfileSource<'_> {
    fn at(&self, s: f64) -> Result<[f64; 1]> {
        Ok([self.0.value(s)?])
    }

    fn scaled_at_rho(&self, rho: f64) -> Result<[f64; 1]> {
        Ok([profile_at_rho(self.0, rho)? * (-rho).exp()])
    }
}

/// f_m(φ*) for the profile's own mass, split as [f₀(φ*), m χ(φ*) φ*].
pub struct ProfileForcing<'a>(pub &'a SolitonProfile);

impl RadialSource<2> for ProfileForcing<'_> {
    fn at(&self, s: f64) -> Result<[f64; 2]> {
        let u = self.0.value(s)?;
        let n = self.0.nonlinearity();
        let f0 = crate::nonlinearity::Nonlinearity::pure().value(u)?;
        Ok([f0, f0 - n.value(u)?])
    }

    fn scaled_at_rho(&self, rho: f64) -> Result<[f64; 2]> {
        // φ(e^{φ²}−1)s² = φ(e^{φ²−ρ} − e^{−ρ}); the cutoff term vanishes for φ > 2
        let (u, gap) = profile_gap_at_rho(self.0, rho)?;
        let s2 = (-rho).exp();
        let f0 = u * (gap.exp() - s2);
        let n = self.0.nonlinearity();
        let lin = n.m * crate::nonlinearity::chi(u) * u * s2;
        Ok([f0, lin])
    }
}

fn options(rel_tol: f64) -> QuadOptions {
    QuadOptions { rel_tol, max_intervals: 2000, ..Default::default() }
}

/// Scaled distance r/√τ beyond which the Gauss–Hermite rule is used.
const FAR: f64 = 40.0;
/// Window of the fixed near rule, in units of √τ.
const NEAR_WINDOW: f64 = 12.0;
/// Panel width of the fixed near rule, in units of √τ.
const NEAR_PANEL: f64 = 2.0;

fn hermite() -> &'static HermiteRule {
    static R: OnceLock<HermiteRule> = OnceLock::new();
    R.get_or_init(|| HermiteRule::new(24))
}

fn legendre10() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(10))
}

fn fixed_rule<const N: usize, S: RadialSource<N> + ?Sized>(tau: f64, src: &S, r: f64) -> Result<[f64; N]> {
    let sd = tau.sqrt();
    let rho = r / sd;
    let mut out = [0.0; N];
    if rho >= FAR {
        // s = r + 2√τ y against e^{−y²}
        let h = hermite();
        for (y, w) in h.y.iter().zip(&h.w) {
            let s = r + 2.0 * sd * y;
            let k = w / sd * i0e(0.5 * rho * s / sd) * s;
            let v = src.at(s)?;
            for c in 0..N {
                out[c] += k * v[c];
            }
        }
        return Ok(out);
    }
    // σ = s/√τ: (1/2) e^{−(ρ−σ)²/4} e^{−ρσ/2}I₀(ρσ/2) σ dσ
    let a = (rho - NEAR_WINDOW).max(0.0);
    let b = rho + NEAR_WINDOW;
    let panels = ((b - a) / NEAR_PANEL).ceil() as usize;
    let h = (b - a) / panels as f64;
    let g = legendre10();
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (sig, w) in g.mapped(lo, lo + h) {
            let d = rho - sig;
            let k = 0.5 * w * (-0.25 * d * d).exp() * i0e(0.5 * rho * sig) * sig;
            let v = src.at(sd * sig)?;
            for c in 0..N {
                out[c] += k * v[c];
            }
        }
    }
    Ok(out)
}

/// (e^{τΔ}φ)(r) for every component of `src`.
pub fn heat_apply<const N: usize, S: RadialSource<N> + ?Sized>(
    tau: f64,
    src: &S,
    r: f64,
    rel_tol: f64,
) -> Result<[f64; N]> {
    assert!(tau > 0.0 && r >= 0.0);
    if src.smooth_on_kernel_scale() {
        return fixed_rule(tau, src, r);
    }
    let sd = tau.sqrt();
    let hi = r + WINDOW * sd;
    let lo = r - WINDOW * sd;
    let c = 0.5 / tau;
    let kern = move |s: f64| c * (-(r - s) * (r - s) * 0.5 * c).exp() * i0e(r * s * c);
    let mut err = None;
    let mut linear = |s: f64| -> [f64; N] {
        match src.at(s) {
            Ok(v) => {
                let k = kern(s) * s;
                v.map(|x| x * k)
            }
            Err(e) => {
                err.get_or_insert(e);
                [0.0; N]
            }
        }
    };
    let split = (0.25 * sd).min(0.5).min(hi);
    if lo > split {
        // offset variable z = s − r keeps the Gaussian exponent free of cancellation
        let sd13 = WINDOW * sd;
        let mut err = None;
        let out = integrate(
            |z: f64| -> [f64; N] {
                let s = r + z;
                match src.at(s) {
                    Ok(v) => {
                        let k = c * (-z * z * 0.5 * c).exp() * i0e(r * s * c) * s;
                        v.map(|x| x * k)
                    }
                    Err(e) => {
                        err.get_or_insert(e);
                        [0.0; N]
                    }
                }
            },
            -sd13,
            sd13,
            options(rel_tol),
        )?;
        return err.map_or(Ok(out.value), Err);
    }
    let far = integrate(&mut linear, split, hi, options(rel_tol))?;
    if let Some(e) = err {
        return Err(e);
    }
    // s = e^{−1/2v²}: ds = s v^{−3} dv, and ρ^{−3/2}-type s² weights become bounded in v
    let v1 = 1.0 / (-2.0 * split.ln()).sqrt();
    let mut err = None;
    let near = integrate(
        |v: f64| -> [f64; N] {
            let rho = 1.0 / (v * v);
            let s = (-0.5 * rho).exp();
            match src.scaled_at_rho(rho) {
                Ok(w) => {
                    let k = kern(s) / (v * v * v);
                    w.map(|x| x * k)
                }
                Err(e) => {
                    err.get_or_insert(e);
                    [0.0; N]
                }
            }
        },
        0.0,
        v1,
        options(rel_tol),
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    let mut out = far.value;
    for k in 0..N {
        out[k] += near.value[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_preserved() {
        let one = FnSource(|_| 1.0);
        for &t in &[1e-12, 1e-4, 0.3, 4.0] {
            for &r in &[0.0, 1e-9, 0.01, 1.0, 7.0] {
                let v = heat_apply(t, &one, r, 1e-13).unwrap()[0];
                assert!((v - 1.0).abs() < 1e-11, "t={t} r={r}: {v}");
            }
        }
    }

    #[test]
    fn gaussian_closed_form() {
        let sigma = 0.2;
        let g = FnSource(move |s: f64| (-s * s / (4.0 * sigma)).exp());
        for &t in &[1e-6, 0.01, 0.5] {
            for &r in &[0.0, 0.1, 0.9, 2.5] {
                let v = heat_apply(t, &g, r, 1e-13).unwrap()[0];
                let want = sigma / (sigma + t) * (-r * r / (4.0 * (sigma + t))).exp();
                assert!((v / want - 1.0).abs() < 1e-10, "t={t} r={r}: {v} {want}");
            }
        }
    }
}
