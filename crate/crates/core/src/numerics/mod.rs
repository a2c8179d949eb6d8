//! Quadrature, interpolation, special functions and ODE integration.

pub mod bessel;
pub mod gauss;
pub mod ode;
pub mod quadrature;
pub mod roots;

/// `e^x - 1 - x` without cancellation near zero.
pub fn exp_rem2(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        let mut k = 2.0;
        while term.abs() > 1e-18 * sum.abs() {
            k += 1.0;
            term *= x / k;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// Shortest decimal that round-trips, used for every text artifact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
