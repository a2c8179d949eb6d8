//! Dormand–Prince 5(4) with continuous output.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-12, atol: 1e-14, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    rc: [[f64; N]; 4],
}

impl<const N: usize> Step<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let th = (t - self.t0) / h;
        let th1 = 1.0 - th;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.y0[i]
                + th * (self.rc[0][i] + th1 * (self.rc[1][i] + th * (self.rc[2][i] + th1 * self.rc[3][i])));
        }
        y
    }
}

pub enum Control {
    Continue,
    Stop,
}

/// Integrates y' = f(t, y) from t0 to t_end, handing every accepted step to
/// `on_step`. Returns the final (t, y).
pub fn integrate<const N: usize, F, C>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: OdeOptions,
    mut on_step: C,
) -> Result<(f64, [f64; N])>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    C: FnMut(&Step<N>) -> Result<Control>,
{
    assert!(t_end > t0, "integration runs forward only");
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = initial_step(&mut f, t, &y, &k1, opts).min(t_end - t).min(opts.h_max);
    let mut steps = 0;
    let mut fac_old = 1e-4f64;
    loop {
        if steps >= opts.max_steps {
            return Err(Error::StepUnderflow { r: t });
        }
        steps += 1;
        if t + h > t_end {
            h = t_end - t;
        }
        let stage = |y: &[f64; N], parts: &[(f64, &[f64; N])]| {
            let mut out = *y;
            for (c, k) in parts {
                for i in 0..N {
                    out[i] += h * c * k[i];
                }
            }
            out
        };
        let k2 = f(t + C2 * h, &stage(&y, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &stage(&y, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &stage(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &stage(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + h, &stage(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y1 = stage(&y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t1 = if t + h >= t_end { t_end } else { t + h };
        let k7 = f(t1, &y1);
        let mut err = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
            finite &= y1[i].is_finite() && k7[i].is_finite();
        }
        let err = (err / N as f64).sqrt();
        if !finite || !err.is_finite() {
            h *= 0.25;
            if h < 1e-14 * t.abs().max(1e-300) {
                return Err(Error::StepUnderflow { r: t });
            }
            continue;
        }
        // PI step-size controller.
        let fac11 = err.powf(0.17);
        let mut fac = fac11 / fac_old.powf(0.04) / 0.9;
        fac = fac.clamp(0.1, 5.0);
        let h_new = h / fac;
        if err <= 1.0 {
            fac_old = err.max(1e-4);
            let mut rc = [[0.0; N]; 4];
            for i in 0..N {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                rc[0][i] = ydiff;
                rc[1][i] = bspl;
                rc[2][i] = ydiff - h * k7[i] - bspl;
                rc[3][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = Step { t0: t, t1, y0: y, y1, rc };
            t = t1;
            y = y1;
            k1 = k7;
            if let Control::Stop = on_step(&step)? {
                return Ok((t, y));
            }
            if t >= t_end {
                return Ok((t, y));
            }
            h = h_new.min(opts.h_max);
        } else {
            h /= (fac11 / 0.9).clamp(1.0, 10.0);
            if h < 1e-14 * t.abs().max(1e-300) {
                return Err(Error::StepUnderflow { r: t });
            }
        }
    }
}

fn initial_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], k: &[f64; N], opts: OdeOptions) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (k[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut y1 = *y;
    for i in 0..N {
        y1[i] += h0 * k[i];
    }
    let k1 = f(t + h0, &y1);
    let mut d2 = 0.0;
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y[i].abs();
        d2 += ((k1[i] - k[i]) / sc).powi(2);
    }
    let d2 = (d2 / N as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_oscillator_and_dense_output() {
        let mut worst = 0.0f64;
        let (t, y) = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            10.0,
            OdeOptions::default(),
            |s| {
                let tm = 0.5 * (s.t0 + s.t1);
                let y = s.eval(tm);
                worst = worst.max((y[0] - tm.sin()).abs());
                Ok(Control::Continue)
            },
        )
        .unwrap();
        assert_eq!(t, 10.0);
        assert_relative_eq!(y[0], 10f64.sin(), epsilon = 1e-10);
        assert!(worst < 1e-10, "dense output error {worst}");
    }

    #[test]
    fn stop_request_is_honoured() {
        let mut n = 0;
        let (t, _) = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 5.0, OdeOptions::default(), |_| {
            n += 1;
            Ok(if n == 3 { Control::Stop } else { Control::Continue })
        })
        .unwrap();
        assert!(t < 5.0);
        assert_eq!(n, 3);
    }
}
