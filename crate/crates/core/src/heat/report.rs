//! Side-by-side comparison of the regular solution u_R and the stationary
//! singular solution u_S = φ*.

use super::duhamel::{stationary_residual, HeatSolver, PicardSolution};
use super::oracles::{ell, EnvelopeOracle};
use crate::error::Result;
use crate::shooting::SolitonProfile;
use serde::{Deserialize, Serialize};

/// Times where ‖u_R(t)‖_∞/φ*(√t) is expected inside [0.8, 1.1].
pub const RATIO_WINDOW: (f64, f64) = (0.8, 1.1);
pub const RATIO_TIMES: (f64, f64) = (1e-10, 1e-4);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub t: f64,
    pub sup_regular: f64,
    /// φ*(√t).
    pub phistar_at_sqrt_t: f64,
    pub ratio: f64,
    /// ‖u_R(t) − φ*‖ in L² and L⁴.
    pub distance_l2: f64,
    pub distance_l4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub t: f64,
    pub p: f64,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub r_min: f64,
    /// sup_{r ≥ r_min} φ* / (−2 log r_min)^{1/2}.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonuniquenessReport {
    pub slices: Vec<SliceSummary>,
    pub singular_divergence: Vec<Divergence>,
    pub regular_residuals: Vec<ResidualRow>,
    pub stationary_residuals: Vec<ResidualRow>,
    /// ‖u_R(T/2) − φ*‖_{L²}.
    pub separation: f64,
    /// 10³ × the stationary residual tolerance in L².
    pub separation_threshold: f64,
    pub separated: bool,
    /// Every ratio with t in RATIO_TIMES lies in RATIO_WINDOW (flag, not a failure).
    pub ratio_window_ok: bool,
}

impl NonuniquenessReport {
    pub fn residuals_pass(&self) -> bool {
        self.regular_residuals.iter().chain(&self.stationary_residuals).all(|r| r.passed)
    }
}

const P_LIST: [f64; 2] = [2.0, 4.0];

pub fn nonuniqueness_report(sol: &PicardSolution, profile: &SolitonProfile) -> Result<NonuniquenessReport> {
    let solver = &sol.solver;
    let grid = solver.grid();
    let ur = sol.u_regular();
    let phi: Vec<f64> = grid.r().iter().map(|&r| profile.value(r)).collect::<Result<_>>()?;
    let mut slices = Vec::new();
    for k in solver.eval_indices() {
        let t = ur.times[k];
        let diff: Vec<f64> = ur.values[k].iter().zip(&phi).map(|(a, b)| a - b).collect();
        let sup_regular = ur.sup_norm(k);
        let phistar_at_sqrt_t = profile.value(t.sqrt())?;
        slices.push(SliceSummary {
            t,
            sup_regular,
            phistar_at_sqrt_t,
            ratio: sup_regular / phistar_at_sqrt_t,
            distance_l2: grid.lp_norm(&diff, 2.0),
            distance_l4: grid.lp_norm(&diff, 4.0),
        });
    }
    let singular_divergence = [1e-100f64, 1e-200, 1e-300]
        .iter()
        .map(|&r| Ok(Divergence { r_min: r, ratio: profile.sup_from(r)? / (-2.0 * r.ln()).sqrt() }))
        .collect::<Result<Vec<_>>>()?;

    let t_max = solver.t_max();
    let tol_regular = 10.0 * solver.config().picard_tol;
    let mut regular_residuals = Vec::new();
    let mut stationary_residuals = Vec::new();
    for t in [t_max / 4.0, t_max / 2.0] {
        let k = ur.index_of(t).expect("T/4 and T/2 are time nodes");
        for &p in &P_LIST {
            let value = sol.residual(k, p);
            regular_residuals.push(ResidualRow { t, p, value, tolerance: tol_regular, passed: value < tol_regular });
        }
        let vals = stationary_residual(profile, grid, t, &P_LIST, solver.config().conv_rel_tol)?;
        for (&p, value) in P_LIST.iter().zip(vals) {
            let tolerance = 1e-6 * (1.0 + profile.lp_norm(p)?);
            stationary_residuals.push(ResidualRow { t, p, value, tolerance, passed: value < tolerance });
        }
    }
    let k_half = ur.index_of(t_max / 2.0).unwrap();
    let separation = slices.iter().find(|s| s.t == ur.times[k_half]).map_or(0.0, |s| s.distance_l2);
    let separation_threshold = 1e3 * 1e-6 * (1.0 + profile.lp_norm(2.0)?);
    let ratio_window_ok = slices
        .iter()
        .filter(|s| s.t >= RATIO_TIMES.0 && s.t <= RATIO_TIMES.1)
        .all(|s| s.ratio >= RATIO_WINDOW.0 && s.ratio <= RATIO_WINDOW.1);
    Ok(NonuniquenessReport {
        slices,
        singular_divergence,
        regular_residuals,
        stationary_residuals,
        separation,
        separation_threshold,
        separated: separation > separation_threshold,
        ratio_window_ok,
    })
}

/// (u₀(t,0) − (ℓ−2 log ℓ)^{1/2}) ℓ^{1/2}.
pub fn origin_excess(t: f64, u0_at_origin: f64) -> f64 {
    let l = ell(t);
    (u0_at_origin - (l - 2.0 * l.ln()).sqrt()) * l.sqrt()
}

/// Measured constants of the u₀ upper bounds over the solver's nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct U0Bounds {
    /// (t, origin_excess) for t ≥ eval_min.
    pub origin: Vec<(f64, f64)>,
    /// max over decades / min over decades of the per-decade sup |origin_excess|.
    pub origin_spread: f64,
    /// sup ℓ^{1/2}(u₀ − min{φ*(√t), φ*(r)}) over max{t, r²} < ε².
    pub c_min_envelope: f64,
    /// sup u₀e^{u₀²}/F₀ and sup u₀²e^{u₀²}/F₀′ over every node.
    pub c_f0: f64,
    pub c_f0_prime: f64,
    /// Per-decade sups of the two ratios above, as (decade, c_f0, c_f0_prime).
    pub envelope_decades: Vec<(i32, f64, f64)>,
}

pub fn u0_bounds(solver: &HeatSolver<'_>, profile: &SolitonProfile) -> Result<U0Bounds> {
    let env = EnvelopeOracle { epsilon: solver.epsilon() };
    let e2 = solver.epsilon().powi(2);
    let r = solver.grid().r();
    let phi_r: Vec<f64> = r.iter().map(|&x| profile.value(x)).collect::<Result<_>>()?;
    let u0 = solver.u0_field();
    let mut origin = Vec::new();
    let mut c_min_envelope = f64::NEG_INFINITY;
    let (mut c_f0, mut c_f0_prime) = (0.0f64, 0.0f64);
    let mut decades: Vec<(i32, f64, f64)> = Vec::new();
    let mut origin_decades: Vec<(i32, f64)> = Vec::new();
    for (k, &t) in u0.times.iter().enumerate() {
        let row = &u0.values[k];
        let dec = t.log10().floor() as i32;
        if t >= solver.config().eval_min {
            let c = origin_excess(t, row[0]);
            origin.push((t, c));
            match origin_decades.last_mut() {
                Some(d) if d.0 == dec => d.1 = d.1.max(c.abs()),
                _ => origin_decades.push((dec, c.abs())),
            }
        }
        let phi_t = profile.value(t.sqrt())?;
        let sl = ell(t).sqrt();
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for (i, &x) in r.iter().enumerate() {
            let u = row[i];
            if t.max(x * x) < e2 {
                c_min_envelope = c_min_envelope.max(sl * (u - phi_t.min(phi_r[i])));
            }
            let g = (u * u).exp();
            a = a.max(u * g / env.f0(t, x));
            b = b.max(u * u * g / env.f0_prime(t, x));
        }
        c_f0 = c_f0.max(a);
        c_f0_prime = c_f0_prime.max(b);
        match decades.last_mut() {
            Some(d) if d.0 == dec => {
                d.1 = d.1.max(a);
                d.2 = d.2.max(b);
            }
            _ => decades.push((dec, a, b)),
        }
    }
    let hi = origin_decades.iter().map(|d| d.1).fold(0.0, f64::max);
    let lo = origin_decades.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    Ok(U0Bounds {
        origin,
        origin_spread: hi / lo,
        c_min_envelope,
        c_f0,
        c_f0_prime,
        envelope_decades: decades,
    })
}
