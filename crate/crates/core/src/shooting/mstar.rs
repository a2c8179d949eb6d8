//! Matching to the inner profile, trajectory classification and the critical mass.

use super::radial::{energy, integrate_radial, EventKind, OdeState, RadialOptions};
use crate::error::{Error, Result};
use crate::inner::{inner_profile, EtaSolution};
use crate::nonlinearity::{Nonlinearity, CHI_MOMENT_TOTAL};
use crate::numerics::ode::OdeOptions;
use serde::{Deserialize, Serialize};

/// State of the inner profile at `r_start`.
pub fn match_inner(sol: &EtaSolution, r_start: f64) -> Result<OdeState> {
    let (u, du) = inner_profile(r_start, sol)?;
    Ok(OdeState::new(r_start, u, du))
}

/// The m = 0 singular solution followed from the inner region to its first zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPoints {
    pub r_start: f64,
    /// Radius where u = 2.
    pub big_r: f64,
    pub du_at_big_r: f64,
    /// First zero.
    pub r_inf: f64,
    /// Largest u′ on [r_start, r_inf]; negative when u is strictly decreasing.
    pub max_du: f64,
}

impl MatchPoints {
    /// Common initial condition of the m-family.
    pub fn state(&self) -> OdeState {
        OdeState::new(self.big_r, 2.0, self.du_at_big_r)
    }

    /// m at which E_m(R) = 0.
    pub fn energy_root(&self) -> f64 {
        (0.5 * self.du_at_big_r * self.du_at_big_r + 0.5 * (4f64.exp() - 5.0)) / CHI_MOMENT_TOTAL
    }
}

pub fn find_r_and_rinf(sol: &EtaSolution, ode: OdeOptions) -> Result<MatchPoints> {
    find_r_and_rinf_from(sol, sol.r_edge(), ode)
}

pub fn find_r_and_rinf_from(sol: &EtaSolution, r_start: f64, ode: OdeOptions) -> Result<MatchPoints> {
    let start = match_inner(sol, r_start)?;
    let opts = RadialOptions {
        ode,
        watch: vec![EventKind::Two, EventKind::Zero, EventKind::Turn],
        stop_on: vec![EventKind::Zero],
        ..Default::default()
    };
    let run = integrate_radial(&Nonlinearity::pure(), start, 1e3, &opts)?;
    let two = run.first(EventKind::Two).ok_or(Error::NoZero(run.end.r))?;
    let zero = run.first(EventKind::Zero).ok_or(Error::NoZero(run.end.r))?;
    Ok(MatchPoints {
        r_start,
        big_r: two.state.r,
        du_at_big_r: two.state.du,
        r_inf: zero.state.r,
        max_du: run.max_du,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum ShootOutcome {
    HasZero { first_zero: f64 },
    StaysPositive { witness_r: f64, energy_at_witness: f64 },
    Inconclusive { reached_r: f64 },
}

impl ShootOutcome {
    pub fn has_zero(&self) -> bool {
        matches!(self, ShootOutcome::HasZero { .. })
    }

    pub fn stays_positive(&self) -> bool {
        matches!(self, ShootOutcome::StaysPositive { .. })
    }
}

/// Classifies the trajectory from `ic`. Positivity is only certified by a
/// negative energy with u > 0: E_m is non-increasing and F_m ≥ 0 near u = 0,
/// so the trajectory can never reach zero afterwards.
pub fn classify(n: &Nonlinearity, ic: OdeState, r_max: f64, ode: OdeOptions) -> Result<ShootOutcome> {
    let e0 = energy(n, &ic)?;
    if e0 < 0.0 && ic.u > 0.0 {
        return Ok(ShootOutcome::StaysPositive { witness_r: ic.r, energy_at_witness: e0 });
    }
    let opts = RadialOptions {
        ode,
        watch: vec![EventKind::Zero, EventKind::NegativeEnergy],
        stop_on: vec![EventKind::Zero, EventKind::NegativeEnergy],
        ..Default::default()
    };
    let run = match integrate_radial(n, ic, r_max, &opts) {
        Ok(run) => run,
        Err(Error::BlowUp { r, .. }) => return Ok(ShootOutcome::Inconclusive { reached_r: r }),
        Err(e) => return Err(e),
    };
    Ok(match run.stopped_by {
        Some(EventKind::Zero) => ShootOutcome::HasZero { first_zero: run.end.r },
        Some(EventKind::NegativeEnergy) if run.end.u > 0.0 => ShootOutcome::StaysPositive {
            witness_r: run.end.r,
            energy_at_witness: energy(n, &run.end)?,
        },
        _ => ShootOutcome::Inconclusive { reached_r: run.end.r },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    pub bracket_tol: f64,
    pub r_max: f64,
    /// Largest r_max reached by doubling after inconclusive runs.
    pub r_max_cap: f64,
    pub scan_levels: u32,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig { bracket_tol: 1e-10, r_max: 40.0, r_max_cap: 640.0, scan_levels: 10, rtol: 1e-12, atol: 1e-14 }
    }
}

impl ShootConfig {
    pub fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bracket_tol > 0.0) || !(self.r_max > 0.0) || self.r_max_cap < self.r_max {
            return Err(Error::Config("bracket_tol > 0 and 0 < r_max <= r_max_cap required".into()));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config("ODE tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub m: f64,
    pub outcome: ShootOutcome,
    pub r_max: f64,
    /// Part of the initial geometric scan rather than bisection.
    pub scan: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MstarResult {
    pub m_star: f64,
    pub bracket: (f64, f64),
    pub m_hi: f64,
    pub history: Vec<ScanRecord>,
    /// Scan points classified HasZero above the chosen transition.
    pub non_monotone: Vec<f64>,
}

/// Classifies, doubling r_max on inconclusive runs up to the cap.
pub fn classify_persistent(m: f64, ic: OdeState, cfg: &ShootConfig) -> Result<(ShootOutcome, f64)> {
    let n = Nonlinearity::new(m);
    let mut r_max = cfg.r_max;
    loop {
        let out = classify(&n, ic, r_max, cfg.ode())?;
        match out {
            ShootOutcome::Inconclusive { .. } if r_max < cfg.r_max_cap => r_max = (2.0 * r_max).min(cfg.r_max_cap),
            ShootOutcome::Inconclusive { .. } => {
                return Err(Error::Bisection(format!("inconclusive at m = {m} up to r_max = {r_max}")))
            }
            _ => return Ok((out, r_max)),
        }
    }
}

pub fn find_mstar(points: &MatchPoints, cfg: &ShootConfig) -> Result<MstarResult> {
    cfg.validate()?;
    let ic = points.state();
    let m_hi = points.energy_root() * (1.0 + 1e-9);
    let mut history = Vec::new();
    let mut grid: Vec<f64> = (0..=cfg.scan_levels).map(|k| m_hi * 0.5f64.powi(k as i32)).collect();
    grid.push(0.0);
    grid.reverse();
    let mut outcomes = Vec::new();
    for &m in &grid {
        let (out, r) = classify_persistent(m, ic, cfg)?;
        history.push(ScanRecord { m, outcome: out, r_max: r, scan: true });
        outcomes.push(out);
    }
    if !outcomes[0].has_zero() {
        return Err(Error::Bisection("m = 0 does not produce a zero".into()));
    }
    let j = outcomes
        .iter()
        .position(|o| o.stays_positive())
        .ok_or_else(|| Error::Bisection("no positive trajectory in scan".into()))?;
    let non_monotone: Vec<f64> =
        grid.iter().zip(&outcomes).skip(j).filter(|(_, o)| o.has_zero()).map(|(m, _)| *m).collect();
    let (mut lo, mut hi) = (grid[j - 1], grid[j]);
    while hi - lo > cfg.bracket_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (out, r) = classify_persistent(mid, ic, cfg)?;
        history.push(ScanRecord { m: mid, outcome: out, r_max: r, scan: false });
        if out.has_zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MstarResult { m_star: 0.5 * (lo + hi), bracket: (lo, hi), m_hi, history, non_monotone })
}
