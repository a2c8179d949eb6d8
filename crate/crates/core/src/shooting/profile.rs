//! The global singular soliton: inner asymptotic profile on (0, e^{−Λ/2}],
//! ODE table in t = ln r up to r_tail, and a K0 tail beyond.

use super::mstar::{classify_persistent, MatchPoints, MstarResult, ShootConfig};
use super::radial::{energy, integrate_radial, EventKind, OdeState, RadialOptions};
use crate::error::{Error, Result};
use crate::inner::EtaSolution;
use crate::nonlinearity::Nonlinearity;
use crate::numerics::bessel::kve;
use crate::numerics::fmt_f64;
use crate::numerics::gauss::GaussRule;
use crate::numerics::quadrature::{integrate_scalar, QuadOptions};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Nodes of the ODE table between e^{−Λ/2} and the integration cap.
    pub table_nodes: usize,
    /// Relative gap between the two bracket trajectories that ends the table.
    pub split_tol: f64,
    pub r_cap: f64,
    pub export_nodes: usize,
    pub export_r_min: f64,
    pub export_r_max: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            table_nodes: 8000,
            split_tol: 1e-8,
            r_cap: 40.0,
            export_nodes: 4000,
            export_r_min: 1e-300,
            export_r_max: 30.0,
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> Result<()> {
        if self.table_nodes < 100 || self.export_nodes < 2000 {
            return Err(Error::Config("profile needs >= 100 table nodes and >= 2000 export nodes".into()));
        }
        if !(self.export_r_min > 0.0 && self.export_r_max > self.export_r_min && self.split_tol > 0.0) {
            return Err(Error::Config("bad profile export range or split tolerance".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolitonProfile {
    pub m: f64,
    pub bracket: (f64, f64),
    pub big_r: f64,
    pub du_at_big_r: f64,
    pub r_inf: Option<f64>,
    pub r_edge: f64,
    pub r_tail: f64,
    pub decay_constant: Option<f64>,
    pub grid: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub energy: Vec<f64>,
    inner: EtaSolution,
    /// Table nodes in t = ln r, uniform in t + r.
    table_t: Vec<f64>,
    s0: f64,
    ds: f64,
    table_u: Vec<f64>,
    table_w: Vec<f64>,
}

/// Glue diagnostics: relative ODE residual u_tt + r² f_m(u) around each junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlueResiduals {
    pub inner: f64,
    pub tail: f64,
}

/// Shrinks the bracket until its endpoints are adjacent in floating point
/// (to within a few ulps).
pub fn refine_bracket(points: &MatchPoints, bracket: (f64, f64), cfg: &ShootConfig) -> Result<(f64, f64)> {
    let ic = points.state();
    let (mut lo, mut hi) = bracket;
    while hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (out, _) = classify_persistent(mid, ic, cfg)?;
        if out.has_zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

pub fn assemble_phistar(
    sol: &EtaSolution,
    points: &MatchPoints,
    mstar: &MstarResult,
    cfg: &ShootConfig,
    pcfg: &ProfileConfig,
) -> Result<SolitonProfile> {
    pcfg.validate()?;
    let (lo, hi) = refine_bracket(points, mstar.bracket, cfg)?;
    let r_edge = sol.r_edge();
    let t0 = r_edge.ln();
    let s0 = t0 + r_edge;
    let ds = (pcfg.r_cap.ln() + pcfg.r_cap - s0) / pcfg.table_nodes as f64;
    let table_t: Vec<f64> = (0..=pcfg.table_nodes).map(|k| t_of_s(s0 + k as f64 * ds)).collect();
    let sample: Vec<f64> = table_t.iter().map(|t| t.exp()).collect();
    // Inside R every member of the family coincides with the m = 0 solution;
    // outside, the bracket runs start from the same state the classifier used.
    let start = super::mstar::match_inner(sol, r_edge)?;
    let inside = RadialOptions {
        ode: cfg.ode(),
        watch: vec![],
        sample: sample.iter().copied().take_while(|&r| r < points.big_r).collect(),
        ..Default::default()
    };
    let run0 = integrate_radial(&Nonlinearity::pure(), start, points.big_r, &inside)?;
    let opts = RadialOptions {
        ode: cfg.ode(),
        watch: vec![EventKind::Zero],
        stop_on: vec![EventKind::Zero],
        sample,
        ..Default::default()
    };
    let ic = points.state();
    let run_lo = integrate_radial(&Nonlinearity::new(lo), ic, pcfg.r_cap * 1.000001, &opts)?;
    let run_hi = integrate_radial(&Nonlinearity::new(hi), ic, pcfg.r_cap * 1.000001, &opts)?;
    let mut table_u: Vec<f64> = run0.samples.iter().map(|s| s.u).collect();
    let mut table_w: Vec<f64> = run0.samples.iter().map(|s| s.du * s.r).collect();
    let len = run_lo.samples.len().min(run_hi.samples.len());
    for k in 0..len {
        let (a, b) = (run_lo.samples[k], run_hi.samples[k]);
        let u = 0.5 * (a.u + b.u);
        if a.u <= 0.0 || b.u <= 0.0 || a.du >= 0.0 || b.du >= 0.0 || (a.u - b.u).abs() > pcfg.split_tol * u {
            break;
        }
        table_u.push(u);
        table_w.push(0.5 * (a.du + b.du) * a.r);
    }
    if table_u.len() < 10 {
        return Err(Error::Profile("bracket trajectories separate immediately".into()));
    }
    let mut table_t = table_t;
    table_t.truncate(table_u.len());
    let table = ProfileTable {
        m: 0.5 * (lo + hi),
        bracket: (lo, hi),
        big_r: points.big_r,
        du_at_big_r: points.du_at_big_r,
        r_inf: Some(points.r_inf),
        r_edge,
        s0,
        ds,
        t: table_t,
        u: table_u,
        w: table_w,
    };
    SolitonProfile::from_table(table, sol, pcfg)
}

/// Everything needed to rebuild a profile next to its inner solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub m: f64,
    pub bracket: (f64, f64),
    pub big_r: f64,
    pub du_at_big_r: f64,
    pub r_inf: Option<f64>,
    pub r_edge: f64,
    pub s0: f64,
    pub ds: f64,
    /// ln r at the nodes.
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    /// r u′ at the nodes.
    pub w: Vec<f64>,
}

/// Inverse of s = t + e^t.
fn t_of_s(s: f64) -> f64 {
    let mut t = if s > 1.0 { s.ln().min(s) } else { s - s.exp().min(1.0) };
    for _ in 0..60 {
        let e = t.exp();
        let step = (t + e - s) / (1.0 + e);
        t -= step;
        if step.abs() <= 1e-16 * t.abs().max(1.0) {
            break;
        }
    }
    t
}

impl SolitonProfile {
    pub fn from_table(table: ProfileTable, sol: &EtaSolution, pcfg: &ProfileConfig) -> Result<Self> {
        pcfg.validate()?;
        if table.t.len() < 10 || table.u.len() != table.t.len() || table.w.len() != table.t.len() {
            return Err(Error::Profile("bracket trajectories separate immediately".into()));
        }
        if (table.r_edge - sol.r_edge()).abs() > 1e-12 * table.r_edge {
            return Err(Error::Data("profile table and inner solution disagree on the handoff radius".into()));
        }
        let m = table.m;
        let mut prof = SolitonProfile {
            m,
            bracket: table.bracket,
            big_r: table.big_r,
            du_at_big_r: table.du_at_big_r,
            r_inf: table.r_inf,
            r_edge: table.r_edge,
            r_tail: table.t.last().unwrap().exp(),
            decay_constant: if m > 0.0 { Some(m.sqrt()) } else { None },
            grid: vec![],
            u: vec![],
            du: vec![],
            energy: vec![],
            inner: sol.clone(),
            table_t: table.t,
            s0: table.s0,
            ds: table.ds,
            table_u: table.u,
            table_w: table.w,
        };
        let n = Nonlinearity::new(m);
        let ln_a = pcfg.export_r_min.ln();
        let ln_b = pcfg.export_r_max.ln();
        let nodes = pcfg.export_nodes;
        for k in 0..nodes {
            let r = (ln_a + (ln_b - ln_a) * k as f64 / (nodes - 1) as f64).exp();
            let (u, du) = prof.eval(r)?;
            if !(u > 0.0) {
                return Err(Error::Profile(format!("profile not positive at r = {r}")));
            }
            prof.grid.push(r);
            prof.u.push(u);
            prof.du.push(du);
            prof.energy.push(energy(&n, &OdeState::new(r, u, du)).unwrap_or(f64::INFINITY));
        }
        Ok(prof)
    }

    pub fn table(&self) -> ProfileTable {
        ProfileTable {
            m: self.m,
            bracket: self.bracket,
            big_r: self.big_r,
            du_at_big_r: self.du_at_big_r,
            r_inf: self.r_inf,
            r_edge: self.r_edge,
            s0: self.s0,
            ds: self.ds,
            t: self.table_t.clone(),
            u: self.table_u.clone(),
            w: self.table_w.clone(),
        }
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        Nonlinearity::new(self.m)
    }

    pub fn inner(&self) -> &EtaSolution {
        &self.inner
    }

    /// u(r) and u′(r).
    pub fn eval(&self, r: f64) -> Result<(f64, f64)> {
        if !(r > 0.0) {
            return Err(Error::OutOfRange(format!("r = {r}")));
        }
        if r <= self.r_edge {
            return crate::inner::inner_profile(r, &self.inner);
        }
        if r <= self.r_tail {
            let (u, ut) = self.hermite(r.ln());
            return Ok((u, ut / r));
        }
        let k = self.m.sqrt();
        let (xt, x) = (k * self.r_tail, k * r);
        let ut = *self.table_u.last().unwrap();
        let scale = ut / kve(0.0, xt) * (xt - x).exp();
        Ok((scale * kve(0.0, x), -k * scale * kve(1.0, x)))
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        self.eval(r).map(|v| v.0)
    }

    /// Value in the inner variable ρ = 2|log r|, usable where r underflows.
    pub fn value_at_rho(&self, rho: f64) -> Result<f64> {
        self.inner.profile_at_rho(rho).map(|v| v.0)
    }

    fn hermite(&self, t: f64) -> (f64, f64) {
        let last = self.table_u.len() - 1;
        let guess = (((t + t.exp() - self.s0) / self.ds).max(0.0).floor() as usize).min(last - 1);
        // the node map is inverted numerically, so allow a one-cell correction
        let k = if t < self.table_t[guess] && guess > 0 {
            guess - 1
        } else if t > self.table_t[guess + 1] && guess + 1 < last {
            guess + 1
        } else {
            guess
        };
        let h = self.table_t[k + 1] - self.table_t[k];
        let s = (t - self.table_t[k]) / h;
        let (u0, u1, w0, w1) = (self.table_u[k], self.table_u[k + 1], self.table_w[k], self.table_w[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * u0
            + (s3 - 2.0 * s2 + s) * h * w0
            + (-2.0 * s3 + 3.0 * s2) * u1
            + (s3 - s2) * h * w1;
        let d = ((6.0 * s2 - 6.0 * s) * u0
            + (3.0 * s2 - 4.0 * s + 1.0) * h * w0
            + (-6.0 * s2 + 6.0 * s) * u1
            + (3.0 * s2 - 2.0 * s) * h * w1)
            / h;
        (v, d)
    }

    fn residual_at(&self, r: f64) -> Result<f64> {
        let n = self.nonlinearity();
        let t = r.ln();
        let u = |t: f64| self.value(t.exp());
        let second = |h: f64| -> Result<f64> { Ok((u(t + h)? - 2.0 * u(t)? + u(t - h)?) / (h * h)) };
        let h = 0.05 / (1.0 + r);
        let (a, b) = (second(h)?, second(0.5 * h)?);
        let utt = (4.0 * b - a) / 3.0;
        let rhs = r * r * n.value(u(t)?)?;
        Ok((utt + rhs).abs() / (utt.abs() + rhs.abs()))
    }

    pub fn glue_residuals(&self) -> Result<GlueResiduals> {
        Ok(GlueResiduals { inner: self.residual_at(self.r_edge)?, tail: self.residual_at(self.r_tail)? })
    }

    /// (2π ∫ |u|^p r dr)^{1/p}.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("p = {p} < 1")));
        }
        let opts = QuadOptions::rel(1e-12);
        // r dr = −½ e^{−ρ} dρ on the inner region
        let lam = self.inner.lambda();
        let inner = integrate_scalar(
            |rho| self.value_at_rho(rho).map(|y| 0.5 * y.abs().powf(p) * (-rho).exp()).unwrap_or(f64::NAN),
            lam,
            lam + 200.0,
            opts,
        )?;
        let rule = GaussRule::new(4);
        let mut middle = 0.0;
        for w in self.table_t.windows(2) {
            middle += rule.integrate(w[0], w[1], |t| self.hermite(t).0.abs().powf(p) * (2.0 * t).exp());
        }
        let span = 60.0 / (p * self.m.sqrt());
        let tail = integrate_scalar(
            |r| self.value(r).map(|u| u.abs().powf(p) * r).unwrap_or(f64::NAN),
            self.r_tail,
            self.r_tail + span,
            opts,
        )?;
        let total = 2.0 * PI * (inner + middle + tail);
        if !total.is_finite() {
            return Err(Error::Profile(format!("L^{p} integral not finite")));
        }
        Ok(total.powf(1.0 / p))
    }

    /// sup of u over [r_min, ∞), attained at r_min since u decreases.
    pub fn sup_from(&self, r_min: f64) -> Result<f64> {
        self.value(r_min)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Data(e.to_string());
        out.write_record(["r", "u", "du", "energy"]).map_err(err)?;
        for i in 0..self.grid.len() {
            out.write_record([
                fmt_f64(self.grid[i]),
                fmt_f64(self.u[i]),
                fmt_f64(self.du[i]),
                fmt_f64(self.energy[i]),
            ])
            .map_err(err)?;
        }
        out.flush().map_err(|e| Error::Data(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_map_inverts() {
        for &s in &[-49.9, -3.0, 0.0, 0.7, 5.0, 43.7] {
            let t = t_of_s(s);
            assert!((t + t.exp() - s).abs() < 1e-13 * s.abs().max(1.0), "{s}");
        }
    }
}
