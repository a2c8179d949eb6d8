//! Fixed point η = T[η] on [Λ, ∞).
//!
//! With u = √(2s) the kernel phase is linear, and
//! sin(u₀ − u) = sin u₀ cos u − cos u₀ sin u splits T into two right-cumulative
//! integrals C(u₀) = ∫_{u₀}^∞ cos(u) h du and S(u₀) = ∫_{u₀}^∞ sin(u) h du with
//! h = s^{1/4} F(s, η) u. Both are accumulated panel by panel from the right.

use super::asymptotics::{
    emden_fowler_residual, forcing, g_terms, phi_leading, phi_leading_d,
    phi_leading_dd, total_forcing, KERNEL_SCALE,
};
use crate::error::{Error, Result};
use crate::numerics::gauss::PanelGrid;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Contraction threshold of the fixed-point argument.
pub const CONTRACTION_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaConfig {
    /// Left endpoint Λ of the ρ-interval.
    pub lambda: f64,
    /// Truncation of the ∫_ρ^∞ integrals; beyond it an asymptotic tail is used.
    pub rho_max: f64,
    /// Panel width in u = √(2ρ).
    pub panel_width: f64,
    /// Gauss–Legendre nodes per panel.
    pub quad_order: usize,
    /// Stopping tolerance on successive differences in the weighted norm.
    pub fp_tol: f64,
    pub max_iter: usize,
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig { lambda: 100.0, rho_max: 1e6, panel_width: PI / 2.0, quad_order: 16, fp_tol: 1e-10, max_iter: 60 }
    }
}

impl EtaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lambda >= 3.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 3, got {}", self.lambda));
        }
        if !(self.rho_max >= 100.0 * self.lambda && self.rho_max.is_finite()) {
            return bad(format!("rho_max must be >= 100*lambda, got {}", self.rho_max));
        }
        if !(self.fp_tol > 0.0) {
            return bad("fp_tol must be positive".into());
        }
        if !(self.panel_width > 0.0 && self.panel_width <= PI) {
            return bad("panel_width must lie in (0, pi]".into());
        }
        if self.quad_order < 4 || self.quad_order > 64 {
            return bad("quad_order must lie in [4, 64]".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }

    /// Panel grid in u = √(2ρ).
    pub fn grid(&self) -> PanelGrid {
        let u0 = (2.0 * self.lambda).sqrt();
        let u1 = (2.0 * self.rho_max).sqrt();
        let panels = ((u1 - u0) / self.panel_width).ceil().max(1.0) as usize;
        PanelGrid::uniform(u0, self.panel_width, panels, self.quad_order)
    }

    /// The ρ nodes of the discretisation.
    pub fn nodes(&self) -> Vec<f64> {
        self.grid().nodes().iter().map(|u| 0.5 * u * u).collect()
    }

    /// Upper end of the window on which tail error and residuals are certified.
    pub fn validated_upper(&self) -> f64 {
        10.0 * self.lambda
    }
}

/// sup ρ^{3/2}/log ρ · |v|.
pub fn weight(rho: f64) -> f64 {
    rho * rho.sqrt() / rho.ln()
}

/// Discretised T together with the intermediate integrals.
pub struct InnerOperator {
    pub cfg: EtaConfig,
    grid: PanelGrid,
    u: Vec<f64>,
    rho: Vec<f64>,
    wt: Vec<f64>,
    quarter: Vec<f64>,
    f: Vec<f64>,
    phi: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
}

/// Output of one application of T.
#[derive(Debug, Clone)]
pub struct Applied {
    pub t: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    /// Weighted size of the neglected part of the tail series on the validated window.
    pub tail_remainder: f64,
}

impl InnerOperator {
    pub fn new(cfg: &EtaConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid();
        let u = grid.nodes();
        let rho: Vec<f64> = u.iter().map(|u| 0.5 * u * u).collect();
        let f = rho.iter().map(|&r| forcing(r)).collect::<Result<Vec<_>>>()?;
        let phi = rho.iter().map(|&r| phi_leading(r)).collect::<Result<Vec<_>>>()?;
        Ok(InnerOperator {
            cfg: cfg.clone(),
            cumulative: grid.rule.right_cumulative(),
            wt: rho.iter().map(|&r| weight(r)).collect(),
            quarter: rho.iter().map(|r| r.powf(0.25)).collect(),
            grid,
            u,
            rho,
            f,
            phi,
        })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn grid(&self) -> &PanelGrid {
        &self.grid
    }

    pub fn weighted_norm(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.wt).fold(0.0, |m, (a, w)| m.max((a * w).abs()))
    }

    pub fn weighted_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.wt).fold(0.0, |m, ((x, y), w)| m.max(((x - y) * w).abs()))
    }

    fn forcing_at(&self, i: usize, eta: f64) -> Result<f64> {
        let r = self.rho[i];
        let g: f64 = g_terms(r, eta, true)?.iter().sum();
        Ok(self.f[i] + g - 0.25 * (-r).exp() * (self.phi[i] + eta))
    }

    /// Value of the table's interpolant at the right end of the grid.
    fn edge_value(&self, eta: &[f64]) -> f64 {
        self.grid.interpolate(eta, self.grid.hi())
    }

    /// T[η] at every node.
    pub fn apply(&self, eta: &[f64]) -> Result<Applied> {
        let n = self.grid.order();
        let np = self.grid.panels();
        let mut h = vec![0.0; self.len()];
        for i in 0..self.len() {
            h[i] = self.quarter[i] * self.forcing_at(i, eta[i])? * self.u[i];
        }
        let big_u = self.grid.hi();
        let eta_edge = self.edge_value(eta);
        let tail = oscillatory_tail(
            |u| {
                let s = 0.5 * u * u;
                let e = extrapolate(eta_edge, 0.5 * big_u * big_u, s).0;
                total_forcing(s, e).map(|f| s.powf(0.25) * f * u)
            },
            big_u,
        )?;
        let mut c = vec![0.0; self.len()];
        let mut s = vec![0.0; self.len()];
        let (mut acc_c, mut acc_s) = (tail.cos, tail.sin);
        let mut hc = vec![0.0; n];
        let mut hs = vec![0.0; n];
        for p in (0..np).rev() {
            let half = 0.5 * (self.grid.edges[p + 1] - self.grid.edges[p]);
            for k in 0..n {
                let i = p * n + k;
                hc[k] = h[i] * self.u[i].cos();
                hs[k] = h[i] * self.u[i].sin();
            }
            for j in 0..n {
                let row = &self.cumulative[j];
                let (mut sc, mut ss) = (0.0, 0.0);
                for k in 0..n {
                    sc += row[k] * hc[k];
                    ss += row[k] * hs[k];
                }
                c[p * n + j] = acc_c + half * sc;
                s[p * n + j] = acc_s + half * ss;
            }
            for k in 0..n {
                acc_c += half * self.grid.rule.w[k] * hc[k];
                acc_s += half * self.grid.rule.w[k] * hs[k];
            }
        }
        let t: Vec<f64> = (0..self.len())
            .map(|i| KERNEL_SCALE * self.quarter[i] * (self.u[i].sin() * c[i] - self.u[i].cos() * s[i]))
            .collect();
        let upper = self.cfg.validated_upper();
        let tail_remainder = (0..self.len())
            .filter(|&i| self.rho[i] <= upper)
            .map(|i| KERNEL_SCALE * self.quarter[i] * tail.remainder * self.wt[i])
            .fold(0.0, f64::max);
        Ok(Applied { t, c, s, h, tail_remainder })
    }

    /// First and second ρ-derivatives of T[η] at the nodes, from the
    /// differentiated integral representation.
    pub fn derivatives(&self, a: &Applied) -> (Vec<f64>, Vec<f64>) {
        let mut d1 = vec![0.0; self.len()];
        let mut d2 = vec![0.0; self.len()];
        for i in 0..self.len() {
            let (r, u, q) = (self.rho[i], self.u[i], self.quarter[i]);
            let (sn, cs) = u.sin_cos();
            let p = cs * a.c[i] + sn * a.s[i];
            let dp = (-sn * a.c[i] + cs * a.s[i] - a.h[i]) / u;
            // d/dρ of κρ^{1/4}/u = κ 2^{-1/2} ρ^{-1/4}
            let amp = KERNEL_SCALE * q / u;
            let damp = -0.25 * KERNEL_SCALE * std::f64::consts::FRAC_1_SQRT_2 * r.powf(-1.25);
            d1[i] = a.t[i] / (4.0 * r) + amp * p;
            d2[i] = d1[i] / (4.0 * r) - a.t[i] / (4.0 * r * r) + damp * p + amp * dp;
        }
        (d1, d2)
    }

    /// Largest Lipschitz ratio of T over a fixed family of pairs inside the
    /// ball of weighted radius `radius`.
    pub fn probe_contraction(&self, radius: f64) -> Result<f64> {
        let env: Vec<f64> = self.wt.iter().map(|w| radius / w).collect();
        let lam = self.cfg.lambda;
        let scales = [1.0, 0.5, 0.0, -0.5, -1.0];
        let cuts = [1.5 * lam, 3.0 * lam, 10.0 * lam, f64::INFINITY];
        let mut worst = 0.0f64;
        for &cut in &cuts {
            let profile = |a: f64| -> Vec<f64> {
                env.iter().zip(&self.rho).map(|(e, &r)| if r < cut { a * e } else { 0.0 }).collect()
            };
            let images: Vec<Vec<f64>> =
                scales.iter().map(|&a| self.apply(&profile(a)).map(|x| x.t)).collect::<Result<_>>()?;
            for i in 0..scales.len() {
                for j in i + 1..scales.len() {
                    let num = self.weighted_distance(&images[i], &images[j]);
                    let den = self.weighted_distance(&profile(scales[i]), &profile(scales[j]));
                    if den > 0.0 {
                        worst = worst.max(num / den);
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Weighted-decay extrapolation beyond the last anchor, with its derivative.
pub fn extrapolate(eta_anchor: f64, rho_anchor: f64, rho: f64) -> (f64, f64) {
    let v = eta_anchor * (rho_anchor / rho).powf(1.5) * rho.ln() / rho_anchor.ln();
    (v, v * (-1.5 / rho + 1.0 / (rho * rho.ln())))
}

/// ∫_U^∞ (cos u, sin u) h(u) du by the asymptotic series
/// e^{iU} Σ_{k<4} i^{k+1} h^{(k)}(U), with derivatives by finite differences.
pub struct OscTail {
    pub cos: f64,
    pub sin: f64,
    /// Size of the first neglected term.
    pub remainder: f64,
}

pub fn oscillatory_tail<F: FnMut(f64) -> Result<f64>>(mut h: F, big_u: f64) -> Result<OscTail> {
    let d = 0.5f64.min(0.05 * big_u);
    let hm2 = h(big_u - 2.0 * d)?;
    let hm1 = h(big_u - d)?;
    let h0 = h(big_u)?;
    let hp1 = h(big_u + d)?;
    let hp2 = h(big_u + 2.0 * d)?;
    let h1 = (-hp2 + 8.0 * hp1 - 8.0 * hm1 + hm2) / (12.0 * d);
    let h2 = (-hp2 + 16.0 * hp1 - 30.0 * h0 + 16.0 * hm1 - hm2) / (12.0 * d * d);
    let h3 = (hp2 - 2.0 * hp1 + 2.0 * hm1 - hm2) / (2.0 * d * d * d);
    let (sn, cs) = big_u.sin_cos();
    let re = h3 - h1;
    let im = h0 - h2;
    Ok(OscTail { cos: cs * re - sn * im, sin: sn * re + cs * im, remainder: h3.abs() })
}

/// Scalar diagnostics of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaDiagnostics {
    pub weighted_norm: f64,
    pub contraction_factor: f64,
    pub picard_ratio_max: f64,
    pub probe_ratio_max: f64,
    /// Weighted norm of T[0].
    pub c_star: f64,
    pub iterations: usize,
    pub last_difference: f64,
    pub tail_remainder: f64,
    /// max ρ^{5/2}/log ρ · |Emden–Fowler residual| on [2Λ, 10Λ].
    pub residual_ratio: f64,
    /// max ρ^{3/2}/log ρ · |η′|.
    pub derivative_constant: f64,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub weighted_norm: f64,
    pub difference: f64,
    pub ratio: Option<f64>,
}

/// Converged inner correction.
#[derive(Debug, Clone)]
pub struct EtaSolution {
    pub config: EtaConfig,
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
    /// ρ^{5/2}/log ρ · Emden–Fowler residual at each node.
    pub weighted_residual: Vec<f64>,
    pub diagnostics: EtaDiagnostics,
    grid: PanelGrid,
    edge: (f64, f64),
}

impl EtaSolution {
    pub fn weighted_norm(&self) -> f64 {
        self.diagnostics.weighted_norm
    }

    pub fn contraction_factor(&self) -> f64 {
        self.diagnostics.contraction_factor
    }

    pub fn lambda(&self) -> f64 {
        self.config.lambda
    }

    /// Largest radius covered by the inner profile, e^{−Λ/2}.
    pub fn r_edge(&self) -> f64 {
        (-0.5 * self.config.lambda).exp()
    }

    /// η and η′ at ρ ≥ Λ.
    pub fn eval(&self, rho: f64) -> Result<(f64, f64)> {
        let lam = self.config.lambda;
        if !(rho >= lam * (1.0 - 1e-13)) {
            return Err(Error::OutOfRange(format!("rho = {rho} below lambda = {lam}")));
        }
        let (rho_edge, eta_edge) = self.edge;
        if rho > rho_edge {
            return Ok(extrapolate(eta_edge, rho_edge, rho));
        }
        let u = (2.0 * rho).sqrt();
        let v = self.grid.interpolate(&self.values, u);
        let d = self.grid.interpolate(&self.derivative, u);
        Ok((v, d))
    }

    /// Value of the profile φ(ρ) + η(ρ) and its ρ-derivative.
    pub fn profile_at_rho(&self, rho: f64) -> Result<(f64, f64)> {
        let (e, de) = self.eval(rho)?;
        Ok((phi_leading(rho)? + e, phi_leading_d(rho)? + de))
    }

    /// Rebuilds a solution from stored node values; the node set must match
    /// the one generated by `config`.
    pub fn from_parts(
        config: EtaConfig,
        rho: Vec<f64>,
        values: Vec<f64>,
        derivative: Vec<f64>,
        weighted_residual: Vec<f64>,
        diagnostics: EtaDiagnostics,
    ) -> Result<Self> {
        config.validate()?;
        let grid = config.grid();
        let expect = config.nodes();
        if expect.len() != rho.len() || expect.iter().zip(&rho).any(|(a, b)| a != b) {
            return Err(Error::Data("stored rho nodes do not match the configured grid".into()));
        }
        if values.len() != rho.len() || derivative.len() != rho.len() || weighted_residual.len() != rho.len() {
            return Err(Error::Data("column lengths differ".into()));
        }
        let u_edge = grid.hi();
        let edge = (0.5 * u_edge * u_edge, grid.interpolate(&values, u_edge));
        Ok(EtaSolution { config, rho, values, derivative, weighted_residual, diagnostics, grid, edge })
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Data(e.to_string());
        out.write_record(["rho", "eta", "deta", "weighted_residual"]).map_err(err)?;
        for i in 0..self.rho.len() {
            out.write_record([
                crate::numerics::fmt_f64(self.rho[i]),
                crate::numerics::fmt_f64(self.values[i]),
                crate::numerics::fmt_f64(self.derivative[i]),
                crate::numerics::fmt_f64(self.weighted_residual[i]),
            ])
            .map_err(err)?;
        }
        out.flush().map_err(|e| Error::Data(e.to_string()))
    }

    /// Reads the four columns written by `write_csv`.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<[Vec<f64>; 4]> {
        let mut rd = csv::Reader::from_reader(r);
        let mut cols: [Vec<f64>; 4] = Default::default();
        for rec in rd.records() {
            let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
            if rec.len() != 4 {
                return Err(Error::Data("expected 4 columns".into()));
            }
            for k in 0..4 {
                cols[k].push(rec[k].parse().map_err(|_| Error::Data(format!("bad number {:?}", &rec[k])))?);
            }
        }
        Ok(cols)
    }
}

/// Solves η = T[η] from η ≡ 0.
pub fn solve_eta(cfg: &EtaConfig) -> Result<EtaSolution> {
    let op = InnerOperator::new(cfg)?;
    let n = op.len();
    let first = op.apply(&vec![0.0; n])?;
    let c_star = op.weighted_norm(&first.t);
    let ball = 2.0 * c_star;
    let probe = op.probe_contraction(ball)?;
    if probe > CONTRACTION_LIMIT {
        return Err(Error::NonContraction { factor: probe, threshold: CONTRACTION_LIMIT });
    }
    let mut history =
        vec![IterationRecord { weighted_norm: c_star, difference: c_star, ratio: None }];
    let mut eta = first.t;
    let mut prev = c_star;
    let mut picard_max = 0.0f64;
    let mut converged = false;
    for _ in 1..cfg.max_iter {
        let next = op.apply(&eta)?.t;
        let diff = op.weighted_distance(&next, &eta);
        let norm = op.weighted_norm(&next);
        if norm > ball * (1.0 + 1e-9) {
            return Err(Error::LeftBall { norm: norm / ball });
        }
        // Ratios at round-off level carry no information.
        let ratio = if prev > 1e3 * f64::EPSILON * c_star { Some(diff / prev) } else { None };
        if let Some(q) = ratio {
            picard_max = picard_max.max(q);
        }
        history.push(IterationRecord { weighted_norm: norm, difference: diff, ratio });
        eta = next;
        prev = diff;
        if diff < cfg.fp_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: cfg.max_iter, last: prev });
    }
    let factor = picard_max.max(probe);
    if factor > CONTRACTION_LIMIT {
        return Err(Error::NonContraction { factor, threshold: CONTRACTION_LIMIT });
    }
    let fin = op.apply(&eta)?;
    if fin.tail_remainder > cfg.fp_tol / 10.0 {
        return Err(Error::TailBound { bound: fin.tail_remainder, budget: cfg.fp_tol / 10.0 });
    }
    let (d1, d2) = op.derivatives(&fin);
    let mut weighted_residual = vec![0.0; n];
    let mut residual_ratio = 0.0f64;
    let mut derivative_constant = 0.0f64;
    for i in 0..n {
        let r = op.rho[i];
        let y = op.phi[i] + fin.t[i];
        let ypp = phi_leading_dd(r)? + d2[i];
        let res = emden_fowler_residual(r, y, ypp);
        weighted_residual[i] = res * r.powf(2.5) / r.ln();
        if r >= 2.0 * cfg.lambda && r <= 10.0 * cfg.lambda {
            residual_ratio = residual_ratio.max(weighted_residual[i].abs());
        }
        derivative_constant = derivative_constant.max(d1[i].abs() * weight(r));
    }
    let diagnostics = EtaDiagnostics {
        weighted_norm: op.weighted_norm(&fin.t),
        contraction_factor: factor,
        picard_ratio_max: picard_max,
        probe_ratio_max: probe,
        c_star,
        iterations: history.len(),
        last_difference: prev,
        tail_remainder: fin.tail_remainder,
        residual_ratio,
        derivative_constant,
        history,
    };
    let rho = op.rho.clone();
    EtaSolution::from_parts(cfg.clone(), rho, fin.t, d1, weighted_residual, diagnostics)
}

/// u(r) = φ(ρ) + η(ρ) and u′(r) = −(2/r)(φ′ + η′) with ρ = 2|log r|.
pub fn inner_profile(r: f64, sol: &EtaSolution) -> Result<(f64, f64)> {
    if !(r > 0.0) || r > sol.r_edge() * (1.0 + 1e-12) {
        return Err(Error::OutOfRange(format!("r = {r} outside (0, e^(-lambda/2)]")));
    }
    let rho = -2.0 * r.ln();
    let (y, dy) = sol.profile_at_rho(rho.max(sol.lambda()))?;
    Ok((y, -2.0 / r * dy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(EtaConfig::default().validate().is_ok());
        assert!(EtaConfig { lambda: 2.0, ..Default::default() }.validate().is_err());
        assert!(EtaConfig { rho_max: 5e3, ..Default::default() }.validate().is_err());
        assert!(EtaConfig { fp_tol: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn tail_series_matches_closed_form() {
        // ∫_U^∞ e^{iu} u^{-3} du against adaptive quadrature over many periods.
        let big_u = 40.0;
        let t = oscillatory_tail(|u| Ok(u.powi(-3)), big_u).unwrap();
        let opts = crate::numerics::quadrature::QuadOptions { max_intervals: 4000, ..Default::default() };
        let r = crate::numerics::quadrature::integrate(|u: f64| [u.cos() * u.powi(-3), u.sin() * u.powi(-3)], big_u, 4000.0, opts)
            .unwrap();
        let far = oscillatory_tail(|u| Ok(u.powi(-3)), 4000.0).unwrap();
        let bound = t.remainder + far.remainder;
        assert!(bound < 1e-7);
        assert!((t.cos - r.value[0] - far.cos).abs() <= bound, "{} {}", t.cos, r.value[0] + far.cos);
        assert!((t.sin - r.value[1] - far.sin).abs() <= bound);
    }

    #[test]
    fn extrapolation_derivative() {
        let (v, d) = extrapolate(2e-3, 1e3, 2e3);
        let h = 1e-3;
        let fd = (extrapolate(2e-3, 1e3, 2e3 + h).0 - extrapolate(2e-3, 1e3, 2e3 - h).0) / (2.0 * h);
        assert!((d - fd).abs() < 1e-8 * d.abs());
        assert!(v > 0.0);
    }
}
