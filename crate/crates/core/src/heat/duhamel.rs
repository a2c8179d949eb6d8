//! u₀ = e^{tΔ}φ*, the Duhamel terms D[v] and E[v], and the Picard iteration
//! v ← D[v] − E[v] for the regular solution u_R = u₀ + v.
//!
//! Both Duhamel terms are carried forward in time: for W = ∫₀ᵗ e^{(t−s)Δ}g(s) ds,
//! W(t_{k+1}) = e^{(t_{k+1}−t_k)Δ}W(t_k) + ∫_{t_k}^{t_{k+1}} e^{(t_{k+1}−s)Δ}g(s) ds,
//! so every step costs one heat application plus `duhamel_nodes` local ones.

use super::grid::{time_nodes, RadialField, RadialGrid};
use super::kernel::{heat_apply, ProfileForcing, ProfileSource};
use super::oracles::{ell, validity_scale};
use crate::error::{Error, Result};
use crate::nonlinearity::{chi, Nonlinearity};
use crate::numerics::gauss::GaussRule;
use crate::numerics::quadrature::{integrate, QuadOptions};
use crate::shooting::SolitonProfile;
use serde::{Deserialize, Serialize};

/// Bound on (C₀+C₂)/|log T| required before iterating.
pub const PICARD_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatConfig {
    /// Horizon T; `None` selects min(10⁻⁴, ε²/10).
    pub t_max: Option<f64>,
    /// First time node; the Duhamel integral over (0, t_floor) uses the forcing frozen at t_floor.
    pub t_floor: f64,
    /// Smallest reported evaluation time.
    pub eval_min: f64,
    pub steps_per_decade: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub radial_panels_per_decade: usize,
    pub radial_order: usize,
    /// Relative tolerance of each heat-kernel quadrature.
    pub conv_rel_tol: f64,
    /// Gauss nodes per time step of the local Duhamel quadrature (four times
    /// as many on the closing slab below t_floor).
    pub duhamel_nodes: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Number of T ← T/10 reductions allowed.
    pub max_shrinks: usize,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            t_max: None,
            t_floor: 1e-16,
            eval_min: 1e-12,
            steps_per_decade: 8,
            r_min: 1e-10,
            r_max: 20.0,
            radial_panels_per_decade: 2,
            radial_order: 12,
            conv_rel_tol: 1e-12,
            duhamel_nodes: 4,
            picard_tol: 1e-10,
            picard_max_iter: 20,
            max_shrinks: 4,
        }
    }
}

impl HeatConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.picard_tol > 0.0) {
            return bad("picard_tol must be positive");
        }
        if !(self.t_floor > 0.0 && self.eval_min >= self.t_floor) {
            return bad("need 0 < t_floor <= eval_min");
        }
        if !(self.r_min > 0.0 && self.r_min <= 1e-2 * self.t_floor.sqrt() && self.r_max > 1.0) {
            return bad("radial grid must reach below 0.01·√t_floor and beyond r = 1");
        }
        if self.steps_per_decade == 0 || self.duhamel_nodes == 0 || self.radial_panels_per_decade == 0 {
            return bad("node counts must be positive");
        }
        if !(4..=32).contains(&self.radial_order) {
            return bad("radial_order must lie in 4..=32");
        }
        if !(self.conv_rel_tol > 0.0 && self.conv_rel_tol < 1e-3) {
            return bad("conv_rel_tol must lie in (0, 1e-3)");
        }
        if self.picard_max_iter == 0 {
            return bad("picard_max_iter must be positive");
        }
        if let Some(t) = self.t_max {
            if !(t > self.eval_min) {
                return bad("t_max must exceed eval_min");
            }
        }
        Ok(())
    }

    /// Horizon for a given validity scale; an explicit t_max must stay below ε².
    pub fn horizon(&self, epsilon: f64) -> Result<f64> {
        let e2 = epsilon * epsilon;
        match self.t_max {
            Some(t) if t >= e2 => Err(Error::Config(format!("t_max = {t} is not below ε² = {e2}"))),
            Some(t) => Ok(t),
            None => Ok((1e-4f64).min(e2 / 10.0)),
        }
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::log_spaced(self.r_min, self.r_max, self.radial_panels_per_decade, self.radial_order)
    }
}

/// Sub-node of a time step: position, weight, and Lagrange weights in log t
/// for interpolating v from four neighbouring time nodes.
#[derive(Debug, Clone)]
struct SubNode {
    s: f64,
    weight: f64,
    lag: [(usize, f64); 4],
}

/// Precomputed geometry and u₀ tables for one horizon.
pub struct HeatSolver<'a> {
    cfg: HeatConfig,
    profile: &'a SolitonProfile,
    epsilon: f64,
    t_max: f64,
    grid: RadialGrid,
    times: Vec<f64>,
    closure: Vec<(f64, f64)>,
    steps: Vec<Vec<SubNode>>,
    u0: Vec<Vec<f64>>,
    u0_sub: Vec<Vec<Vec<f64>>>,
}

fn lagrange4(times: &[f64], k: usize, s: f64) -> [(usize, f64); 4] {
    let n = times.len();
    let j0 = if n < 4 { 0 } else { k.saturating_sub(1).min(n - 4) };
    let idx: Vec<usize> = (j0..(j0 + 4).min(n)).collect();
    let x = s.ln();
    let mut out = [(j0, 0.0); 4];
    for (a, &j) in idx.iter().enumerate() {
        let mut w = 1.0;
        for &i in &idx {
            if i != j {
                w *= (x - times[i].ln()) / (times[j].ln() - times[i].ln());
            }
        }
        out[a] = (j, w);
    }
    out
}

impl<'a> HeatSolver<'a> {
    /// Builds the solver for horizon `t_max` (validated against ε).
    pub fn new(cfg: &HeatConfig, profile: &'a SolitonProfile, epsilon: f64, t_max: f64) -> Result<Self> {
        cfg.validate()?;
        if !(t_max < epsilon * epsilon) {
            return Err(Error::Config(format!("T = {t_max} is not below ε² = {}", epsilon * epsilon)));
        }
        let grid = cfg.grid()?;
        let times = time_nodes(cfg.t_floor, t_max, cfg.steps_per_decade, &[t_max / 4.0, t_max / 2.0]);
        let rule = GaussRule::new(cfg.duhamel_nodes);
        // the frozen-forcing slab (0, t_floor) converges slower than the steps
        let closure: Vec<(f64, f64)> = GaussRule::new(4 * cfg.duhamel_nodes).mapped(0.0, times[0]).collect();
        let steps: Vec<Vec<SubNode>> = (0..times.len() - 1)
            .map(|k| {
                rule.mapped(times[k], times[k + 1])
                    .map(|(s, weight)| SubNode { s, weight, lag: lagrange4(&times, k, s) })
                    .collect()
            })
            .collect();
        let mut solver =
            HeatSolver { cfg: *cfg, profile, epsilon, t_max, grid, times, closure, steps, u0: vec![], u0_sub: vec![] };
        solver.u0 = solver.times.iter().map(|&t| solver.u0_table(t)).collect::<Result<_>>()?;
        // sub-node slices from the preceding node: u₀(s) = e^{(s−t_k)Δ}u₀(t_k)
        let mut sub = Vec::with_capacity(solver.steps.len());
        for (k, st) in solver.steps.iter().enumerate() {
            let base: Vec<[f64; 1]> = solver.u0[k].iter().map(|&x| [x]).collect();
            let src = solver.grid.smooth_source(&base);
            let tk = solver.times[k];
            let mut tables = Vec::with_capacity(st.len());
            for n in st {
                let row = solver
                    .grid
                    .r()
                    .iter()
                    .map(|&r| heat_apply(n.s - tk, &src, r, solver.cfg.conv_rel_tol).map(|v| v[0]))
                    .collect::<Result<Vec<_>>>()?;
                tables.push(row);
            }
            sub.push(tables);
        }
        solver.u0_sub = sub;
        Ok(solver)
    }

    /// u₀(t, ·) on the radial grid.
    pub fn u0_table(&self, t: f64) -> Result<Vec<f64>> {
        let src = ProfileSource(self.profile);
        self.grid.r().iter().map(|&r| heat_apply(t, &src, r, self.cfg.conv_rel_tol).map(|v| v[0])).collect()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn config(&self) -> &HeatConfig {
        &self.cfg
    }

    /// u₀ at the local quadrature nodes of step k, as (s, table).
    pub fn u0_substep(&self, k: usize) -> Vec<(f64, &[f64])> {
        self.steps[k].iter().zip(&self.u0_sub[k]).map(|(n, t)| (n.s, t.as_slice())).collect()
    }

    pub fn u0_field(&self) -> RadialField {
        RadialField { times: self.times.clone(), r: self.grid.r().to_vec(), values: self.u0.clone() }
    }

    pub fn zero(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.grid.len()]; self.times.len()]
    }

    /// [f₀(u), m*χ(u)u] with u = u₀ + v.
    fn forcing(&self, u0: &[f64], v: &[f64]) -> Result<Vec<[f64; 2]>> {
        let m = self.profile.m;
        u0.iter()
            .zip(v)
            .map(|(a, b)| {
                let u = a + b;
                Ok([Nonlinearity::pure().value(u)?, m * chi(u) * u])
            })
            .collect()
    }

    fn apply_all(&self, tau: f64, table: &[[f64; 2]], scale: f64, acc: &mut [[f64; 2]]) -> Result<()> {
        let src = self.grid.smooth_source(table);
        for (i, &r) in self.grid.r().iter().enumerate() {
            let h = heat_apply(tau, &src, r, self.cfg.conv_rel_tol)?;
            acc[i][0] += scale * h[0];
            acc[i][1] += scale * h[1];
        }
        Ok(())
    }

    /// D[v] and E[v] at every time node.
    pub fn duhamel(&self, v: &[Vec<f64>]) -> Result<(RadialField, RadialField)> {
        let n = self.grid.len();
        let mut cur = vec![[0.0; 2]; n];
        let g0 = self.forcing(&self.u0[0], &v[0])?;
        for &(tau, w) in &self.closure {
            self.apply_all(self.times[0] - tau, &g0, w, &mut cur)?;
        }
        let mut d = Vec::with_capacity(self.times.len());
        let mut e = Vec::with_capacity(self.times.len());
        d.push(cur.iter().map(|x| x[0]).collect());
        e.push(cur.iter().map(|x| x[1]).collect());
        for k in 0..self.times.len() - 1 {
            let t1 = self.times[k + 1];
            let mut next = vec![[0.0; 2]; n];
            self.apply_all(t1 - self.times[k], &cur, 1.0, &mut next)?;
            for (sub, u0) in self.steps[k].iter().zip(&self.u0_sub[k]) {
                let vs: Vec<f64> =
                    (0..n).map(|i| sub.lag.iter().map(|&(j, w)| w * v[j][i]).sum()).collect();
                let g = self.forcing(u0, &vs)?;
                self.apply_all(t1 - sub.s, &g, sub.weight, &mut next)?;
            }
            cur = next;
            d.push(cur.iter().map(|x| x[0]).collect());
            e.push(cur.iter().map(|x| x[1]).collect());
        }
        let field = |values| RadialField { times: self.times.clone(), r: self.grid.r().to_vec(), values };
        Ok((field(d), field(e)))
    }

    /// sup_t ℓ^a ‖v(t)‖_∞ over all time nodes.
    pub fn weighted_norm(&self, v: &[Vec<f64>], a: f64) -> f64 {
        self.times
            .iter()
            .zip(v)
            .map(|(&t, row)| ell(t).powf(a) * row.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            .fold(0.0, f64::max)
    }

    fn weighted_distance(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let diff: Vec<Vec<f64>> =
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect();
        self.weighted_norm(&diff, 0.5)
    }

    /// Indices of the reported evaluation times.
    pub fn eval_indices(&self) -> Vec<usize> {
        (0..self.times.len()).filter(|&k| self.times[k] >= self.cfg.eval_min).collect()
    }
}

fn difference(d: &RadialField, e: &RadialField) -> Vec<Vec<f64>> {
    d.values.iter().zip(&e.values).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardRecord {
    /// ‖v_n‖ in X^{1/2}.
    pub weighted_norm: f64,
    /// ‖v_n − v_{n−1}‖ in X^{1/2}.
    pub difference: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    pub t_max: f64,
    pub epsilon: f64,
    pub shrinks: usize,
    /// sup ℓ^{3/2}‖D[0](t)‖_∞.
    pub c0: f64,
    /// |log T| × measured Lipschitz ratio of v ↦ D[v]−E[v] in X^{1/2}.
    pub c2: f64,
    /// (C₀+C₂)/|log T|.
    pub contraction_bound: f64,
    pub iterations: usize,
    pub history: Vec<PicardRecord>,
    /// sup ℓ^{1/2}‖v‖_∞ of the returned v.
    pub norm_half: f64,
    /// sup ℓ^{3/2}‖v‖_∞ of the returned v.
    pub norm_three_halves: f64,
    /// max_t ‖E[0](t)‖_∞ / (t sup|L|), at most 1.
    pub e_bound_ratio: f64,
    /// ‖v − (D[v]−E[v])‖ in X^{1/2} for the returned v.
    pub fixed_point_defect: f64,
    pub geometric: bool,
}

pub struct PicardSolution<'a> {
    pub solver: HeatSolver<'a>,
    pub v: RadialField,
    /// D[v] and E[v] for the returned v.
    pub d: RadialField,
    pub e: RadialField,
    pub diagnostics: PicardDiagnostics,
}

impl PicardSolution<'_> {
    /// u_R = u₀ + v.
    pub fn u_regular(&self) -> RadialField {
        let u0 = &self.solver.u0;
        let values = u0.iter().zip(&self.v.values).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        RadialField { times: self.v.times.clone(), r: self.v.r.clone(), values }
    }

    /// ‖u_R(t) − u₀(t) − ∫₀ᵗ e^{(t−s)Δ}f_{m*}(u_R(s)) ds‖_{L^p} at node k.
    pub fn residual(&self, k: usize, p: f64) -> f64 {
        let h: Vec<f64> = (0..self.v.r.len())
            .map(|i| self.v.values[k][i] - (self.d.values[k][i] - self.e.values[k][i]))
            .collect();
        self.solver.grid.lp_norm(&h, p)
    }
}

/// Picks the horizon, checks the contraction budget, shrinking T when needed,
/// and iterates v ← D[v] − E[v] from v ≡ 0.
pub fn picard_solve<'a>(cfg: &HeatConfig, profile: &'a SolitonProfile) -> Result<PicardSolution<'a>> {
    cfg.validate()?;
    let epsilon = validity_scale(profile)?;
    let mut t_max = cfg.horizon(epsilon)?;
    let mut shrinks = 0;
    loop {
        let solver = HeatSolver::new(cfg, profile, epsilon, t_max)?;
        let big_l = ell(t_max);
        let (d0, e0) = solver.duhamel(&solver.zero())?;
        let c0 = solver.weighted_norm(&d0.values, 1.5);
        let first = difference(&d0, &e0);
        // Lipschitz probe: a bump of X^{1/2} size ½ against v ≡ 0
        let probe: Vec<Vec<f64>> = solver
            .times
            .iter()
            .map(|&t| solver.grid.r().iter().map(|r| 0.5 * ell(t).powf(-0.5) * (-r * r).exp()).collect())
            .collect();
        let (dp, ep) = solver.duhamel(&probe)?;
        let ratio = solver.weighted_distance(&difference(&dp, &ep), &first) / solver.weighted_norm(&probe, 0.5);
        let c2 = ratio * big_l;
        let bound = (c0 + c2) / big_l;
        if bound >= PICARD_LIMIT {
            if shrinks >= cfg.max_shrinks || t_max / 10.0 <= cfg.eval_min {
                return Err(Error::NonContraction { factor: bound, threshold: PICARD_LIMIT });
            }
            shrinks += 1;
            t_max /= 10.0;
            continue;
        }
        let sup_l = 2.0 * profile.m;
        let e_bound_ratio = solver
            .times
            .iter()
            .zip(&e0.values)
            .map(|(&t, row)| row.iter().fold(0.0f64, |m, x| m.max(x.abs())) / (t * sup_l))
            .fold(0.0, f64::max);

        let mut v = first;
        let mut history = vec![PicardRecord {
            weighted_norm: solver.weighted_norm(&v, 0.5),
            difference: solver.weighted_norm(&v, 0.5),
            ratio: None,
        }];
        let mut last = None;
        loop {
            let norm = history.last().unwrap().weighted_norm;
            if norm > 1.0 {
                return Err(Error::LeftBall { norm });
            }
            let (d, e) = solver.duhamel(&v)?;
            let next = difference(&d, &e);
            let diff = solver.weighted_distance(&next, &v);
            if diff < cfg.picard_tol {
                // `next` differs from v by less than the tolerance: keep v and its images
                last = Some((d, e, diff));
                break;
            }
            let prev = history.last().unwrap().difference;
            history.push(PicardRecord {
                weighted_norm: solver.weighted_norm(&next, 0.5),
                difference: diff,
                ratio: Some(diff / prev),
            });
            v = next;
            if history.len() >= cfg.picard_max_iter {
                break;
            }
        }
        let Some((d, e, defect)) = last else {
            return Err(Error::NoConvergence {
                iterations: history.len(),
                last: history.last().map_or(f64::NAN, |h| h.difference),
            });
        };
        let ratios: Vec<f64> = history.iter().filter_map(|h| h.ratio).collect();
        let geometric = ratios.iter().all(|&q| q < PICARD_LIMIT);
        let diagnostics = PicardDiagnostics {
            t_max,
            epsilon,
            shrinks,
            c0,
            c2,
            contraction_bound: bound,
            iterations: history.len(),
            norm_half: solver.weighted_norm(&v, 0.5),
            norm_three_halves: solver.weighted_norm(&v, 1.5),
            history,
            e_bound_ratio,
            fixed_point_defect: defect,
            geometric,
        };
        let field = RadialField { times: solver.times.clone(), r: solver.grid.r().to_vec(), values: v };
        return Ok(PicardSolution { solver, v: field, d, e, diagnostics });
    }
}

/// ‖φ* − e^{tΔ}φ* − ∫₀ᵗ e^{τΔ}f_{m*}(φ*) dτ‖_{L^p} for each p, at one time.
/// The inner time integral is taken in log τ, with the part below
/// τ_lo = 10⁻⁸ min(t, r²) replaced by τ_lo f_{m*}(φ*(r)).
pub fn stationary_residual(
    profile: &SolitonProfile,
    grid: &RadialGrid,
    t: f64,
    p_list: &[f64],
    rel_tol: f64,
) -> Result<Vec<f64>> {
    let src = ProfileSource(profile);
    let forcing = ProfileForcing(profile);
    let n = profile.nonlinearity();
    let mut h = Vec::with_capacity(grid.len());
    for &r in grid.r() {
        let phi = profile.value(r)?;
        let u0 = heat_apply(t, &src, r, rel_tol)?[0];
        let tau_lo = 1e-8 * t.min(r * r);
        let mut err = None;
        let duh = integrate(
            |x: f64| {
                let tau = x.exp();
                match heat_apply(tau, &forcing, r, rel_tol) {
                    Ok(v) => [tau * (v[0] - v[1])],
                    Err(e) => {
                        err.get_or_insert(e);
                        [0.0]
                    }
                }
            },
            tau_lo.ln(),
            t.ln(),
            QuadOptions { rel_tol: 100.0 * rel_tol, max_intervals: 2000, ..Default::default() },
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        let total = duh.value[0] + tau_lo * n.value(phi)?;
        h.push(phi - u0 - total);
    }
    Ok(p_list.iter().map(|&p| grid.lp_norm(&h, p)).collect())
}
