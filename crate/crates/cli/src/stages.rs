//! The three pipeline stages and their caching.
//!
//! A stage is skipped when the manifest holds a record with the same key and
//! every recorded file still has its recorded hash. The key hashes the tool
//! version, the stage's configuration section and the hashes of the upstream
//! artifacts, so any upstream change invalidates everything below it.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::store::{sha256_hex, RunManifest, StageRecord, Store};
use expheat_core::heat::report::SliceSummary;
use expheat_core::heat::*;
use expheat_core::inner::{solve_eta, EtaConfig, EtaDiagnostics, EtaSolution};
use expheat_core::numerics::fmt_f64;
use expheat_core::shooting::mstar::classify_persistent;
use expheat_core::shooting::profile::GlueResiduals;
use expheat_core::shooting::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const LP_EXPONENTS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

pub struct Pipeline {
    pub cfg: RunConfig,
    pub store: Store,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaArtifact {
    pub config: EtaConfig,
    pub diagnostics: EtaDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolitonSummary {
    pub m_star: f64,
    pub bracket: (f64, f64),
    pub bracket_width: f64,
    pub bracket_tol: f64,
    pub big_r: f64,
    pub du_at_big_r: f64,
    pub r_inf: Option<f64>,
    pub decay_constant: Option<f64>,
    pub lp_norms: BTreeMap<String, f64>,
    pub glue: GlueResiduals,
    /// (r_min, sup_{r ≥ r_min} φ* / (−2 log r_min)^{1/2}).
    pub divergence: Vec<(f64, f64)>,
    pub scan: MstarResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub m: f64,
    pub outcome: ShootOutcome,
    /// Integration radius that settled the outcome.
    pub r_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Residuals {
    pub regular: Vec<report::ResidualRow>,
    pub stationary: Vec<report::ResidualRow>,
    pub separation: f64,
    pub separation_threshold: f64,
    pub passed: bool,
}

fn key_of<T: Serialize>(stage: &str, parts: &T) -> Result<String, CliError> {
    let body = serde_json::to_vec(&(VERSION, stage, parts))?;
    Ok(sha256_hex(&body))
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt_f64(*x)))?;
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let store = Store::open(&cfg.out_dir)?;
        let mut manifest = store.manifest()?;
        manifest.tool_version = VERSION.to_string();
        manifest.config = cfg.flat();
        Ok(Pipeline { cfg, store, manifest })
    }

    fn record(&mut self, stage: &str, key: String, artifacts: BTreeMap<String, String>, clock: Instant) -> Result<(), CliError> {
        let seconds = clock.elapsed().as_secs_f64();
        self.manifest.stages.insert(stage.into(), StageRecord { key, artifacts, seconds });
        self.store.save_manifest(&self.manifest)
    }

    fn upstream(&self, stage: &str) -> BTreeMap<String, String> {
        self.manifest.stages.get(stage).map(|s| s.artifacts.clone()).unwrap_or_default()
    }

    pub fn eta(&mut self, force: bool) -> Result<EtaSolution, CliError> {
        let key = key_of("eta", &self.cfg.eta)?;
        if !force && self.store.is_fresh(&self.manifest, "eta", &key) {
            let art: EtaArtifact = serde_json::from_slice(&self.store.read("eta-diagnostics.json")?)?;
            let [rho, eta, deta, res] = EtaSolution::read_csv(self.store.read("eta.csv")?.as_slice())?;
            return Ok(EtaSolution::from_parts(art.config, rho, eta, deta, res, art.diagnostics)?);
        }
        let clock = Instant::now();
        let sol = solve_eta(&self.cfg.eta)?;
        let mut buf = Vec::new();
        sol.write_csv(&mut buf)?;
        let mut files = BTreeMap::new();
        files.insert("eta.csv".into(), self.store.write_raw("eta.csv", &buf)?);
        let art = EtaArtifact { config: sol.config.clone(), diagnostics: sol.diagnostics.clone() };
        files.insert("eta-diagnostics.json".into(), self.store.write_json("eta-diagnostics.json", &art)?);
        self.manifest.eta = Some(serde_json::json!({
            "weighted_norm": sol.diagnostics.weighted_norm,
            "contraction_factor": sol.diagnostics.contraction_factor,
        }));
        self.record("eta", key, files, clock)?;
        Ok(sol)
    }

    pub fn soliton(&mut self, force: bool) -> Result<SolitonProfile, CliError> {
        let eta = self.eta(false)?;
        let key = key_of("soliton", &(self.upstream("eta"), &self.cfg.shoot, &self.cfg.profile))?;
        if !force && self.store.is_fresh(&self.manifest, "soliton", &key) {
            let table: ProfileTable = serde_json::from_slice(&self.store.read("phistar-table.json")?)?;
            return Ok(SolitonProfile::from_table(table, &eta, &self.cfg.profile)?);
        }
        let clock = Instant::now();
        let shoot = &self.cfg.shoot;
        let points = find_r_and_rinf(&eta, shoot.ode())?;
        let scan = find_mstar(&points, shoot)?;
        let profile = assemble_phistar(&eta, &points, &scan, shoot, &self.cfg.profile)?;
        let mut lp_norms = BTreeMap::new();
        for p in LP_EXPONENTS {
            lp_norms.insert(format!("{p}"), profile.lp_norm(p)?);
        }
        let divergence = [1e-100f64, 1e-200, 1e-300]
            .iter()
            .map(|&r| Ok((r, profile.sup_from(r)? / (-2.0 * r.ln()).sqrt())))
            .collect::<Result<Vec<_>, CliError>>()?;
        let summary = SolitonSummary {
            m_star: scan.m_star,
            bracket: scan.bracket,
            bracket_width: scan.bracket.1 - scan.bracket.0,
            bracket_tol: shoot.bracket_tol,
            big_r: profile.big_r,
            du_at_big_r: profile.du_at_big_r,
            r_inf: profile.r_inf,
            decay_constant: profile.decay_constant,
            lp_norms: lp_norms.clone(),
            glue: profile.glue_residuals()?,
            divergence,
            scan,
        };
        let mut buf = Vec::new();
        profile.write_csv(&mut buf)?;
        let mut files = BTreeMap::new();
        files.insert("phistar.csv".into(), self.store.write_raw("phistar.csv", &buf)?);
        files.insert("phistar-table.json".into(), self.store.write_json("phistar-table.json", &profile.table())?);
        files.insert("soliton-summary.json".into(), self.store.write_json("soliton-summary.json", &summary)?);
        let m = &mut self.manifest;
        m.m_star = Some(summary.m_star);
        m.big_r = Some(summary.big_r);
        m.r_inf = summary.r_inf;
        m.decay_constant = summary.decay_constant;
        m.lp_norms = lp_norms;
        self.record("soliton", key, files, clock)?;
        Ok(profile)
    }

    /// Classifies the trajectory leaving the inner region at a given mass.
    pub fn classify(&mut self, mass: f64, force: bool) -> Result<Classification, CliError> {
        let eta = self.eta(false)?;
        let key = key_of("classification", &(self.upstream("eta"), &self.cfg.shoot, mass.to_bits()))?;
        if !force && self.store.is_fresh(&self.manifest, "classification", &key) {
            return Ok(serde_json::from_slice(&self.store.read("classification.json")?)?);
        }
        let clock = Instant::now();
        let points = find_r_and_rinf(&eta, self.cfg.shoot.ode())?;
        let (outcome, r_max) = classify_persistent(mass, points.state(), &self.cfg.shoot)?;
        let c = Classification { m: mass, outcome, r_max };
        let mut files = BTreeMap::new();
        files.insert("classification.json".into(), self.store.write_json("classification.json", &c)?);
        self.record("classification", key, files, clock)?;
        Ok(c)
    }

    pub fn evolve(&mut self, skip_picard: bool, force: bool) -> Result<(), CliError> {
        let profile = self.soliton(false)?;
        let key = key_of("evolve", &(self.upstream("soliton"), &self.cfg.heat, skip_picard))?;
        if !force && self.store.is_fresh(&self.manifest, "evolve", &key) {
            return Ok(());
        }
        let clock = Instant::now();
        let mut files = BTreeMap::new();
        for stale in ["residuals.json", "nonuniqueness.json", "picard.json"] {
            let _ = std::fs::remove_file(self.store.path(stale));
        }
        let _ = std::fs::remove_dir_all(self.store.path("slices"));
        if skip_picard {
            let eps = validity_scale(&profile)?;
            let solver = HeatSolver::new(&self.cfg.heat, &profile, eps, self.cfg.heat.horizon(eps)?)?;
            self.write_slices(&solver, None, &mut files)?;
            files.insert("u0-bounds.json".into(), self.store.write_json("u0-bounds.json", &u0_bounds(&solver, &profile)?)?);
            self.manifest.picard_present = Some(false);
            self.manifest.picard = None;
            self.manifest.residuals = None;
        } else {
            let sol = picard_solve(&self.cfg.heat, &profile)?;
            let rep = nonuniqueness_report(&sol, &profile)?;
            self.write_slices(&sol.solver, Some(&sol), &mut files)?;
            files.insert("u0-bounds.json".into(), self.store.write_json("u0-bounds.json", &u0_bounds(&sol.solver, &profile)?)?);
            let residuals = Residuals {
                regular: rep.regular_residuals.clone(),
                stationary: rep.stationary_residuals.clone(),
                separation: rep.separation,
                separation_threshold: rep.separation_threshold,
                passed: rep.residuals_pass() && rep.separated,
            };
            files.insert("residuals.json".into(), self.store.write_json("residuals.json", &residuals)?);
            files.insert("nonuniqueness.json".into(), self.store.write_json("nonuniqueness.json", &rep)?);
            files.insert("picard.json".into(), self.store.write_json("picard.json", &sol.diagnostics)?);
            self.manifest.picard_present = Some(true);
            self.manifest.picard = Some(serde_json::to_value(&sol.diagnostics)?);
            self.manifest.residuals = Some(serde_json::to_value(&residuals)?);
        }
        self.record("evolve", key, files, clock)
    }

    /// One CSV per reported time: t, r, u₀ and, with a solution, v and u_R.
    fn write_slices(
        &self,
        solver: &HeatSolver<'_>,
        sol: Option<&PicardSolution<'_>>,
        files: &mut BTreeMap<String, String>,
    ) -> Result<(), CliError> {
        let u0 = solver.u0_field();
        let header: &[&str] = if sol.is_some() { &["t", "r", "u0", "v", "u_R"] } else { &["t", "r", "u0"] };
        for (n, k) in solver.eval_indices().into_iter().enumerate() {
            let t = u0.times[k];
            let rows = u0.r.iter().enumerate().map(|(i, &r)| {
                let a = u0.values[k][i];
                match sol {
                    Some(s) => {
                        let v = s.v.values[k][i];
                        vec![t, r, a, v, a + v]
                    }
                    None => vec![t, r, a],
                }
            });
            let rel = format!("slices/slice-{n:03}.csv");
            let hash = self.store.write_raw(&rel, &csv_bytes(header, rows)?)?;
            files.insert(rel, hash);
        }
        Ok(())
    }
}

/// Reads a slice file back as (t, r column, value columns by header).
pub fn read_slice(bytes: &[u8]) -> Result<(f64, BTreeMap<String, Vec<f64>>), CliError> {
    let mut rd = csv::Reader::from_reader(bytes);
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in rd.records() {
        let rec = rec?;
        for (h, field) in header.iter().zip(rec.iter()) {
            let x: f64 = field.parse().map_err(|_| CliError::Usage(format!("bad number {field:?}")))?;
            cols.get_mut(h).unwrap().push(x);
        }
    }
    let t = cols.get("t").and_then(|c| c.first().copied()).ok_or_else(|| CliError::Usage("empty slice".into()))?;
    Ok((t, cols))
}

/// Human-readable digest of the manifest.
pub fn summary_lines(m: &RunManifest, slices: Option<&[SliceSummary]>) -> Vec<String> {
    let mut out = vec![format!("expheat {}", m.tool_version)];
    let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.9}"));
    if let Some(e) = &m.eta {
        out.push(format!("inner fixed point: contraction factor {}, weighted norm {}", e["contraction_factor"], e["weighted_norm"]));
    }
    out.push(format!("critical mass m* = {}, R = {}, R_inf = {}", num(m.m_star), num(m.big_r), num(m.r_inf)));
    let mut norms: Vec<(&String, &f64)> = m.lp_norms.iter().collect();
    norms.sort_by(|a, b| a.0.parse::<f64>().unwrap_or(f64::NAN).total_cmp(&b.0.parse().unwrap_or(f64::NAN)));
    for (p, v) in norms {
        out.push(format!("  ||phi*||_L{p} = {v:.9}"));
    }
    match (&m.picard_present, &m.picard) {
        (Some(true), Some(p)) => out.push(format!(
            "picard: T = {}, {} iterations, X^1/2 norm {}, X^3/2 norm {}",
            p["t_max"], p["iterations"], p["norm_half"], p["norm_three_halves"]
        )),
        (Some(false), _) => out.push("picard: skipped".into()),
        _ => out.push("picard: not run".into()),
    }
    if let Some(r) = &m.residuals {
        out.push(format!(
            "residuals pass: {}; separation {} (threshold {})",
            r["passed"], r["separation"], r["separation_threshold"]
        ));
    }
    if let Some(sl) = slices {
        for s in sl.iter().step_by(8) {
            out.push(format!("  t = {:.3e}: sup u_R = {:.6}, phi*(sqrt t) = {:.6}", s.t, s.sup_regular, s.phistar_at_sqrt_t));
        }
    }
    out
}
