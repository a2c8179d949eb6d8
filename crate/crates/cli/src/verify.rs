//! Named oracles run against an output directory.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::stages::{read_slice, EtaArtifact, Residuals};
use crate::store::{RunManifest, Store};
use expheat_core::heat::oracles::check_slices;
use expheat_core::heat::*;
use expheat_core::inner::oracles::{estimate_f_ratios, lem_sin};
use expheat_core::inner::EtaSolution;
use expheat_core::shooting::{ProfileTable, SolitonProfile};
use serde::Serialize;
use serde_json::{json, Value};

pub const ORACLES: [&str; 9] = [
    "hash",
    "contraction",
    "lem-sin",
    "estimate-f",
    "energy",
    "monotonicity",
    "envelope",
    "integral-formula",
    "residuals",
];

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub name: String,
    /// `None` when the oracle does not apply to these artifacts.
    pub passed: Option<bool>,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub results: Vec<OracleResult>,
    pub passed: bool,
}

struct Ctx<'a> {
    store: &'a Store,
    manifest: &'a RunManifest,
    cfg: RunConfig,
}

impl Ctx<'_> {
    fn profile(&self) -> Result<SolitonProfile, CliError> {
        let art: EtaArtifact = serde_json::from_slice(&self.store.read("eta-diagnostics.json")?)?;
        let [rho, eta, deta, res] = EtaSolution::read_csv(self.store.read("eta.csv")?.as_slice())?;
        let sol = EtaSolution::from_parts(art.config, rho, eta, deta, res, art.diagnostics)?;
        let table: ProfileTable = serde_json::from_slice(&self.store.read("phistar-table.json")?)?;
        Ok(SolitonProfile::from_table(table, &sol, &self.cfg.profile)?)
    }

    fn slices(&self) -> Result<Vec<(f64, std::collections::BTreeMap<String, Vec<f64>>)>, CliError> {
        let mut names: Vec<String> =
            self.manifest.hashes().into_keys().filter(|k| k.starts_with("slices/")).collect();
        names.sort();
        names.iter().map(|n| read_slice(&self.store.read(n)?)).collect()
    }
}

type Outcome = Result<(Option<bool>, Value), CliError>;

fn hash(c: &Ctx) -> Outcome {
    let recorded = c.manifest.hashes();
    let bad = c.store.mismatches(&recorded);
    Ok((Some(bad.is_empty() && !recorded.is_empty()), json!({ "files": recorded.len(), "mismatched": bad })))
}

fn contraction(c: &Ctx) -> Outcome {
    let art: EtaArtifact = serde_json::from_slice(&c.store.read("eta-diagnostics.json")?)?;
    let f = art.diagnostics.contraction_factor;
    Ok((Some(f <= 0.5), json!({ "contraction_factor": f, "limit": 0.5 })))
}

fn lem_sin_oracle(_: &Ctx) -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    for sigma in [1.5, 2.0, 2.5] {
        let (w, p) = lem_sin(sigma, 1e4)?;
        ok &= (w.ratio() - 1.0).abs() < 0.05 && (p.ratio() - 1.0).abs() < 0.05;
        rows.push(json!({ "sigma": sigma, "weighted_ratio": w.ratio(), "plain_ratio": p.ratio() }));
    }
    Ok((Some(ok), json!({ "rho": 1e4, "tolerance": 0.05, "rows": rows })))
}

fn estimate_f(_: &Ctx) -> Outcome {
    let q = estimate_f_ratios(1e6)?;
    let ok = q.iter().all(|x| (x - 1.0).abs() < 0.1);
    Ok((Some(ok), json!({ "rho": 1e6, "ratios_to_leading_order": q, "leading_coefficient": 3.0 * q[0] })))
}

fn energy(c: &Ctx) -> Outcome {
    let bytes = c.store.read("phistar.csv")?;
    let mut rd = csv::Reader::from_reader(bytes.as_slice());
    let mut prev: Option<f64> = None;
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for rec in rd.records() {
        let e: f64 = rec?[3].parse().map_err(|_| CliError::Usage("phistar.csv: bad energy".into()))?;
        if !e.is_finite() {
            continue;
        }
        if let Some(p) = prev {
            worst = worst.max((e - p) / (p.abs() + 1.0));
        }
        prev = Some(e);
        count += 1;
    }
    Ok((Some(worst <= 1e-8 && count > 100), json!({ "finite_points": count, "worst_relative_increase": worst })))
}

fn monotonicity(c: &Ctx) -> Outcome {
    let slices = c.slices()?;
    if slices.is_empty() {
        return Ok((None, json!("no slices")));
    }
    let r = slices[0].1["r"].clone();
    let times: Vec<f64> = slices.iter().map(|s| s.0).collect();
    let mut detail = serde_json::Map::new();
    let mut ok = true;
    for col in ["u0", "u_R"] {
        if !slices[0].1.contains_key(col) {
            continue;
        }
        let vals: Vec<Vec<f64>> = slices.iter().map(|s| s.1[col].clone()).collect();
        let rep = check_slices(&r, &times, &vals);
        ok &= rep.passed;
        detail.insert(col.into(), serde_json::to_value(&rep)?);
    }
    // the check must reject an increasing profile
    let up: Vec<Vec<f64>> = vec![r.iter().map(|x| x.min(1.0)).collect()];
    let control = check_slices(&r, &times[..1], &up);
    ok &= !control.passed;
    detail.insert("negative_control_rejected".into(), json!(!control.passed));
    Ok((Some(ok), Value::Object(detail)))
}

fn envelope(c: &Ctx) -> Outcome {
    let profile = c.profile()?;
    let eps = validity_scale(&profile)?;
    let t_max = c
        .manifest
        .picard
        .as_ref()
        .and_then(|p| p["t_max"].as_f64())
        .map_or_else(|| c.cfg.heat.horizon(eps), Ok)?;
    let solver = HeatSolver::new(&c.cfg.heat, &profile, eps, t_max)?;
    let b = u0_bounds(&solver, &profile)?;
    let spread = |v: Vec<f64>| {
        let hi = v.iter().copied().fold(0.0, f64::max);
        hi / v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let s0 = spread(b.envelope_decades.iter().map(|d| d.1).collect());
    let s1 = spread(b.envelope_decades.iter().map(|d| d.2).collect());
    let ok = b.c_f0.is_finite()
        && b.c_f0_prime.is_finite()
        && s0 < 2.0
        && s1 < 2.0
        && b.origin_spread < 1.5
        && b.c_min_envelope < 1.0;
    Ok((
        Some(ok),
        json!({
            "epsilon": eps,
            "c_f0": b.c_f0,
            "c_f0_prime": b.c_f0_prime,
            "decade_spread_f0": s0,
            "decade_spread_f0_prime": s1,
            "origin_spread": b.origin_spread,
            "c_min_envelope": b.c_min_envelope,
        }),
    ))
}

fn integral(c: &Ctx) -> Outcome {
    let eps = validity_scale(&c.profile()?)?;
    let mut ok = true;
    let mut rows = Vec::new();
    for alpha in [1.0, 1.5] {
        let samples = [1e-12, 1e-9, 1e-6, 1e-4]
            .iter()
            .map(|&t| integral_formula(t, alpha, eps, 1e-8))
            .collect::<Result<Vec<_>, _>>()?;
        for pick in [|s: &oracles::IntegralFormulaSample| s.c_singular, |s: &oracles::IntegralFormulaSample| s.c_bounded] {
            let v: Vec<f64> = samples.iter().map(pick).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            ok &= v.iter().all(|x| (x / mean - 1.0).abs() <= 0.2);
        }
        rows.push(serde_json::to_value(&samples)?);
    }
    Ok((Some(ok), json!({ "epsilon": eps, "tolerance": 0.2, "samples": rows })))
}

fn residuals(c: &Ctx) -> Outcome {
    if c.manifest.picard_present != Some(true) {
        return Ok((None, json!("picard step absent")));
    }
    let r: Residuals = serde_json::from_slice(&c.store.read("residuals.json")?)?;
    Ok((Some(r.passed), serde_json::to_value(&r)?))
}

pub fn run(store: &Store, cfg: RunConfig, only: Option<&str>) -> Result<VerifyReport, CliError> {
    if let Some(name) = only {
        if !ORACLES.contains(&name) {
            return Err(CliError::Usage(format!("unknown oracle {name:?}; known: {}", ORACLES.join(", "))));
        }
    }
    let manifest = store.manifest()?;
    if manifest.stages.is_empty() {
        return Err(CliError::Usage("no artifacts in the output directory; run the pipeline first".into()));
    }
    // check the artifacts under the configuration that produced them
    let text: String = manifest.config.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    let mut recorded = RunConfig::parse(&text)?;
    recorded.out_dir = cfg.out_dir;
    let ctx = Ctx { store, manifest: &manifest, cfg: recorded };
    let mut results = Vec::new();
    for &name in ORACLES.iter().filter(|n| only.is_none_or(|o| o == **n)) {
        let outcome = match name {
            "hash" => hash(&ctx),
            "contraction" => contraction(&ctx),
            "lem-sin" => lem_sin_oracle(&ctx),
            "estimate-f" => estimate_f(&ctx),
            "energy" => energy(&ctx),
            "monotonicity" => monotonicity(&ctx),
            "envelope" => envelope(&ctx),
            "integral-formula" => integral(&ctx),
            _ => residuals(&ctx),
        };
        let (passed, detail) = outcome.unwrap_or_else(|e| (Some(false), json!({ "error": e.to_string() })));
        results.push(OracleResult { name: name.into(), passed, detail });
    }
    let passed = results.iter().all(|r| r.passed != Some(false));
    Ok(VerifyReport { results, passed })
}
